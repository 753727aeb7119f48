"""Comparison knot strategies: greedy knot reduction, uniform and random initial knots."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .spline import KnotError, KnotVector, Signal, basis_matrix, build_design, validate_sw
from .varpro import VpOptions, fit_fixed, linear_solve, vp_optimize

METHODS = ("KR", "UVP", "RVP")
KR_CAP = 512


@dataclass(frozen=True)
class BaselineConfig:
    method: str
    target_knots: int
    seed: int | None = None
    vp_iters: int = 4

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.target_knots < 2:
            raise ValueError("target_knots must be at least 2")
        if self.method == "RVP" and self.seed is None:
            raise ValueError("RVP needs a seed")


@dataclass
class ReductionTrace:
    """Global MSE after each accepted removal and the number of skipped candidates."""

    mse: list = field(default_factory=list)
    skipped: int = 0


def uniform_init(a: float, b: float, n: int, degree: int = 3) -> KnotVector:
    """``n`` equal spans on ``[a, b]``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    return KnotVector(degree, np.linspace(a, b, n + 1)[1:-1], a, b)


def random_init(
    a: float, b: float, n: int, delta: float, seed: int, degree: int = 3, attempts: int = 1000, sig: Signal | None = None
) -> KnotVector:
    """Sorted uniform-random interior knots, resampled until every gap is at least ``delta``.

    With ``sig`` given, draws that violate Schoenberg-Whitney on its samples are also rejected.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if n * delta >= b - a:
        raise KnotError(f"{n - 1} knots with spacing {delta} do not fit in [{a}, {b}]")
    rng = np.random.default_rng(seed)
    for _ in range(attempts):
        alpha = np.sort(rng.uniform(a, b, size=n - 1))
        if np.all(np.diff(np.concatenate([[a], alpha, [b]])) >= delta):
            kv = KnotVector(degree, alpha, a, b)
            if sig is None or validate_sw(kv, sig):
                return kv
    raise KnotError(f"no admissible random knots after {attempts} attempts")


def _removal_cost(sig: Signal, degree: int, tau: np.ndarray, coeffs: np.ndarray, residual: np.ndarray, j: int, margin: int) -> float:
    """RSS increase from deleting interior knot ``j`` with a local refit.

    Coefficients of basis functions away from the knot keep their global
    values; the ``degree + 1`` merged functions plus ``margin`` on either
    side are refitted on their joint support.  This bounds the cost after
    a full refit from above.
    """
    l = degree
    p = j + l + 1  # position in the padded sequence
    t2 = np.delete(tau, p)
    dim2 = t2.size - l - 1
    lo, hi = max(0, p - l - 1 - margin), min(dim2 - 1, p - 1 + margin)
    s0 = int(np.searchsorted(sig.x, t2[lo], side="left"))
    s1 = int(np.searchsorted(sig.x, t2[hi + l + 1], side="right"))
    B = basis_matrix(t2, l, sig.x[s0:s1])
    kept = np.concatenate([coeffs[: p - l - 1], np.zeros(l + 1), coeffs[p + 1 :]])
    free = np.zeros(dim2, dtype=bool)
    free[lo : hi + 1] = True
    y = sig.f[s0:s1] - B[:, ~free] @ kept[~free]
    # the window may hold fewer samples than free functions; lstsq still gives the RSS
    A = B[:, free]
    r = y - A @ np.linalg.lstsq(A, y, rcond=None)[0]
    old = residual[s0:s1]
    return float(r @ r) - float(old @ old)


def _initial_knots(sig: Signal, degree: int, cap: int) -> np.ndarray:
    """Interior sample points, thinned evenly until the design is admissible."""
    m = min(cap, sig.N - 2, sig.N - degree - 1)
    while m > 0:
        idx = np.unique(np.round(np.linspace(1, sig.N - 2, m)).astype(int))
        kv = KnotVector(degree, sig.x[idx], sig.a, sig.b)
        if validate_sw(kv, sig):
            return kv.interior
        m -= 1
    return np.empty(0)


def knot_reduction(sig: Signal, degree: int, target: int, cap: int = KR_CAP, trace: ReductionTrace | None = None) -> KnotVector:
    """Remove the knot whose absence raises the error least until ``target`` knots remain.

    ``target`` counts the boundary knots.  Removal costs come from a local
    refit around each knot (see :func:`_removal_cost`); after each removal
    the spline is refitted globally and only neighbouring costs are
    rescored.  Removals that break the Schoenberg-Whitney condition are
    skipped.
    """
    if target < 2 or target > sig.N:
        raise KnotError(f"target {target} outside [2, {sig.N}]")
    interior = list(_initial_knots(sig, degree, cap))
    want = target - 2
    trace = trace if trace is not None else ReductionTrace()
    margin = 2 * (degree + 1)

    def refit(vals):
        kv = KnotVector(degree, np.asarray(vals), sig.a, sig.b)
        coeffs, residual, rss = linear_solve(build_design(kv, sig, slabs=False), sig.f)
        return kv.full, coeffs, residual, rss

    tau, coeffs, residual, rss = refit(interior)

    def score(i):
        return _removal_cost(sig, degree, tau, coeffs, residual, i, margin)

    costs = [score(i) for i in range(len(interior))]
    trace.mse.append(rss / sig.N)
    banned = set()
    while len(interior) > want:
        order = np.argsort(costs, kind="stable")
        removed = False
        for i in order:
            key = interior[i]
            if key in banned or not np.isfinite(costs[i]):
                continue
            trial = interior[:i] + interior[i + 1 :]
            try:
                tau, coeffs, residual, rss = refit(trial)
            except KnotError:
                banned.add(key)
                trace.skipped += 1
                continue
            interior = trial
            del costs[i]
            reach = degree + 2 + margin
            for k in range(max(0, i - reach), min(len(interior), i + reach)):
                costs[k] = score(k)
            trace.mse.append(rss / sig.N)
            removed = True
            break
        if not removed:
            raise KnotError(f"cannot reduce below {len(interior) + 2} knots without violating Schoenberg-Whitney")
    return KnotVector(degree, np.asarray(interior), sig.a, sig.b)


def run_baseline(sig: Signal, cfg: BaselineConfig, degree: int = 3, opts: VpOptions | None = None, delta: float | None = None):
    """Fit ``sig`` with a baseline; returns ``(SplineModel, FitReport | None)``."""
    n = cfg.target_knots - 1
    if cfg.method == "KR":
        kv = knot_reduction(sig, degree, cfg.target_knots)
        return fit_fixed(sig, kv), None
    opts = opts or VpOptions(max_iter=cfg.vp_iters)
    if cfg.method == "UVP":
        init = uniform_init(sig.a, sig.b, n, degree)
    else:
        init = random_init(sig.a, sig.b, n, sig.h if delta is None else delta, cfg.seed, degree, sig=sig)
    model, report, _ = vp_optimize(sig, init, degree, opts)
    return model, report
