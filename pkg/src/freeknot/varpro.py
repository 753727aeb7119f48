"""Variable projection over the free interior knots of a least-squares B-spline fit.

For fixed knots the coefficients are ``c = Phi^+ f`` and the residual is
``r = f - Phi c``; the knots are then refined by Levenberg-Marquardt steps
on ``r(alpha)`` using the Golub-Pereyra Jacobian (or Kaufman's
simplification, which drops the residual-dependent term).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .spline import (
    RANK_TOL,
    DesignMatrixBundle,
    KnotError,
    KnotVector,
    Signal,
    SplineModel,
    build_design,
)

MODES = ("full", "kaufman")
# knots may nearly coalesce (cusps need it); SW checks and SVD truncation guard the rest
DELTA_MIN_FRAC = 0.1


@dataclass(frozen=True)
class VpOptions:
    max_iter: int = 4
    mode: str = "full"
    term_tol: float = 1e-1
    delta_min: float | None = None  # defaults to h / 10
    damping: float = 1e-3
    damping_factor: float = 10.0
    damping_floor: float = 1e-12
    max_retries: int = 12
    rank_tol: float = RANK_TOL


@dataclass(frozen=True)
class VpState:
    alpha: np.ndarray
    knots: KnotVector
    bundle: DesignMatrixBundle
    coeffs: np.ndarray
    residual: np.ndarray
    objective: float
    jac: np.ndarray
    damping: float
    iter: int = 0
    stalled: bool = False
    fevals: int = 1


@dataclass(frozen=True)
class ConvergenceEstimate:
    mu: float
    rho: float
    pairs: np.ndarray
    defined: bool = True


@dataclass
class FitReport:
    objective: list = field(default_factory=list)
    iterations: int = 0
    fevals: int = 0
    stalled: bool = False
    terminated: bool = False
    criterion: list = field(default_factory=list)
    alphas: list = field(default_factory=list)
    convergence: ConvergenceEstimate | None = None
    seconds: float = 0.0


def linear_solve(bundle: DesignMatrixBundle, f: np.ndarray):
    """Pseudoinverse solution ``c = V S^+ U^T f`` with residual and ``||r||^2``."""
    proj = bundle.U.T @ f
    coeffs = bundle.Vt.T @ (proj / bundle.s)
    residual = f - bundle.U @ proj
    return coeffs, residual, float(residual @ residual)


def jacobian_terms(bundle: DesignMatrixBundle, coeffs: np.ndarray, residual: np.ndarray):
    """Columns ``K_j f = P_perp D_j c`` and ``L_j f = (Phi^+)^T D_j^T r``."""
    U = bundle.U
    m = len(bundle.deriv_slabs)
    N, dim = bundle.phi.shape
    dc = np.zeros((N, m))
    dr = np.zeros((dim, m))
    for j, slab in enumerate(bundle.deriv_slabs):
        dc[slab.r0 : slab.r1, j] = slab.block @ coeffs[slab.c0 : slab.c1]
        dr[slab.c0 : slab.c1, j] = slab.block.T @ residual[slab.r0 : slab.r1]
    K = dc - U @ (U.T @ dc)
    L = U @ ((bundle.Vt @ dr) / bundle.s[:, None])
    return K, L


def vp_jacobian(bundle: DesignMatrixBundle, f: np.ndarray, mode: str = "full", coeffs=None, residual=None):
    """Jacobian of the projected residual ``P_perp(alpha) f`` with respect to the interior knots."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if coeffs is None or residual is None:
        coeffs, residual, _ = linear_solve(bundle, f)
    K, L = jacobian_terms(bundle, coeffs, residual)
    return -(K + L) if mode == "full" else -K


def gradient(state: VpState) -> np.ndarray:
    """``grad ||P_perp f||^2 = 2 J^T r``."""
    return 2.0 * state.jac.T @ state.residual


def make_state(sig: Signal, knots: KnotVector, mode: str = "full", rank_tol: float = RANK_TOL, **kw) -> VpState:
    bundle = build_design(knots, sig, rank_tol)
    coeffs, residual, obj = linear_solve(bundle, sig.f)
    jac = vp_jacobian(bundle, sig.f, mode, coeffs, residual)
    kw.setdefault("damping", 1e-3)
    return VpState(knots.interior.copy(), knots, bundle, coeffs, residual, obj, jac, **kw)


def objective_at(sig: Signal, knots: KnotVector, rank_tol: float = RANK_TOL) -> float:
    bundle = build_design(knots, sig, rank_tol, slabs=False)
    return linear_solve(bundle, sig.f)[2]


def admissible(alpha: np.ndarray, a: float, b: float, delta_min: float) -> bool:
    gaps = np.diff(np.concatenate([[a], alpha, [b]]))
    return bool(np.all(np.isfinite(alpha)) and np.all(gaps >= delta_min))


def vp_step(state: VpState, sig: Signal, opts: VpOptions = VpOptions()) -> VpState:
    """One Levenberg-Marquardt step on the projected residual.

    A trial is accepted when the objective decreases and the knots keep
    their order with gaps of at least ``delta_min``; otherwise the damping
    grows and the step is retried.  On exhaustion the returned state is
    flagged as stalled.
    """
    kv = state.knots
    delta_min = opts.delta_min if opts.delta_min is not None else sig.h * DELTA_MIN_FRAC
    J, r = state.jac, state.residual
    JtJ = J.T @ J
    g = J.T @ r
    # isotropic (Levenberg) damping; diag(J^T J) scaling stalls on clustered knots
    scale = max(np.trace(JtJ) / max(JtJ.shape[0], 1), np.finfo(float).tiny)
    eye = np.eye(JtJ.shape[0])
    lam = state.damping
    fevals = state.fevals
    for _ in range(opts.max_retries + 1):
        try:
            step = np.linalg.solve(JtJ + lam * scale * eye, -g)
        except np.linalg.LinAlgError:
            lam *= opts.damping_factor
            continue
        trial = state.alpha + step
        if admissible(trial, kv.a, kv.b, delta_min):
            try:
                new = make_state(
                    sig,
                    kv.with_interior(trial),
                    opts.mode,
                    opts.rank_tol,
                    damping=max(lam / opts.damping_factor, opts.damping_floor),
                    iter=state.iter + 1,
                    fevals=fevals + 1,
                )
            except KnotError:
                new = None
            fevals += 1
            if new is not None and new.objective < state.objective:
                return new
        lam *= opts.damping_factor
    return replace(state, stalled=True, fevals=fevals, iter=state.iter + 1)


def estimate_convergence(alphas) -> ConvergenceEstimate:
    """Fit ``log|e_{k+1}| = rho log|e_k| + log mu`` with ``e_k = alpha_k - alpha_{k-1}``."""
    alphas = [np.asarray(a, dtype=float) for a in alphas]
    eps = np.array([np.linalg.norm(b - a) for a, b in zip(alphas[:-1], alphas[1:])])
    return estimate_from_steps(eps)


def estimate_from_steps(eps) -> ConvergenceEstimate:
    eps = np.asarray(eps, dtype=float)
    pairs = np.column_stack([eps[:-1], eps[1:]]) if eps.size > 1 else np.zeros((0, 2))
    pairs = pairs[np.all(pairs > 0, axis=1)]
    logs = np.log(pairs)
    if logs.shape[0] < 3:
        return ConvergenceEstimate(np.nan, np.nan, logs, defined=False)
    rho, log_mu = np.polyfit(logs[:, 0], logs[:, 1], 1)
    return ConvergenceEstimate(float(np.exp(log_mu)), float(rho), logs)


def vp_optimize(sig: Signal, init: KnotVector, degree: int | None = None, opts: VpOptions = VpOptions()):
    """Refine ``init`` knots; returns ``(SplineModel, FitReport, final VpState)``.

    Stops after ``max_iter`` steps, on a stalled step, or once the fitted
    curve moves by less than ``term_tol`` in the 2-norm between iterations.
    """
    t0 = time.perf_counter()
    degree = init.degree if degree is None else degree
    if degree < 1:
        raise KnotError("knot refinement needs degree >= 1")
    kv = KnotVector(degree, np.sort(init.interior), init.a, init.b)
    state = make_state(sig, kv, opts.mode, opts.rank_tol, damping=opts.damping)
    report = FitReport(objective=[state.objective], alphas=[state.alpha.copy()])
    fitted = sig.f - state.residual
    while state.iter < opts.max_iter:
        nxt = vp_step(state, sig, opts)
        if nxt.stalled:
            state = nxt
            report.stalled = True
            break
        new_fit = sig.f - nxt.residual
        crit = float(np.linalg.norm(new_fit - fitted))
        report.criterion.append(crit)
        report.objective.append(nxt.objective)
        report.alphas.append(nxt.alpha.copy())
        state, fitted = nxt, new_fit
        if crit < opts.term_tol:
            report.terminated = True
            break
    report.iterations = len(report.alphas) - 1
    report.fevals = state.fevals
    if len(report.alphas) >= 4:
        report.convergence = estimate_convergence(report.alphas)
    report.seconds = time.perf_counter() - t0
    return SplineModel(state.knots, state.coeffs), report, state


def fit_fixed(sig: Signal, knots: KnotVector, rank_tol: float = RANK_TOL) -> SplineModel:
    """Least-squares spline on fixed knots."""
    bundle = build_design(knots, sig, rank_tol, slabs=False)
    return SplineModel(knots, linear_solve(bundle, sig.f)[0])


def lethargy_probe(sig: Signal, knots: KnotVector, p: int, step: float | None = None) -> float:
    """Directional derivative of ``r2`` along the outward normal of the face ``alpha_p = alpha_{p-1}``.

    ``p`` indexes the interior knots from 1; the normal is
    ``(..., -1, +1, ...) / sqrt(2)`` on positions ``p-1, p`` (it widens the
    gap).  Central differences with ``step`` (default a tenth of the gap).
    """
    alpha = knots.interior
    if not 2 <= p <= alpha.size:
        raise IndexError(f"face index {p} outside [2, {alpha.size}]")
    gap = alpha[p - 1] - alpha[p - 2]
    step = gap / 10 if step is None else step
    normal = np.zeros(alpha.size)
    normal[p - 2], normal[p - 1] = -1.0, 1.0
    normal /= np.sqrt(2.0)
    plus = objective_at(sig, knots.with_interior(alpha + step * normal))
    minus = objective_at(sig, knots.with_interior(alpha - step * normal))
    return (plus - minus) / (2 * step)
