"""Knot prediction from first-order (piecewise constant) B-spline approximations.

Knots live on the sample grid: a knot at index ``i`` starts a new constant
piece with sample ``i``.  Span ``q`` between knot indices ``t_q < t_{q+1}``
owns samples ``t_q .. t_{q+1}-1``; the last span also owns ``N-1``.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .spline import KnotVector, Signal

NORMS = (1, 2, np.inf)
TIE_RTOL = 1e-9


class FobaError(ValueError):
    """Knot prediction is infeasible for the requested count and spacing."""


def parse_norm(p) -> float:
    if isinstance(p, str):
        key = p.lower().lstrip("l").replace("_", "")
        table = {"1": 1, "2": 2, "inf": np.inf, "infty": np.inf, "infinity": np.inf}
        if key not in table:
            raise ValueError(f"unknown norm {p!r}")
        return table[key]
    if p in (1, 2) or p == np.inf:
        return p
    raise ValueError(f"unsupported norm {p!r}; use 1, 2 or inf")


@dataclass(frozen=True)
class PrefixTables:
    """Prefix sums and a sparse table for O(1) range queries on ``f``."""

    f: np.ndarray
    h: float
    cumsum: np.ndarray
    cumsq: np.ndarray
    mins: tuple
    maxs: tuple

    @classmethod
    def build(cls, sig: Signal) -> "PrefixTables":
        f = sig.f
        h = sig.h
        cumsum = np.concatenate([[0.0], np.cumsum(h * f)])
        cumsq = np.concatenate([[0.0], np.cumsum(h * f * f)])
        mins, maxs = [f.copy()], [f.copy()]
        width = 1
        while 2 * width <= f.size:
            lo, hi = mins[-1], maxs[-1]
            mins.append(np.minimum(lo[:-width], lo[width:]))
            maxs.append(np.maximum(hi[:-width], hi[width:]))
            width *= 2
        return cls(f, h, cumsum, cumsq, tuple(mins), tuple(maxs))

    def integral(self, i: int, j: int) -> float:
        """``h * sum(f[i:j])``."""
        return self.cumsum[j] - self.cumsum[i]

    def range_min(self, i: int, j: int) -> float:
        k = (j - i).bit_length() - 1
        return min(self.mins[k][i], self.mins[k][j - (1 << k)])

    def range_max(self, i: int, j: int) -> float:
        k = (j - i).bit_length() - 1
        return max(self.maxs[k][i], self.maxs[k][j - (1 << k)])


def first_order_coeffs(segment, p) -> float:
    """Best constant approximation of a segment in the ``p`` norm."""
    p = parse_norm(p)
    v = np.asarray(segment, dtype=float)
    if v.size == 0:
        raise ValueError("empty segment")
    if p == 2:
        return float(v.mean())
    if p == 1:
        return float(np.partition(v, (v.size - 1) // 2)[(v.size - 1) // 2])
    return float((v.min() + v.max()) / 2)


def _check_split(span, alpha):
    start, stop = span
    if not start < alpha < stop:
        raise ValueError(f"split {alpha} leaves an empty sub-span of [{start}, {stop})")


def e2_objective(tables: PrefixTables, span, alpha: int) -> float:
    """``-F(alpha)^2/(alpha - t_q) - (F(t_{q+1}) - F(alpha))^2/(t_{q+1} - alpha)``.

    ``span`` is ``(start, stop)`` in sample indices (stop exclusive).
    Smaller is better.
    """
    _check_split(span, alpha)
    start, stop = span
    h = tables.h
    left = tables.integral(start, alpha)
    right = tables.integral(alpha, stop)
    return -(left**2) / (h * (alpha - start)) - right**2 / (h * (stop - alpha))


def span_error(tables: PrefixTables, span, p) -> float:
    """Error of the best single constant on ``span``."""
    p = parse_norm(p)
    start, stop = span
    if p == 2:
        s = tables.integral(start, stop)
        sq = tables.cumsq[stop] - tables.cumsq[start]
        return max(sq - s * s / (tables.h * (stop - start)), 0.0)
    if p == np.inf:
        return (tables.range_max(start, stop) - tables.range_min(start, stop)) / 2
    seg = tables.f[start:stop]
    return tables.h * float(np.abs(seg - first_order_coeffs(seg, 1)).sum())


def ep_objective(tables: PrefixTables, span, alpha: int, p) -> float:
    """``p``-norm error of the best two-piece constant split at ``alpha``."""
    p = parse_norm(p)
    _check_split(span, alpha)
    start, stop = span
    if p == 2:
        return span_error(tables, (start, alpha), 2) + span_error(tables, (alpha, stop), 2)
    if p == np.inf:
        return max(span_error(tables, (start, alpha), p), span_error(tables, (alpha, stop), p))
    return span_error(tables, (start, alpha), 1) + span_error(tables, (alpha, stop), 1)


def _running_l1(vals: np.ndarray) -> np.ndarray:
    """Sum of absolute deviations from the lower median for every prefix."""
    low, high = [], []  # low is a max-heap (negated), holds the lower median on top
    sum_low = sum_high = 0.0
    out = np.empty(vals.size)
    for i, v in enumerate(vals.tolist()):
        if not low or v <= -low[0]:
            heapq.heappush(low, -v)
            sum_low += v
        else:
            heapq.heappush(high, v)
            sum_high += v
        target = (i + 2) // 2
        if len(low) > target:
            w = -heapq.heappop(low)
            sum_low -= w
            heapq.heappush(high, w)
            sum_high += w
        elif len(low) < target:
            w = heapq.heappop(high)
            sum_high -= w
            heapq.heappush(low, -w)
            sum_low += w
        med = -low[0]
        out[i] = (med * len(low) - sum_low) + (sum_high - med * len(high))
    return np.maximum(out, 0.0)


def _minimax_sides(f: np.ndarray):
    """Half-ranges of ``f[:i]`` and ``f[i:]`` for ``i = 1..L-1``."""
    lmax = np.maximum.accumulate(f)[:-1]
    lmin = np.minimum.accumulate(f)[:-1]
    rmax = np.maximum.accumulate(f[::-1])[::-1][1:]
    rmin = np.minimum.accumulate(f[::-1])[::-1][1:]
    return (lmax - lmin) / 2, (rmax - rmin) / 2


def split_errors(f: np.ndarray, h: float, p) -> np.ndarray:
    """Two-piece errors for every split ``1..L-1`` of a span ``f`` (entry ``i`` splits before ``f[i]``).

    For ``p = 2`` the value is the change relative to the unsplit span, i.e.
    ``e2(alpha) - e2(t_{q+1})``; it is computed from mean-centred sums to
    keep resolution when the span mean dominates its variation.
    """
    L = f.size
    if p == 2:
        g = f - f.mean()
        left = np.cumsum(g)[:-1]
        nl = np.arange(1, L)
        return -h * left**2 * (1.0 / nl + 1.0 / (L - nl))
    if p == np.inf:
        left, right = _minimax_sides(f)
        return np.maximum(left, right)
    pre = _running_l1(f)
    suf = _running_l1(f[::-1])[::-1]
    return h * (pre[:-1] + suf[1:])


@dataclass
class _Candidate:
    alpha: int
    score: float  # change of the approximation error caused by inserting alpha
    span_err: float  # current error on the unsplit span


@dataclass(frozen=True)
class CandidateSet:
    """Per-span best candidate knots and the error change each would cause."""

    alphas: tuple
    errs: tuple
    norm: float
    delta: int


@dataclass
class FobaTrace:
    """Result of a knot-prediction run on sample indices."""

    knots: list
    order: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    candidates: CandidateSet | None = None


def _best_split(f: np.ndarray, h: float, start: int, stop: int, last: bool, delta: int, p):
    """Best admissible knot in span ``[t_q, t_{q+1}]``, or ``None``."""
    end = stop + 1 if last else stop  # samples owned by the span
    lo, hi = start + delta, stop - delta
    if hi < lo:
        return None
    seg = f[start:end]
    errs = split_errors(seg, h, p)
    alphas = np.arange(lo, hi + 1)
    cand = errs[alphas - start - 1]
    if p == 2:
        g = seg - seg.mean()
        span_err = h * float(g @ g)
        score = cand
    elif p == np.inf:
        span_err = (seg.max() - seg.min()) / 2
        score = cand - span_err
    else:
        span_err = h * float(np.abs(seg - first_order_coeffs(seg, 1)).sum())
        score = cand - span_err
    best = score.min()
    tol = TIE_RTOL * max(abs(span_err), abs(best), np.finfo(float).tiny)
    tied = np.flatnonzero(score <= best + tol)
    # among equal-error splits prefer one sitting on a jump of the data
    jumps = tied[f[alphas[tied]] != f[alphas[tied] - 1]]
    if jumps.size:
        tied = jumps
    if p == np.inf and tied.size > 1:
        # the max-norm error is flat while one side holds both extremes;
        # take the balanced split where the two half-ranges meet
        left, right = _minimax_sides(seg)
        gap = np.abs(left - right)[alphas[tied] - start - 1]
        tied = tied[gap <= gap.min() + tol]
    pick = tied[0]
    return _Candidate(int(alphas[pick]), float(score[pick]), float(span_err))


def _approx_error(span_errs: dict, p) -> float:
    vals = list(span_errs.values())
    if p == np.inf:
        return max(vals)
    if p == 2:
        return float(np.sqrt(max(sum(vals), 0.0)))
    return float(sum(vals))


def predict_indices(sig: Signal, n: int, delta: int = 1, p=2) -> FobaTrace:
    """Greedy FOBA knot insertion on sample indices.

    Returns ``n + 1`` knot indices (both ends included).  ``errors[k]`` holds
    the unnormalized ``p``-norm error of the first-order approximation with
    ``k + 2`` knots.
    """
    p = parse_norm(p)
    f = sig.f
    N = f.size
    h = sig.h
    if n < 1:
        raise FobaError(f"need at least one span, got n={n}")
    if delta < 1 or int(delta) != delta:
        raise FobaError(f"delta must be a positive integer number of samples, got {delta}")
    if n > (N - 1) // delta:
        raise FobaError(f"{n} spans cannot be placed {delta} samples apart on {N} samples")
    knots = [0, N - 1]
    cands: dict[int, _Candidate | None] = {}
    span_errs: dict[int, float] = {}

    def refresh(i: int):
        start, stop = knots[i], knots[i + 1]
        last = i + 1 == len(knots) - 1
        cands[start] = _best_split(f, h, start, stop, last, delta, p)
        end = stop + 1 if last else stop
        seg = f[start:end]
        if p == 2:
            g = seg - seg.mean()
            span_errs[start] = h * float(g @ g)
        elif p == np.inf:
            span_errs[start] = (seg.max() - seg.min()) / 2
        else:
            span_errs[start] = h * float(np.abs(seg - first_order_coeffs(seg, 1)).sum())

    refresh(0)
    trace = FobaTrace(knots)
    trace.errors.append(_approx_error(span_errs, p))
    while len(knots) < n + 1:
        live = [(s, c) for s, c in cands.items() if c is not None]
        if not live:
            raise FobaError(f"no admissible knot left after {len(knots)} knots (delta={delta})")
        best = min(c.score for _, c in live)
        total = sum(abs(c.span_err) for _, c in live)
        tol = TIE_RTOL * max(total, abs(best), np.finfo(float).tiny)
        tied = [(s, c) for s, c in live if c.score <= best + tol]
        # ties: prefer the span carrying the larger error, then the leftmost
        top = max(c.span_err for _, c in tied)
        tied = [(s, c) for s, c in tied if c.span_err >= top - tol]
        start, cand = min(tied, key=lambda sc: sc[1].alpha)
        i = knots.index(start)
        knots.insert(i + 1, cand.alpha)
        trace.order.append(cand.alpha)
        del cands[start]
        del span_errs[start]
        refresh(i)
        refresh(i + 1)
        trace.errors.append(_approx_error(span_errs, p))
    trace.candidates = CandidateSet(
        tuple(c.alpha for c in cands.values() if c is not None),
        tuple(c.score for c in cands.values() if c is not None),
        p,
        delta,
    )
    return trace


def indices_to_knots(sig: Signal, idx, degree: int = 0) -> KnotVector:
    idx = np.asarray(idx)
    return KnotVector(degree, sig.x[idx[1:-1]], sig.a, sig.b)


def knot_pred(sig: Signal, n: int, delta: int = 1, p=2, degree: int = 0) -> KnotVector:
    """Predict ``n + 1`` knots (``n - 1`` interior) of ``sig`` by greedy FOBA insertion."""
    if n < 2:
        raise FobaError(f"need n >= 2 (at least one interior knot), got {n}")
    trace = predict_indices(sig, n, delta, p)
    return indices_to_knots(sig, trace.knots, degree)


def normalized_error(sig: Signal, raw, p) -> np.ndarray:
    """Turn unnormalized FOBA errors into percentages ``100 * err / ||f - mean f||_p``."""
    p = parse_norm(p)
    dev = sig.f - sig.f.mean()
    if p == 2:
        ref = np.sqrt(sig.h * float(dev @ dev))
    elif p == 1:
        ref = sig.h * float(np.abs(dev).sum())
    else:
        ref = float(np.abs(dev).max())
    if ref == 0:
        raise ValueError("constant signal: normalized error undefined")
    return 100.0 * np.asarray(raw, dtype=float) / ref


def foba_error_curve(sig: Signal, max_knots: int, p=2, delta: int = 1) -> np.ndarray:
    """Normalized FOBA error for ``2, 3, ..., max_knots`` knots (entry ``k`` has ``k + 2`` knots)."""
    trace = predict_indices(sig, max_knots - 1, delta, p)
    return normalized_error(sig, trace.errors, p)


def knee(curve, tau: float = 0.01, window: int = 3, reference: str = "initial") -> int:
    """Knot count (``k + 2`` for entry ``k``) where further insertions stop paying off.

    Stops at the first count whose error dropped by less than ``tau`` times
    the reference error over the last ``window`` insertions.  The reference
    is the two-knot error (``"initial"``, i.e. ``tau`` of the normalized
    scale) or the current error (``"current"``); the latter rarely fires
    because first-order errors decay like ``1/n``.
    """
    if reference not in ("initial", "current"):
        raise ValueError("reference must be 'initial' or 'current'")
    e = np.asarray(curve, dtype=float)
    for k in range(window, e.size):
        ref = e[0] if reference == "initial" else e[k]
        if e[k] == 0 or e[k - window] - e[k] < tau * ref:
            return k + 2
    return e.size + 1


def spline_derivative_steps(model, sig: Signal) -> Signal:
    """Samples of the ``degree``-th derivative of a spline model: a step function on the grid."""
    bs = model.to_scipy()
    d = bs.derivative(model.knots.degree)
    vals = np.empty(sig.N)
    t = model.knots.breakpoints
    span = np.clip(np.searchsorted(t, sig.x, side="right") - 1, 0, t.size - 2)
    mid = (t[span] + t[span + 1]) / 2  # the derivative is constant on each span
    vals[:] = d(mid)
    return Signal(sig.x, vals)


def knots_from_derivative(model, sig: Signal, m: int, p=2, delta: int = 1) -> np.ndarray:
    """Recover ``m`` interior knots of a spline from its piecewise constant top derivative."""
    steps = spline_derivative_steps(model, sig)
    return knot_pred(steps, m + 1, delta, p).interior
