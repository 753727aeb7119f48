"""B-spline bases over clamped knot vectors, knot derivatives and design matrices.

Basis functions are kept in the *unnormalized* divided-difference form

    B_{l,k}(x) = [t_k, ..., t_{k+l+1}] (x - t)_+^l        (l >= 1)

so that the derivative with respect to a free knot is again a divided
difference (with the knot repeated).  The usual normalized B-spline is
``N_{l,k} = C_k * B_{l,k}`` with ``C_k = (-1)^(l+1) (t_{k+l+1} - t_k)``.
First-order (l = 0) functions are plain characteristic functions.

Indices follow the mathematical convention where it matters for users:
basis functions are numbered ``k = -l, ..., n-1`` and knots ``t_{-l}..t_{n+l}``.
Internally arrays are zero based, so basis ``k`` lives in column ``k + l``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RANK_TOL = 1e-10
UNIFORM_TOL = 1e-9


class KnotError(ValueError):
    """Invalid knot configuration (ordering, multiplicity, domain)."""


class SamplingError(ValueError):
    """Sample grid is not usable (non-uniform, too short, bad annotations)."""


@dataclass(frozen=True)
class KnotVector:
    """Clamped knot vector ``a = t_0 < alpha_1 < ... < alpha_{n-1} < t_n = b``."""

    degree: int
    interior: np.ndarray
    a: float
    b: float

    def __post_init__(self):
        interior = np.array(self.interior, dtype=float).reshape(-1)
        interior.setflags(write=False)
        object.__setattr__(self, "interior", interior)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        if self.degree < 0 or int(self.degree) != self.degree:
            raise KnotError(f"degree must be a nonnegative integer, got {self.degree}")
        if not self.a < self.b:
            raise KnotError(f"empty domain [{self.a}, {self.b}]")
        if interior.size:
            if not np.all(np.isfinite(interior)):
                raise KnotError("interior knots must be finite")
            if interior[0] <= self.a or interior[-1] >= self.b:
                raise KnotError("interior knots must lie strictly inside (a, b)")
            if np.any(np.diff(interior) <= 0):
                raise KnotError("interior knots must be strictly increasing")

    @property
    def n(self) -> int:
        """Number of knot spans; the vector has ``n + 1`` distinct knots."""
        return self.interior.size + 1

    @property
    def dim(self) -> int:
        return self.n + self.degree

    @property
    def breakpoints(self) -> np.ndarray:
        return np.concatenate([[self.a], self.interior, [self.b]])

    @property
    def full(self) -> np.ndarray:
        """The extended sequence ``(t_{-l}, ..., t_{n+l})`` of length ``n + 2l + 1``."""
        l = self.degree
        return np.concatenate([np.full(l + 1, self.a), self.interior, np.full(l + 1, self.b)])

    def scale_factors(self) -> np.ndarray:
        """``C_k`` such that ``C_k * B_{l,k}`` is the normalized B-spline."""
        return _scale_factors(self.full, self.degree)

    def with_interior(self, interior) -> "KnotVector":
        return KnotVector(self.degree, interior, self.a, self.b)


@dataclass(frozen=True)
class Signal:
    """Uniformly sampled series ``f_i = f(x_i)`` with optional beat annotations."""

    x: np.ndarray
    f: np.ndarray
    annotations: np.ndarray | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        f = np.asarray(self.f, dtype=float).reshape(-1)
        if x.size != f.size:
            raise SamplingError(f"x has {x.size} samples but f has {f.size}")
        if x.size < 1:
            raise SamplingError("empty signal")
        if x.size >= 2:
            dx = np.diff(x)
            if np.any(dx <= 0):
                raise SamplingError("abscissae must be strictly increasing")
            h = (x[-1] - x[0]) / (x.size - 1)
            if np.max(np.abs(dx - h)) > UNIFORM_TOL * h:
                raise SamplingError("non-uniform sampling grid")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "f", f)
        if self.annotations is not None:
            ann = np.asarray(self.annotations, dtype=np.int64).reshape(-1)
            if ann.size and (ann.min() < 0 or ann.max() >= x.size):
                raise SamplingError("annotation index outside [0, N)")
            if np.any(np.diff(ann) <= 0):
                raise SamplingError("annotations must be strictly ascending")
            object.__setattr__(self, "annotations", ann)

    @classmethod
    def uniform(cls, f, a: float = 0.0, b: float | None = None, h: float | None = None, **kw):
        f = np.asarray(f, dtype=float)
        if b is None:
            b = a + (h if h is not None else 1.0) * (f.size - 1)
        return cls(np.linspace(a, b, f.size), f, **kw)

    @property
    def N(self) -> int:
        return self.x.size

    @property
    def h(self) -> float:
        return float((self.x[-1] - self.x[0]) / (self.N - 1)) if self.N > 1 else 1.0

    @property
    def a(self) -> float:
        return float(self.x[0])

    @property
    def b(self) -> float:
        return float(self.x[-1])

    def segment(self, start: int, stop: int) -> "Signal":
        return Signal(self.x[start:stop], self.f[start:stop])


@dataclass(frozen=True)
class SplineModel:
    knots: KnotVector
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if c.size != self.knots.dim:
            raise KnotError(f"{c.size} coefficients for a basis of dimension {self.knots.dim}")
        object.__setattr__(self, "coeffs", c)

    def __call__(self, xs) -> np.ndarray:
        return eval_model(self, xs)

    def normalized_coeffs(self) -> np.ndarray:
        """Coefficients with respect to the partition-of-unity basis ``N_{l,k}``."""
        return self.coeffs / self.knots.scale_factors()

    def to_scipy(self):
        from scipy.interpolate import BSpline

        return BSpline(self.knots.full, self.normalized_coeffs(), self.knots.degree, extrapolate=False)


@dataclass(frozen=True)
class KnotSlab:
    """Dense block of a sparse ``N x dim`` matrix: rows ``[r0, r1)``, columns ``[c0, c1)``."""

    r0: int
    r1: int
    c0: int
    c1: int
    block: np.ndarray
    shape: tuple

    def matvec(self, c: np.ndarray) -> np.ndarray:
        out = np.zeros(self.shape[0])
        out[self.r0 : self.r1] = self.block @ c[self.c0 : self.c1]
        return out

    def rmatvec(self, r: np.ndarray) -> np.ndarray:
        out = np.zeros(self.shape[1])
        out[self.c0 : self.c1] = self.block.T @ r[self.r0 : self.r1]
        return out

    def toarray(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.r0 : self.r1, self.c0 : self.c1] = self.block
        return out


@dataclass(frozen=True)
class DesignMatrixBundle:
    knots: KnotVector
    phi: np.ndarray
    U: np.ndarray
    s: np.ndarray
    Vt: np.ndarray
    deriv_slabs: tuple
    rank_tol: float = RANK_TOL

    @property
    def rank(self) -> int:
        return self.s.size

    def pinv(self) -> np.ndarray:
        return self.Vt.T @ (self.U / self.s).T

    def project(self, f: np.ndarray) -> np.ndarray:
        return self.U @ (self.U.T @ f)


@dataclass(frozen=True)
class SWReport:
    ok: bool
    empty: tuple = ()
    unmatched: tuple = ()

    def __bool__(self):
        return self.ok


def _scale_factors(tau: np.ndarray, degree: int) -> np.ndarray:
    dim = tau.size - degree - 1
    if degree == 0:
        return np.ones(dim)
    width = tau[degree + 1 :] - tau[:dim]
    return (-1.0) ** (degree + 1) * width


def truncated_power_dd(nodes, x, degree: int, right: float | None = None):
    """Divided difference ``[s_0, ..., s_m] (x - t)_+^degree`` taken in ``t``.

    Repeated nodes are allowed as long as no node occurs more than
    ``degree + 1`` times.  Levels up to ``degree + 1`` use the Leibniz
    recurrence (the Cox-de Boor scheme in unnormalized form); any further
    order is raised with the plain divided-difference quotient.  ``right``
    closes the last nonempty interval so that ``x == right`` is covered.
    The nodes are sorted first, so the result is symmetric in its arguments.
    """
    s = np.sort(np.asarray(nodes, dtype=float))
    m = s.size - 1
    if m < degree + 1:
        raise KnotError(f"need at least {degree + 2} nodes, got {s.size}")
    _, counts = np.unique(s, return_counts=True)
    if counts.max() > degree + 1:
        raise KnotError(f"node multiplicity {counts.max()} exceeds degree + 1 = {degree + 1}")
    x = np.asarray(x, dtype=float)
    row = []
    for i in range(m):
        lo, hi = s[i], s[i + 1]
        if hi > lo:
            inside = (x >= lo) & (x < hi)
            if right is not None and hi == right:
                inside = inside | (x == hi)
            row.append(np.where(inside, -1.0 / (hi - lo), 0.0))
        else:
            row.append(np.zeros_like(x))
    for d in range(1, degree + 1):
        nxt = []
        for i in range(len(row) - 1):
            width = s[i + d + 1] - s[i]
            if width == 0.0:
                nxt.append(np.zeros_like(x))
            else:
                nxt.append(((x - s[i + d + 1]) * row[i + 1] - (x - s[i]) * row[i]) / width)
        row = nxt
    order = degree + 1
    while len(row) > 1:
        order += 1
        nxt = []
        for i in range(len(row) - 1):
            width = s[i + order] - s[i]
            if width == 0.0:
                raise KnotError("divided difference undefined for fully coalescent nodes")
            nxt.append((row[i + 1] - row[i]) / width)
        row = nxt
    return row[0]


def eval_first_order(knots: KnotVector, k: int, x: float) -> float:
    """Characteristic function of ``[t_k, t_{k+1})``; the last one also covers ``b``."""
    if knots.degree != 0:
        raise KnotError("first-order basis requires degree 0")
    t = knots.breakpoints
    if not 0 <= k <= knots.n - 1:
        raise IndexError(f"basis index {k} outside [0, {knots.n - 1}]")
    if t[k] <= x < t[k + 1] or (k == knots.n - 1 and x == t[k + 1]):
        return 1.0
    return 0.0


def eval_bspline(knots: KnotVector, k: int, x):
    """Unnormalized ``B_{l,k}(x)`` for ``k = -l, ..., n-1`` via divided differences."""
    l = knots.degree
    if not -l <= k <= knots.n - 1:
        raise IndexError(f"basis index {k} outside [{-l}, {knots.n - 1}]")
    if l == 0:
        return np.vectorize(lambda v: eval_first_order(knots, k, v))(x)[()]
    nodes = knots.full[k + l : k + 2 * l + 2]
    return truncated_power_dd(nodes, x, l, right=knots.b)[()]


def eval_knot_derivative(knots: KnotVector, j: int, k: int, x):
    """``d B_{l,j}(x) / d t_k``: the divided difference with ``t_k`` taken twice."""
    l = knots.degree
    if l < 1:
        raise KnotError("knot derivatives need degree >= 1")
    if not -l <= j <= knots.n - 1:
        raise IndexError(f"basis index {j} outside [{-l}, {knots.n - 1}]")
    if not (j <= k <= j + l + 1):
        return np.zeros_like(np.asarray(x, dtype=float))[()]
    tau = knots.full
    nodes = np.append(tau[j + l : j + 2 * l + 2], tau[k + l])
    return truncated_power_dd(nodes, x, l, right=knots.b)[()]


def _find_spans(tau: np.ndarray, degree: int, x: np.ndarray) -> np.ndarray:
    mu = np.searchsorted(tau, x, side="right") - 1
    last = tau.size - degree - 2
    while last > degree and tau[last] == tau[last + 1]:
        last -= 1
    return np.clip(mu, degree, last)


def basis_matrix(tau: np.ndarray, degree: int, x: np.ndarray) -> np.ndarray:
    """Dense matrix of unnormalized B-splines over the extended knot sequence ``tau``.

    Rows are sample points, columns the ``len(tau) - degree - 1`` basis
    functions.  Evaluated with the span-local Cox-de Boor triangle and divided
    by ``C_k`` afterwards.
    """
    tau = np.asarray(tau, dtype=float)
    x = np.asarray(x, dtype=float)
    dim = tau.size - degree - 1
    out = np.zeros((x.size, dim))
    if x.size == 0:
        return out
    mu = _find_spans(tau, degree, x)
    vals = np.zeros((x.size, degree + 1))
    vals[:, 0] = 1.0
    left = np.zeros((x.size, degree + 1))
    right = np.zeros((x.size, degree + 1))
    for j in range(1, degree + 1):
        left[:, j] = x - tau[mu + 1 - j]
        right[:, j] = tau[mu + j] - x
        saved = np.zeros(x.size)
        for r in range(j):
            temp = vals[:, r] / (right[:, r + 1] + left[:, j - r])
            vals[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        vals[:, j] = saved
    rows = np.arange(x.size)
    for r in range(degree + 1):
        out[rows, mu - degree + r] = vals[:, r]
    outside = (x < tau[0]) | (x > tau[-1])
    out[outside] = 0.0
    scale = _scale_factors(tau, degree)
    if np.any(scale == 0.0):
        raise KnotError("knot multiplicity exceeds degree + 1")
    return out / scale


def knot_derivative_slab(knots: KnotVector, j: int, x: np.ndarray) -> KnotSlab:
    """Sparse ``D_j = dPhi / d alpha_j`` for interior knot ``alpha_j`` (``j = 1..n-1``).

    Duplicating ``t_j`` in the knot sequence turns every nonzero column into
    a difference of two neighbouring B-splines on the refined sequence.
    """
    l = knots.degree
    if l < 1:
        raise KnotError("knot derivatives need degree >= 1")
    if not 1 <= j <= knots.n - 1:
        raise IndexError(f"interior knot index {j} outside [1, {knots.n - 1}]")
    tau = knots.full
    pos = j + l
    refined = np.insert(tau, pos, tau[pos])
    c0, c1 = max(j - 1, 0), min(j + l, knots.dim - 1) + 1
    lo, hi = refined[c0], refined[c1 + l + 1]
    r0 = int(np.searchsorted(x, lo, side="left"))
    r1 = int(np.searchsorted(x, hi, side="right"))
    xs = x[r0:r1]
    B = basis_matrix(refined, l, xs)
    cols = np.arange(c0, c1)
    width = refined[cols + l + 2] - refined[cols]
    block = (B[:, cols + 1] - B[:, cols]) / width
    return KnotSlab(r0, r1, c0, c1, block, (x.size, knots.dim))


def validate_sw(knots: KnotVector, sig: Signal) -> SWReport:
    """Schoenberg-Whitney check on the sample grid.

    ``empty`` lists basis indices whose support holds no sample at all;
    ``unmatched`` those for which no increasing assignment of distinct
    samples exists (the full interlacing condition).
    """
    l = knots.degree
    tau = knots.full
    x = sig.x
    empty, unmatched = [], []
    prev = -1
    for col in range(knots.dim):
        lo, hi = tau[col], tau[col + l + 1]
        if l == 0:
            mask = (x >= lo) & ((x < hi) | ((col == knots.dim - 1) & (x == hi)))
        else:
            mask = (x > lo) & (x < hi)
            if col == 0:
                mask |= x == lo
            if col == knots.dim - 1:
                mask |= x == hi
        idx = np.flatnonzero(mask)
        k = col - l
        if idx.size == 0:
            empty.append(k)
            unmatched.append(k)
            continue
        later = idx[idx > prev]
        if later.size == 0:
            unmatched.append(k)
        else:
            prev = later[0]
    return SWReport(not unmatched, tuple(empty), tuple(unmatched))


def build_design(knots: KnotVector, sig: Signal, rank_tol: float = RANK_TOL, slabs: bool = True) -> DesignMatrixBundle:
    report = validate_sw(knots, sig)
    if not report:
        raise KnotError(f"Schoenberg-Whitney condition violated for basis indices {list(report.unmatched)}")
    phi = basis_matrix(knots.full, knots.degree, sig.x)
    U, s, Vt = np.linalg.svd(phi, full_matrices=False)
    keep = s > rank_tol * s[0] if s.size else s.astype(bool)
    d = ()
    if slabs and knots.degree >= 1:
        d = tuple(knot_derivative_slab(knots, j, sig.x) for j in range(1, knots.n))
    return DesignMatrixBundle(knots, phi, U[:, keep], s[keep], Vt[keep], d, rank_tol)


def eval_model(model: SplineModel, xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=float)
    kv = model.knots
    if np.any(xs < kv.a) or np.any(xs > kv.b):
        raise KnotError(f"evaluation points outside [{kv.a}, {kv.b}]")
    shape = xs.shape
    flat = xs.reshape(-1)
    return (basis_matrix(kv.full, kv.degree, flat) @ model.coeffs).reshape(shape)
