"""Synthetic test functions, noise model, a synthetic ECG generator and error measures."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .spline import SamplingError, Signal

# domains of the closed-form test functions
DOMAINS = {
    "f1": (0.0, 1.0),
    "f3": (0.0, 1.0),
    "f4": (0.0, 1.0),
    "f5": (0.0, 10.0),
    "f6": (0.0, 1.0),
}


def _f1(x):
    return np.sin(2 * np.pi * x**3) ** 3


def _f3(x):
    return 90.0 / (1.0 + np.exp(-100.0 * (x - 0.4)))


def _f4(x):
    return (
        1.5 * np.exp(-((x - 0.1) ** 2) / 0.3)
        + 0.1 * np.exp(-((x - 0.5) ** 2) / 2)
        + 2.0 * np.exp(-((x - 0.8) ** 2) / 0.02)
    ) / 2.3935


def _f5(x):
    return 100.0 / np.exp(np.abs(x - 5.0)) + (x - 5.0) ** 5 / 500.0


def _f6(x):
    return np.where(x < 0.6, 1.0 / (0.01 + (x - 0.3) ** 2), 1.0 / (0.015 + (x - 0.65) ** 2))


_FUNCS = {"f1": _f1, "f3": _f3, "f4": _f4, "f5": _f5, "f6": _f6}


def test_function(name: str, x, data_path: str | Path | None = None):
    """Evaluate a named test function; ``f2`` is read from ``data_path``.

    For ``f2`` the CSV holds ``x,f`` rows and ``x`` is ignored.
    """
    if name == "f2":
        if data_path is None:
            raise FileNotFoundError("f2 is tabulated data; pass data_path to a CSV of x,f rows")
        return load_table(data_path)[1]
    if name not in _FUNCS:
        raise KeyError(f"unknown test function {name!r}")
    x = np.asarray(x, dtype=float)
    lo, hi = DOMAINS[name]
    if np.any(x < lo) or np.any(x > hi):
        raise ValueError(f"{name} is defined on [{lo}, {hi}]")
    out = _FUNCS[name](x)
    return float(out) if out.ndim == 0 else out


test_function.__test__ = False  # not a pytest test


def load_table(path) -> tuple[np.ndarray, np.ndarray]:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().startswith("#"):
                continue
            try:
                rows.append([float(v) for v in row[:2]])
            except ValueError:
                if rows:
                    raise
    arr = np.asarray(rows, dtype=float)
    return arr[:, 0], arr[:, 1]


def sample_function(name: str, N: int, data_path=None) -> Signal:
    """``N`` equispaced samples of a test function over its domain."""
    if name == "f2":
        x, f = load_table(data_path) if data_path else (None, None)
        if x is None:
            raise FileNotFoundError("f2 needs a data file")
        return Signal(x, f, meta={"function": name})
    lo, hi = DOMAINS[name]
    x = np.linspace(lo, hi, N)
    return Signal(x, test_function(name, x), meta={"function": name})


def add_noise(sig: Signal, lo: float, hi: float, seed: int) -> Signal:
    """Add i.i.d. uniform ``[lo, hi]`` noise drawn from ``default_rng(seed)``."""
    if lo > hi:
        raise ValueError("lo must not exceed hi")
    rng = np.random.default_rng(seed)
    noise = rng.uniform(lo, hi, size=sig.N) if hi > lo else np.full(sig.N, lo)
    meta = dict(sig.meta, noise=[lo, hi], seed=seed)
    return Signal(sig.x, sig.f + noise, sig.annotations, meta)


# P and T waves: (centre offset from R in s, width in s, amplitude)
_SMOOTH_WAVES = ((-0.20, 0.025, 0.12), (0.28, 0.045, 0.30))
# QRS complex as a piecewise-linear Q-R-S outline: (offset from R in s, amplitude)
_QRS = ((-0.04, 0.0), (-0.02, -0.10), (0.0, 1.0), (0.025, -0.25), (0.045, 0.0))


def synthetic_ecg(
    beats: int,
    seed: int,
    fs: float = 360.0,
    rr: float = 0.8,
    rr_jitter: float = 0.04,
    noise: float = 0.01,
    wander: float = 0.03,
) -> Signal:
    """Beat train with annotated R peaks.

    P and T are Gaussians; the QRS complex is a piecewise-linear Q-R-S
    outline, so its corners are kinks as in real recordings.  Amplitudes
    vary by up to 8% per beat and RR intervals jitter around ``rr``.  A
    slow sinusoidal baseline and small uniform noise are added.
    """
    if beats < 1:
        raise ValueError("need at least one beat")
    rng = np.random.default_rng(seed)
    intervals = rr + rr_jitter * rng.uniform(-1, 1, size=beats)
    peaks_t = 0.4 * rr + np.concatenate([[0.0], np.cumsum(intervals[:-1])])
    N = int(math.ceil((peaks_t[-1] + 0.6 * rr) * fs))
    t = np.arange(N) / fs
    f = np.zeros(N)
    qx = np.array([q[0] for q in _QRS])
    qy = np.array([q[1] for q in _QRS])
    for pt in peaks_t:
        scale = 1.0 + 0.08 * rng.uniform(-1, 1, size=len(_SMOOTH_WAVES) + 1)
        for (off, width, amp), s in zip(_SMOOTH_WAVES, scale):
            f += amp * s * np.exp(-0.5 * ((t - pt - off) / width) ** 2)
        f += scale[-1] * np.interp(t, pt + qx, qy, left=0.0, right=0.0)
    f += wander * np.sin(2 * np.pi * 0.25 * t + rng.uniform(0, 2 * np.pi))
    f += rng.uniform(-noise, noise, size=N)
    ann = np.round(peaks_t * fs).astype(np.int64)
    return Signal(t, f, ann, {"source": "synthetic_ecg", "seed": seed, "fs": fs, "beats": beats})


@dataclass(frozen=True)
class ErrorReport:
    rss: float
    mse: float
    bre: float
    bic: float | None
    eps1: float | None
    eps2: float | None
    epsInf: float | None
    n_knots: int
    degree: int
    N: int

    @property
    def prdn(self):
        return self.eps2

    def to_dict(self) -> dict:
        return asdict(self)


def eps_p(f, f_tilde, p) -> float | None:
    """Normalized percent error; ``None`` when ``f`` is constant."""
    f = np.asarray(f, dtype=float)
    ref = np.linalg.norm(f - f.mean(), ord=p)
    if ref == 0:
        return None
    return float(np.linalg.norm(f - np.asarray(f_tilde, dtype=float), ord=p) / ref * 100.0)


def bic(rss: float, N: int, n: int, degree: int) -> float | None:
    if rss <= 0:
        return None
    return N * math.log(rss) + math.log(N * (2 * (n - 1) + degree + 1))


def bre(f, f_tilde) -> float:
    r = np.asarray(f, dtype=float) - np.asarray(f_tilde, dtype=float)
    if r.size < 2:
        raise ValueError("BRE needs at least two samples")
    v = np.ones(r.size)
    v[0] = v[-1] = 0.5
    return float(np.sqrt((v * r * r).sum() / (r.size - 1)))


def error_report(f, f_tilde, n: int, degree: int) -> ErrorReport:
    """All error measures of an approximation ``f_tilde`` built on ``n`` spans."""
    f = np.asarray(f, dtype=float)
    f_tilde = np.asarray(f_tilde, dtype=float)
    if f.shape != f_tilde.shape:
        raise SamplingError("f and f_tilde differ in length")
    r = f - f_tilde
    rss = float(r @ r)
    N = f.size
    return ErrorReport(
        rss=rss,
        mse=rss / N,
        bre=bre(f, f_tilde),
        bic=bic(rss, N, n, degree),
        eps1=eps_p(f, f_tilde, 1),
        eps2=eps_p(f, f_tilde, 2),
        epsInf=eps_p(f, f_tilde, np.inf),
        n_knots=n + 1,
        degree=degree,
        N=N,
    )


def compression_ratio(N: int, n: int, degree: int, beats: int = 1) -> float:
    """``N / (beats * (2n + degree + 1))``."""
    if N <= 0 or n <= 0 or degree < 0 or beats <= 0:
        raise ValueError("arguments must be positive")
    return N / (beats * (2 * n + degree + 1))
