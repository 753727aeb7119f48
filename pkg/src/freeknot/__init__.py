"""Free-knot B-spline approximation: greedy first-order knot prediction refined by variable projection."""

from .foba import FobaError, foba_error_curve, knee, knot_pred, predict_indices
from .metrics import ErrorReport, add_noise, compression_ratio, error_report, sample_function, synthetic_ecg, test_function
from .spline import KnotError, KnotVector, SamplingError, Signal, SplineModel, build_design, eval_model
from .varpro import FitReport, VpOptions, fit_fixed, vp_optimize

__all__ = [
    "ErrorReport",
    "FitReport",
    "FobaError",
    "KnotError",
    "KnotVector",
    "SamplingError",
    "Signal",
    "SplineModel",
    "VpOptions",
    "add_noise",
    "build_design",
    "compression_ratio",
    "error_report",
    "eval_model",
    "fit_fixed",
    "foba_error_curve",
    "knee",
    "knot_pred",
    "predict_indices",
    "sample_function",
    "synthetic_ecg",
    "test_function",
    "vp_optimize",
]
__version__ = "0.1.0"
