"""Small builders shared by the test modules."""

import numpy as np

from freeknot.spline import KnotVector


def random_knots(rng, n_interior, degree, a=0.0, b=1.0, min_gap=0.04):
    """Interior knots drawn uniformly with a minimum spacing (rejection sampling)."""
    while True:
        alpha = np.sort(rng.uniform(a, b, size=n_interior))
        gaps = np.diff(np.concatenate([[a], alpha, [b]]))
        if gaps.min() >= min_gap * (b - a):
            return KnotVector(degree, alpha, a, b)
