import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freeknot.foba import (
    FobaError,
    PrefixTables,
    e2_objective,
    ep_objective,
    first_order_coeffs,
    foba_error_curve,
    knee,
    knot_pred,
    parse_norm,
    predict_indices,
    span_error,
    split_errors,
)
from freeknot.metrics import add_noise, sample_function
from freeknot.spline import Signal

NORMS = (1, 2, math.inf)


def step_signal(rng, N, n_steps):
    """Grid step function with distinct consecutive levels; jumps drawn from ``[1, N-2]``."""
    jumps = np.sort(rng.choice(np.arange(1, N - 1), size=n_steps, replace=False))
    levels = [float(rng.integers(-20, 21))]
    for _ in range(n_steps):
        nxt = levels[-1]
        while nxt == levels[-1]:
            nxt = float(rng.integers(-20, 21))
        levels.append(nxt)
    f = np.repeat(levels, np.diff(np.concatenate([[0], jumps, [N]])))
    return Signal.uniform(f), set(jumps.tolist())


def test_parse_norm_aliases():
    assert parse_norm("l1") == 1 and parse_norm("l2") == 2 and parse_norm("linf") == math.inf
    assert parse_norm(2) == 2
    with pytest.raises(ValueError):
        parse_norm(3)


def test_first_order_coefficients():
    seg = [1.0, 2.0, 6.0]
    assert first_order_coeffs(seg, 2) == pytest.approx(3.0)
    assert first_order_coeffs(seg, 1) == pytest.approx(2.0)
    assert first_order_coeffs(seg, math.inf) == pytest.approx(3.5)
    with pytest.raises(ValueError):
        first_order_coeffs([], 2)


def test_e2_objective_on_the_identity(frozen):
    ref = frozen["e2_identity_continuum"]
    M = 1000
    # midpoint samples make the integrals of a linear function exact
    sig = Signal.uniform(np.arange(M) / M + 0.5 / M, a=0.5 / M, h=1.0 / M)
    tables = PrefixTables.build(sig)
    value = e2_objective(tables, (0, M), M // 2)
    unsplit = -tables.integral(0, M) ** 2 / (sig.h * M)
    assert value == pytest.approx(ref["e2_at_half"], rel=1e-12)
    assert value - unsplit == pytest.approx(ref["improvement_at_half"], rel=1e-12)


def test_e2_objective_ranks_splits_like_the_squared_error():
    rng = np.random.default_rng(2)
    f = rng.normal(size=30)
    tables = PrefixTables.build(Signal.uniform(f))
    e2 = np.array([e2_objective(tables, (0, 30), a) for a in range(1, 30)])
    sq = np.array([ep_objective(tables, (0, 30), a, 2) for a in range(1, 30)])
    # they differ by the constant ||f||^2
    np.testing.assert_allclose(sq - e2, float(f @ f), rtol=1e-10)


def test_span_and_split_errors_by_norm():
    f = np.array([0.0, 0.0, 4.0, 4.0, 10.0])
    tables = PrefixTables.build(Signal.uniform(f))
    assert span_error(tables, (0, 5), 2) == pytest.approx(float(((f - f.mean()) ** 2).sum()))
    assert span_error(tables, (0, 5), 1) == pytest.approx(14.0)
    assert span_error(tables, (0, 5), math.inf) == pytest.approx(5.0)
    assert ep_objective(tables, (0, 5), 2, 1) == pytest.approx(6.0)
    assert ep_objective(tables, (0, 5), 4, math.inf) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        ep_objective(tables, (0, 5), 0, 2)


def test_split_errors_match_frozen_brute_force(frozen):
    for case in frozen["splits"]:
        f = np.asarray(case["f"])
        p = math.inf if case["p"] == "inf" else case["p"]
        errs = split_errors(f, 1.0, p)
        if p == 2:
            errs = errs + float(((f - f.mean()) ** 2).sum())
        # the frozen split range keeps the end knot a sample away
        assert errs[: f.size - 2].min() == pytest.approx(case["best"], rel=1e-9, abs=1e-12)


def test_single_insertion_hits_a_brute_force_minimiser(frozen):
    for case in frozen["splits"]:
        p = math.inf if case["p"] == "inf" else case["p"]
        trace = predict_indices(Signal.uniform(case["f"]), 2, 1, p)
        assert trace.knots[1] in case["argmins"]


def test_prescribed_steps_are_recovered():
    f = np.repeat([0.0, 3.0, -1.0, 2.0], [30, 30, 20, 20])
    sig = Signal.uniform(f)
    for p in NORMS:
        assert predict_indices(sig, 4, 1, p).knots == [0, 30, 60, 80, 99]


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), N=st.integers(12, 300), s=st.integers(1, 6), p=st.sampled_from(NORMS))
def test_every_insertion_lands_on_a_jump(seed, N, s, p):
    rng = np.random.default_rng(seed)
    sig, jumps = step_signal(rng, N, s)
    trace = predict_indices(sig, s + 1, 1, p)
    assert set(trace.knots[1:-1]) == jumps
    assert trace.errors[-1] == pytest.approx(0.0, abs=1e-9)


def test_f3_knots_cluster_around_the_transition():
    sig = sample_function("f3", 101)
    kv = knot_pred(sig, 14, p=2)
    assert kv.interior.size == 13
    inside = np.sum((kv.interior >= 0.3) & (kv.interior <= 0.5))
    assert inside >= 8


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), p=st.sampled_from(NORMS), delta=st.integers(1, 4))
def test_error_curve_is_monotone_and_spacing_respected(seed, p, delta):
    rng = np.random.default_rng(seed)
    sig = Signal.uniform(np.cumsum(rng.normal(size=150)))
    n = min(20, (sig.N - 1) // (2 * delta))
    trace = predict_indices(sig, n, delta, p)
    errs = np.asarray(trace.errors)
    assert np.all(np.diff(errs) <= 1e-9 * errs[0])
    assert np.all(np.diff(trace.knots) >= delta)
    assert len(trace.knots) == n + 1
    assert trace.knots == sorted(trace.knots)


def test_infeasible_knot_counts_raise():
    sig = Signal.uniform(np.arange(10.0))
    with pytest.raises(FobaError):
        predict_indices(sig, 10, 1, 2)
    with pytest.raises(FobaError):
        predict_indices(sig, 4, 3, 2)
    with pytest.raises(FobaError):
        knot_pred(sig, 1)


def test_error_curve_is_normalized_percent():
    sig = sample_function("f4", 200)
    for p in NORMS:
        curve = foba_error_curve(sig, 20, p)
        assert curve.size == 19
        # the median and midrange fit no worse than the mean
        assert curve[0] <= 100.0 + 1e-9
    assert foba_error_curve(sig, 5, 2)[0] == pytest.approx(100.0)


def test_f4_knee_is_modest():
    sig = sample_function("f4", 200)
    curve = foba_error_curve(sig, 50, 2)
    assert knee(curve, 0.01) <= 30
    noisy = add_noise(sig, -0.01, 0.01, seed=1)
    assert knee(foba_error_curve(noisy, 50, 2), 0.01) <= 30


def test_knee_rule_variants():
    curve = 100.0 / np.arange(1, 60)
    # 100 (1/(k-2) - 1/(k+1)) first falls below 1 at k = 18
    assert knee(curve, 0.01, reference="initial") == 20
    # relative to the current error a 1/n decay never flattens within 60 knots
    assert knee(curve, 0.01, reference="current") == curve.size + 1
    assert knee([100.0, 50.0, 0.0, 0.0, 0.0]) == 5
    with pytest.raises(ValueError):
        knee(curve, reference="other")


def test_knot_pred_output():
    sig = sample_function("f4", 200)
    kv = knot_pred(sig, 10, p=2, degree=3)
    assert kv.degree == 3 and kv.n == 10
    assert set(kv.interior).issubset(set(sig.x))
