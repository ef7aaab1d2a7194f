import numpy as np
import pytest

from regbl.closed_forms import PLSpec, YoungSpec, pl_datum, pl_regularized, young_datum, young_regularized
from regbl.datum import Datum
from regbl.gaussian import bl_gaussian
from regbl.optimize import (GridSpec, LogisticChart, OptConfig, _feasible_start,
                            _logistic_divided_difference,
                            amplify, brute_force_oracle, is_amplifying, optimize_gaussian,
                            wolff_augmented, wolff_forward)

from cases import amplified_with_q, geometric_coordinate, young_equality
from oracles import random_nondegenerate, random_tuple


def test_config_validation():
    with pytest.raises(ValueError):
        OptConfig(direction="sideways")
    with pytest.raises(ValueError):
        OptConfig(restarts=0)


def test_divided_difference_matches_derivative_and_quotient():
    s = np.array([-800.0, -3.0, 0.0, 0.0 + 1e-9, 2.5, 40.0, 800.0])
    F = _logistic_divided_difference(s, s)
    logistic = lambda x: 1 / (1 + np.exp(-x))
    for i in range(len(s)):
        for k in range(len(s)):
            if abs(s[i] - s[k]) > 1e-3 and max(abs(s[i]), abs(s[k])) < 50:
                q = (logistic(s[i]) - logistic(s[k])) / (s[i] - s[k])
                assert F[i, k] == pytest.approx(q, rel=1e-10)
    d = logistic(s[2]) * (1 - logistic(s[2]))
    assert F[2, 2] == pytest.approx(d, rel=1e-14)
    assert np.all(np.isfinite(F)) and np.all(F >= 0)


def test_chart_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    d = amplified_with_q()
    chart = LogisticChart(d)
    theta = _feasible_start(chart, rng, OptConfig(init_scale=0.5))
    f, g = chart.phi_and_grad(theta)
    assert np.isfinite(f)
    h = 1e-6
    fd = np.array([(chart.phi_and_grad(theta + h * e)[0] - chart.phi_and_grad(theta - h * e)[0]) / (2 * h)
                   for e in np.eye(chart.dim)])
    np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-7)


def test_chart_round_trip():
    d = amplified_with_q()
    chart = LogisticChart(d)
    A = random_tuple(np.random.default_rng(0), d)
    back = chart.tuple_from(chart.theta_from(A))
    for a, b in zip(A, back):
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


def test_geometric_value_and_extremizer():
    res = optimize_gaussian(geometric_coordinate())
    assert res.value == pytest.approx(1.0, abs=1e-12)
    assert res.report.passed


def test_value_matches_reported_tuple():
    d = amplified_with_q()
    res = optimize_gaussian(d)
    assert res.log_value == pytest.approx(bl_gaussian(d, res.A).log, rel=1e-12, abs=1e-14)


def test_optimality_sandwich():
    d = amplified_with_q()
    res = optimize_gaussian(d)
    rng = np.random.default_rng(11)
    for _ in range(1000):
        val = bl_gaussian(d, random_tuple(rng, d))
        assert res.log_value <= val.log + 1e-9


def test_restart_stability():
    res = optimize_gaussian(amplified_with_q(), OptConfig(restarts=8, seed=4))
    assert res.restart_spread <= 1e-6


def test_monotone_in_regularizer():
    spec = YoungSpec.from_widths(-1.0, 1.3, 1.5, 2.0, 1.5)
    d, _ = young_datum(spec)
    bigger = d.with_regularizers([2.0 * G for G in d.regularizers])
    small = optimize_gaussian(d).log_value
    big = optimize_gaussian(bigger).log_value
    assert small >= big - 1e-10


@pytest.mark.parametrize("seed", range(4))
def test_certified_on_random_amplifying_data(seed):
    rng = np.random.default_rng(100 + seed)
    while True:
        d = random_nondegenerate(rng, n_max=3, with_regularizers=True)
        if d.m_plus:
            break
    cplus = max(d.exponents) - 0.5
    d = amplify(d, cplus, 0.05)
    assert is_amplifying(d)
    res = optimize_gaussian(d)
    assert res.converged
    rep = res.report
    assert rep.sign_condition and rep.slack_condition
    assert res.restart_spread <= 1e-6


def test_agrees_with_grid_oracle_on_young():
    spec = YoungSpec.from_widths(-1.0, 1.4, 1.5, 0.5, 1.5)
    d, _ = young_datum(spec)
    res = optimize_gaussian(d)
    grid = brute_force_oracle(d, GridSpec(points=80, lower_ratio=1e-2))
    # grid step in log space is log(100)/79; the error is second order in it
    assert grid.log_value >= res.log_value - 1e-12
    assert grid.log_value - res.log_value <= 5e-3


def test_grid_oracle_pl_minimum_on_upper_face():
    spec = PLSpec(0.3, 0.4, 1.0, 2.5)
    d, factor = pl_datum(spec)
    grid = brute_force_oracle(d, GridSpec(points=60, lower_ratio=1e-2))
    a1, a2 = grid.A[0][0, 0], grid.A[1][0, 0]
    assert a1 == pytest.approx(1 / spec.sigma1) or a2 == pytest.approx(1 / spec.sigma2)
    assert factor / grid.value == pytest.approx(pl_regularized(spec).constant, rel=1e-3)


def test_grid_oracle_rejects_large_factors():
    d = Datum(3, [np.eye(3)], [1.0], None, [np.eye(3)])
    with pytest.raises(ValueError):
        brute_force_oracle(d)


def test_amplify_checks_threshold():
    d = Datum(1, [np.eye(1)], [3.0], None, [np.eye(1)])
    with pytest.raises(ValueError):
        amplify(d, 1.5, 0.1)
    amp = amplify(d, 2.5, 0.1)
    assert amp.m == 2 and amp.exponents[-1] == -2.5
    assert is_amplifying(amp) and not is_amplifying(d)


def test_young_supremum_forward():
    spec = YoungSpec.from_widths(2 / 3, 2 / 3, 2 / 3, 1.0, 1.0)
    d, _ = young_datum(spec)
    res = optimize_gaussian(d, OptConfig(direction="supremum"))
    assert res.value == pytest.approx(young_regularized(spec).constant, rel=1e-9)


def test_wolff_augmented_shape():
    d = geometric_coordinate()
    aug = wolff_augmented(d, 2.0, 1e6)
    assert aug.m == 3 and list(aug.exponents) == [3.0, -2.0, -2.0]
    assert aug.maps[0].shape == (2, 2)


def test_wolff_geometric_constant_is_one():
    res = wolff_forward(geometric_coordinate(), 5.0, OptConfig(restarts=2))
    assert res.C == pytest.approx(1.0, abs=1e-6)
    assert res.holds


def test_wolff_rejects_negative_exponents():
    with pytest.raises(ValueError):
        wolff_forward(young_equality(), 1.0)
