import math

import numpy as np
import pytest
from scipy import integrate

from regbl.closed_forms import YoungSpec, young_datum
from regbl.datum import Datum
from regbl.gaussian import m_matrix
from regbl.heatflow import (FlowRun, GaussianMixture, IntegrationError, bl_ratio, check_monotonicity,
                            closure_residual, evolve_mixture, functional_Q, harmonic_mean_check,
                            li_yau_check, log_integrand, log_integrand_derivatives, sample_typeG)
from regbl.optimize import OptConfig, optimize_gaussian

from cases import amplified_with_q, geometric_coordinate, geometric_signed, mixture_box, young_equality
from oracles import fd_closure, random_spd


def make_run(d, seed=0, k=3, samples=20_000, direction="infimum", **kw):
    A = optimize_gaussian(d, OptConfig(direction=direction, restarts=2)).A
    rng = np.random.default_rng(seed)
    mixtures = [sample_typeG(G, k, mixture_box(G), rng) for G in d.regularizers]
    return FlowRun(d, A, mixtures, samples=samples, seed=seed, **kw)


def test_mixture_mass_by_quadrature():
    f = GaussianMixture([[2.0]], [0.5, 1.2], [[0.1], [-0.4]])
    total = integrate.quad(lambda x: float(f(np.array([x]))[0]), -np.inf, np.inf)[0]
    assert total == pytest.approx(f.mass, rel=1e-10)


def test_mixture_validation():
    with pytest.raises(ValueError):
        GaussianMixture([[1.0]], [-1.0], [[0.0]])
    with pytest.raises(ValueError):
        GaussianMixture([[-1.0]], [1.0], [[0.0]])
    with pytest.raises(ValueError):
        GaussianMixture(np.eye(2), [1.0], [[0.0, 0.0, 0.0]])


def test_evolution_is_a_semigroup():
    rng = np.random.default_rng(0)
    G = random_spd(rng, 2)
    A = 0.5 * random_spd(rng, 2)
    f = sample_typeG(G, 3, 0.5, rng)
    once = evolve_mixture(f, A, 5.0)
    twice = evolve_mixture(evolve_mixture(f, A, 2.0), A, 4.0)
    np.testing.assert_allclose(once.precision, twice.precision, rtol=1e-12)
    assert once.mass == pytest.approx(f.mass)
    with pytest.raises(ValueError):
        evolve_mixture(f, A, 0.5)


def test_evolution_solves_the_heat_equation():
    # d/dt u = (1/4 pi) tr(A^{-1} D^2 u), checked by differences in 1-D
    f = GaussianMixture([[1.5]], [1.0, 0.7], [[0.2], [-0.3]])
    A = np.array([[0.8]])
    t, x, h = 2.0, np.array([0.15]), 1e-4
    u = lambda tt, xx: float(evolve_mixture(f, A, tt)(xx)[0])
    dt = (u(t + h, x) - u(t - h, x)) / (2 * h)
    dxx = (u(t, x + 1e-3) - 2 * u(t, x) + u(t, x - 1e-3)) / 1e-6
    assert dt == pytest.approx(dxx / (4 * math.pi * 0.8), rel=1e-5)


def test_derivatives_match_differences():
    rng = np.random.default_rng(2)
    f = sample_typeG(random_spd(rng, 2), 4, 0.4, rng)
    x = rng.normal(size=(1, 2)) * 0.3
    _, g, H = f.derivatives(x)
    h = 1e-5
    for i, e in enumerate(np.eye(2) * h):
        gi = (f.log_eval(x + e) - f.log_eval(x - e))[0] / (2 * h)
        assert g[0, i] == pytest.approx(gi, rel=1e-6, abs=1e-8)
        Hi = (f.derivatives(x + e)[1] - f.derivatives(x - e)[1])[0] / (2 * h)
        np.testing.assert_allclose(H[0, i], Hi, rtol=1e-5, atol=1e-7)


def test_li_yau_equality_for_single_atom():
    rng = np.random.default_rng(4)
    G = random_spd(rng, 3)
    f = GaussianMixture(G, [2.0], rng.normal(size=(1, 3)))
    rep = li_yau_check(f, rng.normal(size=(50, 3)))
    assert np.max(np.abs(rep.min_eig)) <= 1e-10
    _, _, H = f.derivatives(rng.normal(size=(5, 3)))
    np.testing.assert_allclose(H, np.broadcast_to(-2 * math.pi * f.precision, H.shape), atol=1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_li_yau_on_mixtures_and_evolutions(seed):
    rng = np.random.default_rng(seed)
    n = 1 + seed
    G = random_spd(rng, n)
    f = sample_typeG(G, 5, mixture_box(G) * 3, rng)
    pts = rng.normal(size=(1000, n))
    assert li_yau_check(f, pts).passed
    for t in (2.0, 10.0):
        assert li_yau_check(evolve_mixture(f, 0.5 * random_spd(rng, n), t), pts).passed


@pytest.mark.parametrize("factory", [geometric_coordinate, geometric_signed, young_equality,
                                     amplified_with_q])
def test_closure_residual_nonpositive(factory):
    run = make_run(factory(), seed=1)
    rng = np.random.default_rng(7)
    for t in rng.uniform(1.0, 50.0, size=5):
        x = rng.normal(size=(20, run.datum.n)) * 0.5
        res = closure_residual(run, t, x)
        assert np.all(res.value <= 1e-8 * res.scale)


def test_closure_residual_matches_differences():
    run = make_run(young_equality(), seed=3)
    Minv = np.linalg.inv(m_matrix(run.datum, run.A))
    rng = np.random.default_rng(5)
    for _ in range(3):
        t = float(rng.uniform(1.5, 5.0))
        x = rng.normal(size=run.datum.n) * 0.3
        fd, scale = fd_closure(run, t, x, log_integrand, Minv)
        exact = closure_residual(run, t, x[None])
        assert float(exact.value[0]) == pytest.approx(fd, abs=1e-4 * scale)


def test_log_integrand_derivatives_consistent():
    run = make_run(amplified_with_q(), seed=2)
    x = np.array([[0.1, -0.2]])
    logU, grad, _, dt = log_integrand_derivatives(run, 3.0, x)
    assert logU[0] == pytest.approx(log_integrand(run, 3.0, x)[0], rel=1e-13)
    h = 1e-6
    fdt = (log_integrand(run, 3.0 + h, x) - log_integrand(run, 3.0 - h, x))[0] / (2 * h)
    assert dt[0] == pytest.approx(fdt, rel=1e-6, abs=1e-8)


def test_harmonic_mean_bound_forward_young():
    spec = YoungSpec.from_widths(2 / 3, 2 / 3, 2 / 3, 1.0, 1.0)
    d, _ = young_datum(spec)
    run = make_run(d, seed=0, direction="supremum")
    pts = np.random.default_rng(1).normal(size=(500, 2))
    for t in (1.0, 3.0, 20.0):
        assert harmonic_mean_check(run, t, pts).passed


def test_functional_q_is_deterministic_and_unbiased_at_geometric():
    run = make_run(geometric_coordinate(), seed=9, samples=50_000)
    a, b = functional_Q(run, 2.0), functional_Q(run, 2.0)
    assert a.value == b.value and a.stderr == b.stderr
    ratio, se = bl_ratio(run)
    # geometric data saturate at every t: the ratio is one up to sampling error
    assert abs(ratio - 1) <= 4 * se + 1e-12


def test_monotonicity_on_geometric_signed():
    run = make_run(geometric_signed(), seed=4, samples=30_000, t_grid=(1.0, 3.0, 30.0))
    rep = check_monotonicity(run, "inverse", limit_rtol=0.02)
    assert rep.precondition and rep.monotone


def test_flow_run_json_round_trip():
    run = make_run(young_equality(), seed=5)
    back = FlowRun.from_dict(run.to_dict())
    assert back.to_dict() == run.to_dict()
    assert functional_Q(back, 2.0).value == functional_Q(run, 2.0).value


def test_non_integrable_flow_raises():
    d = Datum(1, [np.eye(1), np.eye(1)], [1.0, -2.0], None, [np.eye(1), np.eye(1)])
    f = [GaussianMixture([[1.0]], [1.0], [[0.0]])] * 2
    run = FlowRun(d, [np.eye(1), np.eye(1)], f, samples=100)
    with pytest.raises(IntegrationError, match="not integrable"):
        functional_Q(run, 1.0)


def test_flow_run_validation():
    d = geometric_coordinate()
    f = [GaussianMixture([[1.0]], [1.0], [[0.0]])] * 2
    with pytest.raises(ValueError, match="0 < A_j <= G_j"):
        FlowRun(d, [2 * np.eye(1), np.eye(1)], f)
    with pytest.raises(ValueError, match="t_grid"):
        FlowRun(d, [np.eye(1), np.eye(1)], f, t_grid=(2.0, 1.0))
    g = [GaussianMixture([[3.0]], [1.0], [[0.0]])] * 2
    with pytest.raises(ValueError, match="precision"):
        FlowRun(d, [np.eye(1), np.eye(1)], g)
