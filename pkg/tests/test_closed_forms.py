import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from regbl.closed_forms import (HCSpec, PLSpec, YoungSpec, hc_constant, hc_datum, pl_datum, pl_regularized,
                                young_constant, young_datum, young_factor, young_gammas,
                                young_regularized)
from regbl.gaussian import bl_gaussian
from regbl.optimize import optimize_gaussian

from oracles import bl_by_quadrature, pl_zoom_grid


def test_young_constant_known_values():
    assert young_constant(2 / 3, 2 / 3, 2 / 3) == pytest.approx(math.sqrt(3) / 2, rel=1e-14)
    # inverse range, frozen from an independent evaluation of the product formula
    assert young_constant(-1.0, 1.5, 1.5) == pytest.approx(1.5396007178390020, rel=1e-12)
    # an exponent equal to 1 contributes a unit factor
    assert young_factor(1.0) == 1.0


def test_young_constant_rejects_bad_exponents():
    with pytest.raises(ValueError, match="sum to 2"):
        young_constant(0.5, 0.5, 0.5)
    with pytest.raises(ValueError, match="outside"):
        young_constant(-1.0, 2.5, 0.5)


def test_young_spec_width_relation():
    spec = YoungSpec.from_widths(-1.0, 1.5, 1.5, 2.0, 1.0)
    assert spec.sigma0 == pytest.approx(2 * (2 / 1.5 + 1 / 1.5))
    with pytest.raises(ValueError, match="widths violate"):
        YoungSpec(-1.0, 1.5, 1.5, 1.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        YoungSpec.from_widths(-1.0, 1.5, 1.5, -1.0, 1.0)


@given(st.floats(-2.0, -0.1), st.floats(1.05, 2.0), st.floats(0.2, 5.0), st.floats(0.2, 5.0))
@settings(max_examples=50, deadline=None)
def test_young_gamma0_vanishes_under_width_relation(c0, c1, s1, s2):
    # the width relation makes the bracket of the unregularized slot zero at A = G
    c2 = 2 - c0 - c1
    if c2 <= 1:
        return
    spec = YoungSpec.from_widths(c0, c1, c2, s1, s2)
    g = young_gammas(spec.c, tuple(1 / s for s in spec.sigma))
    assert abs(g[0]) <= 1e-10 * (1 / spec.sigma0)


def test_regularized_young_equality_case():
    # equal widths in a symmetric inverse spec: the candidate is attained at A = G
    spec = YoungSpec.from_widths(-1.0, 1.5, 1.5, 1.5, 1.5)
    res = young_regularized(spec)
    assert res.condition_holds
    d, _ = young_datum(spec)
    val = bl_gaussian(d, [np.array(G) for G in d.regularizers])
    assert val.value == pytest.approx(res.constant, rel=1e-12)
    opt = optimize_gaussian(d)
    assert opt.value == pytest.approx(res.constant, rel=1e-9)


def test_regularized_young_regime_checks():
    spec = YoungSpec.from_widths(-1.0, 1.5, 1.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        young_regularized(spec, "forward")
    with pytest.raises(ValueError):
        young_regularized(spec, "sideways")


def test_pl_symmetric_closed_form():
    res = pl_regularized(PLSpec(0.25, 0.25, 1.0, 1.0))
    assert res.branch == "corner"
    assert res.constant == pytest.approx(math.sqrt(2), rel=1e-15)


def test_pl_branches_agree_on_condition_boundary():
    # c1 s1 + c2 s2 = min(s1, s2) exactly: corner and face give the same value
    c1, c2, s1 = 0.3, 0.2, 1.0
    s2 = (s1 - c1 * s1) / c2   # makes c1 s1 + c2 s2 = s1 <= s2
    res = pl_regularized(PLSpec(c1, c2, s1, s2))
    bumped = pl_regularized(PLSpec(c1, c2, s1, s2 * (1 + 1e-9)))
    assert res.branch == "corner" and bumped.branch == "face"
    assert bumped.constant == pytest.approx(res.constant, rel=1e-7)


@pytest.mark.parametrize("seed", range(5))
def test_pl_face_matches_zoom_grid(seed):
    rng = np.random.default_rng(seed)
    while True:
        c1, c2 = rng.uniform(0.05, 0.6, size=2)
        s1, s2 = np.exp(rng.uniform(-1.5, 1.5, size=2))
        if c1 + c2 < 0.95 and pl_regularized(PLSpec(c1, c2, s1, s2)).branch == "face":
            break
    res = pl_regularized(PLSpec(c1, c2, s1, s2))
    grid = pl_zoom_grid(c1, c2, s1, s2)[0] ** -0.5
    assert grid == pytest.approx(res.constant, rel=1e-6)


@pytest.mark.parametrize("spec", [PLSpec(0.25, 0.25, 1.0, 1.0), PLSpec(0.3, 0.4, 1.0, 2.5)])
def test_pl_lifted_datum_reproduces_constant(spec):
    d, factor = pl_datum(spec)
    res = optimize_gaussian(d)
    assert factor / res.value == pytest.approx(pl_regularized(spec).constant, rel=1e-8)


def test_pl_spec_validation():
    with pytest.raises(ValueError):
        PLSpec(1.2, 0.1, 1.0, 1.0)
    with pytest.raises(ValueError, match="c1 \\+ c2"):
        pl_regularized(PLSpec(0.6, 0.6, 1.0, 1.0))


def test_hc_constant_frozen():
    spec = HCSpec(2.0, 4.0, 0.5 * math.log(3.0))
    assert hc_constant(spec) == pytest.approx(0.6147919593712747, rel=1e-13)
    assert HCSpec.from_p_s(2.0, 0.5 * math.log(3.0)).q == pytest.approx(4.0)
    with pytest.raises(ValueError):
        HCSpec(2.0, 3.0, 0.5 * math.log(3.0))


@pytest.mark.parametrize("p,s", [(2.0, 0.5 * math.log(3.0)), (1.5, 0.3), (3.0, 1.0)])
def test_hc_constant_normalizes_standard_gaussians(p, s):
    # constant functions on gaussian space: C * int e^{-pi<x,Qx>} prod gamma(x_j)^{c_j} = 1
    d, _, C = hc_datum(HCSpec.from_p_s(p, s))
    A = [np.array(G) for G in d.regularizers]
    assert C * bl_by_quadrature(d, A) == pytest.approx(1.0, rel=1e-9)
    assert C * bl_gaussian(d, A).value == pytest.approx(1.0, rel=1e-12)
