import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vpscreen.errors import ConsistencyError, ParameterError, TableRangeError
from vpscreen.gtransform import (
    TableClampWarning,
    asymptotic_growth,
    b_apply,
    build_gtransform,
    continuity_bound,
    g_deriv,
    g_second,
    g_value,
    monotone_slopes,
    table_nodes,
    verify_conditions,
)
from vpscreen.profile import extend

# c-free growth limits 4 pi sqrt2 B(3/2, 1-beta) and 2 pi sqrt2 B(1/2, 1-beta), mpmath
GROWTH_LIMITS = {
    0.1: (13.549267907508353, 18.968975070511695),
    0.25: (17.034229780569032, 21.292787225711290),
    0.4: (22.412340428219029, 24.653574471040932),
}


def test_maxwellian_closed_form(gt25):
    r = np.linspace(0.0, 20.0, 401)
    assert np.max(np.abs(gt25(r) - np.exp(-r))) < 1e-9
    assert np.max(np.abs(gt25.deriv(r) + np.exp(-r))) < 5e-8
    assert gt25.sigma == pytest.approx(1.0, abs=1e-12)
    assert gt25.g0 == pytest.approx(1.0, abs=1e-12)


def test_direct_quadrature_agrees_with_table(ext25, gt25):
    for r in (-37.0, -3.3, -0.2, 0.7, 5.0):
        assert g_value(ext25, r) == pytest.approx(float(gt25(r)), rel=1e-8, abs=5e-10)
        assert g_deriv(ext25, r) == pytest.approx(float(gt25.deriv(r)), rel=1e-6, abs=5e-8)


def test_direct_maxwellian_values(ext25):
    assert g_value(ext25, 2.0) == pytest.approx(np.exp(-2.0), rel=1e-11)
    assert g_deriv(ext25, 0.0) == pytest.approx(-1.0, rel=1e-11)
    assert g_second(ext25, 1.0) == pytest.approx(np.exp(-1.0), rel=1e-9)


def test_derivative_is_finite_difference_of_value(ext25):
    # pins the prefactor of g': it must be half the naive 4 pi sqrt 2 scaling
    h = 1e-4
    for r in (-4.0, -0.5, 1.5):
        fd = (g_value(ext25, r + h) - g_value(ext25, r - h)) / (2 * h)
        assert g_deriv(ext25, r) == pytest.approx(fd, rel=1e-7)


@pytest.mark.parametrize("beta", sorted(GROWTH_LIMITS))
def test_asymptotic_growth_limits(beta):
    a, b = asymptotic_growth(beta, 1.0)
    assert a == pytest.approx(GROWTH_LIMITS[beta][0], rel=1e-13)
    assert b == pytest.approx(GROWTH_LIMITS[beta][1], rel=1e-13)


def test_growth_ratio_approaches_limit_from_below(ext25, gt25):
    lim1, _ = asymptotic_growth(0.25, ext25.c_beta)
    assert list(gt25.spot_r) == [-1000.0, -100.0]
    r = gt25.spot_r
    ratio = (gt25.spot_g - gt25.g0 + gt25.sigma * r) / np.abs(r) ** gt25.alpha
    assert ratio[1] < ratio[0] < lim1


def test_table_nodes_include_zero_and_ends():
    r = table_nodes(-50.0, 50.0, 1025)
    assert r[0] == -50.0 and r[-1] == 50.0
    assert np.any(r == 0.0)
    assert np.all(np.diff(r) > 0)


def test_conditions_pass(gt25):
    rep = verify_conditions(gt25)
    assert rep.passed, rep.to_dict()
    assert set(r.name for r in rep.results) == {"normalization", "monotonicity", "subdifferential", "growth"}
    json.loads(rep.to_json())


def test_undercalibrated_constant_fails_subdifferential(maxwellian):
    gt = build_gtransform(extend(maxwellian, 0.25, 1e-6))
    rep = verify_conditions(gt)
    assert not rep["subdifferential"].passed
    assert rep["subdifferential"].worst_r < -10.0
    assert rep["normalization"].passed


def test_table_range(gt25):
    with pytest.raises(TableRangeError) as info:
        gt25(np.array([-60.0]))
    assert info.value.value == -60.0
    with pytest.warns(TableClampWarning):
        out = gt25(np.array([60.0, 1.0]))
    assert out[0] == 0.0


def test_bad_table_arguments(ext25):
    with pytest.raises(ParameterError):
        build_gtransform(ext25, r_min=1.0)
    with pytest.raises(ParameterError):
        build_gtransform(ext25, n=10)


def test_monotone_slopes_limit_overshoot():
    x = np.array([0.0, 1.0, 2.0])
    y = np.array([1.0, 0.5, 0.4])
    d, n = monotone_slopes(x, y, np.array([0.2, -5.0, -0.1]))
    assert n >= 1
    assert d[0] == 0.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(min_value=-49.9, max_value=49.9), min_size=1, max_size=30))
def test_b_nonnegative_and_bounded(gt, values):
    P = np.array(values)
    B = gt.b(P)
    assert np.all(B >= -1e-12)
    assert np.all(B <= gt.b_bound(P) + 1e-14)


@pytest.fixture(scope="module")
def gt(gt25):
    return gt25


@settings(max_examples=100, deadline=None)
@given(st.floats(min_value=-49.9, max_value=49.8), st.floats(min_value=1e-6, max_value=0.1))
def test_table_monotone(gt, r, dr):
    assert gt(np.array([r + dr]))[0] <= gt(np.array([r]))[0]


def test_b_apply_accepts_fields_and_rejects_negative(gt25):
    from vpscreen.grids import Grid, ScalarField

    f = ScalarField(Grid(4.0, 4), np.full((4, 4, 4), -0.3))
    out = b_apply(gt25, f)
    assert isinstance(out, ScalarField) and np.all(out.values >= 0)

    class Broken:
        r_min = -50.0

        def b(self, P):
            return -np.ones_like(P)

    with pytest.raises(ConsistencyError):
        b_apply(Broken(), np.zeros(3))


def test_continuity_bound(gt25, rng):
    w = np.full(500, 0.01)
    for _ in range(5):
        P = rng.normal(scale=2.0, size=500)
        R = P + rng.normal(scale=0.1, size=500)
        lhs, rhs = continuity_bound(gt25, P, R, w)
        assert lhs <= rhs


def test_csv_round_trip(gt25, tmp_path):
    path = tmp_path / "g.csv"
    gt25.write_csv(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 0], gt25.r)
    assert np.array_equal(data[:, 1], gt25.g)


def test_no_warnings_inside_table(gt25):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        gt25(np.linspace(-50, 50, 11))
