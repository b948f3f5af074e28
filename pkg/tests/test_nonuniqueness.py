import json

import numpy as np
import pytest
from scipy.integrate import quad

from vpscreen.errors import ParameterError
from vpscreen.gtransform import build_gtransform
from vpscreen.nonuniqueness import (
    brute_infimum,
    charge_neutrality,
    compare,
    f_difference_lower_bound,
    g_ordering,
    inner_infimum,
    negative_set,
    neutrality_integrals,
    source_integral,
    velocity_l1,
)
from vpscreen.profile import calibrate_c_beta, extend
from vpscreen.scenario import Scenario
from vpscreen.sources import yukawa_radial


@pytest.fixture(scope="module")
def pair(maxwellian):
    c = max(calibrate_c_beta(maxwellian, b) for b in (0.1, 0.4))
    return extend(maxwellian, 0.1, c), extend(maxwellian, 0.4, c)


def radial_scenario(q):
    return Scenario.from_dict({"radial": {"r_max": 30.0, "n": 2000}, "charges": {"points": [{"q": q}]}})


def test_negative_set(radial_repulsive, radial_attractive):
    assert negative_set(radial_repulsive) == 0.0
    frac = negative_set(radial_attractive)
    assert 0.0 < frac < 1.0
    with pytest.raises(ParameterError):
        negative_set(radial_attractive, eps=0.0)


def test_source_integral_closed_form(radial_attractive):
    val, _ = quad(lambda r: 4 * np.pi * r * r * yukawa_radial(1.0, r), 0.0, 30.0, limit=200)
    assert source_integral(radial_attractive) == pytest.approx(-val, rel=1e-12)


@pytest.mark.parametrize("which", ["radial_repulsive", "radial_attractive"])
def test_charge_neutrality(request, which):
    sol = request.getfixturevalue(which)
    assert charge_neutrality(sol) <= 1e-4 * abs(sol.theta)
    total, raw = neutrality_integrals(sol)
    # the node sum alone misses the Yukawa cusp at the origin
    assert abs(raw + sol.theta) > abs(total + sol.theta)


def test_g_ordering_premise(pair):
    g1, g2 = (build_gtransform(F) for F in pair)
    assert g1(np.array([-1.0]))[0] > g2(np.array([-1.0]))[0]
    gmin, where = g_ordering(g1, g2)
    assert gmin > 0.0
    assert where <= -0.05


def test_identical_extensions_give_zero(pair):
    F = pair[0]
    assert velocity_l1(F, F, -0.7, -0.7) == 0.0
    assert inner_infimum(F, F, -0.7).value == 0.0


def test_single_cell_sanity(pair):
    # brute-force oracle at Q1 = -0.5
    opt = inner_infimum(*pair, -0.5)
    r_b, v_b = brute_infimum(*pair, -0.5)
    assert opt.bracket_ok
    assert abs(opt.value - v_b) <= 1e-6
    assert opt.value > 0.0


def test_velocity_l1_vectorized(pair):
    rs = np.array([-1.0, -0.5, 0.2])
    vec = velocity_l1(*pair, -0.3, rs)
    assert np.allclose(vec, [velocity_l1(*pair, -0.3, r) for r in rs], rtol=1e-14)


def test_lower_bound_vanishes_for_same_solution(radial_attractive):
    fb = f_difference_lower_bound(radial_attractive, radial_attractive, n_table=20)
    assert fb.value == 0.0
    assert fb.n_cells > 0


def test_compare_radial():
    report, s1, s2 = compare(0.1, 0.4, radial_scenario(-1.0), n_spot=2, n_table=60)
    assert report.q_diff_l2 > report.q_diff_threshold
    assert report.f_diff_lower_bound > 0.0
    assert report.neg_volume_fraction > 0.0
    assert report.sigma[0] == report.sigma[1]
    assert report.charge_neutrality_defect <= 1e-4
    assert report.passed
    d = json.loads(report.to_json())
    assert d["distinct"] and not d["degenerate"]


def test_compare_degenerate():
    report, s1, s2 = compare(0.25, 0.25, radial_scenario(-1.0), n_spot=1, n_table=20)
    assert report.degenerate
    assert report.q_diff_l2 == 0.0
    assert report.f_diff_lower_bound == 0.0


def test_compare_preconditions():
    with pytest.raises(ParameterError, match="attractive"):
        compare(0.1, 0.4, radial_scenario(1.0))
    with pytest.raises(ParameterError):
        compare(0.4, 0.1, radial_scenario(-1.0))
