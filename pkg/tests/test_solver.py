import numpy as np
import pytest

from vpscreen.errors import ConvergenceError, ParameterError
from vpscreen.grids import Grid
from vpscreen.solver import (
    SolverConfig,
    apply_K,
    assemble_and_verify,
    check_resolution,
    radial_solve,
    solve,
)
from vpscreen.sources import ChargeMeasure, build_H1_H, build_S_radial


@pytest.mark.parametrize(
    "kw",
    [{"tol_fixed_point": 0.0}, {"damping": 0.0}, {"damping": 1.5}, {"max_iter": 0},
     {"cap_active_policy": "ignore"}],
)
def test_config_validation(kw):
    with pytest.raises(ParameterError):
        SolverConfig(**kw)


def test_resolution_guard():
    with pytest.raises(ParameterError, match="screening lengths"):
        check_resolution(Grid(10.0, 100), 1.0)
    with pytest.raises(ParameterError, match="spacing"):
        check_resolution(Grid(20.0, 64), 1.0)
    check_resolution(Grid(20.0, 100), 1.0)


def test_zero_source_small_grid(gt25):
    g = Grid(20.0, 16)
    sol = solve(ChargeMeasure(), gt25, g, SolverConfig(check_resolution=False))
    assert sol.iterations == 1
    assert not np.any(sol.Q) and not np.any(sol.R)
    assert sol.pde_residual == 0.0
    assert sol.final_update_norm == 0.0


def test_repulsive_radial_certificates(radial_repulsive):
    sol = radial_repulsive
    assert sol.final_update_norm <= 1e-9
    assert sol.Q.min() >= -1e-10
    assert np.all(np.diff(sol.Q) <= 1e-12)
    assert not sol.cap_was_active
    assert sol.comparison_violation <= 1e-8
    assert sol.pde_residual < 1e-7
    assert sol.history[-1] <= 1e-9


def test_attractive_radial_has_well(radial_attractive):
    sol = radial_attractive
    assert sol.Q.min() < -1.0
    assert sol.final_update_norm <= 1e-9
    assert not sol.cap_was_active


def test_certificate_recomputed(gt25, radial_repulsive):
    sol = radial_repulsive
    KR = apply_K(gt25, sol.S, sol.H, sol.R, sol.mesh)
    assert np.max(np.abs(KR - sol.R)) <= 1e-9


def test_residual_detects_perturbation(radial_repulsive):
    sol = radial_repulsive
    bumped = sol.Q + 1e-3 * np.exp(-sol.mesh.centers ** 2)
    assert assemble_and_verify(sol, bumped) > 1e3 * sol.pde_residual


def test_damping_reaches_same_fixed_point(gt25, radial_repulsive):
    sol = radial_solve(SolverConfig(damping=0.5), gt25, 1.0, 30.0, 2000)
    assert sol.iterations > radial_repulsive.iterations
    assert np.max(np.abs(sol.R - radial_repulsive.R)) < 1e-8


def test_non_convergence_reports_history(gt25):
    with pytest.raises(ConvergenceError) as info:
        radial_solve(SolverConfig(max_iter=2), gt25, 1.0, 30.0, 500)
    assert len(info.value.history) == 2


def test_K_preserves_nonnegativity(gt25, rng):
    from vpscreen.grids import RadialMesh

    m = RadialMesh(20.0, 400)
    S = build_S_radial(-1.0, 1.0, m).values
    aux = build_H1_H(gt25, S, m, 1.0)
    for _ in range(5):
        R = rng.random(400) * 0.1
        assert apply_K(gt25, S, aux.H, R, m).min() >= 0.0


def test_radial_requires_charge(gt25):
    with pytest.raises(ParameterError):
        radial_solve(SolverConfig(), gt25, 0.0, 30.0, 100)


def test_summary_is_plain(radial_repulsive):
    s = radial_repulsive.summary()
    assert s["iterations"] == radial_repulsive.iterations
    assert s["sigma"] == pytest.approx(1.0)
