import json

import numpy as np
import pytest

from vpscreen.cli import main
from vpscreen.errors import ParameterError
from vpscreen.scenario import Scenario

RADIAL = {"radial": {"r_max": 30.0, "n": 2000}}
SMALL_GRID = {"grid": {"L": 20.0, "n": 24}, "solver": {"check_resolution": False}}


def write(tmp_path, doc, name="s.json"):
    doc = {"output": "out", **doc}
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def read(tmp_path, name):
    return json.loads((tmp_path / "out" / name).read_text())


def test_gcheck_ok(tmp_path):
    assert main(["gcheck", str(write(tmp_path, {"profile": {"beta": 0.25}, **RADIAL}))]) == 0
    rep = read(tmp_path, "conditions.json")
    assert rep["passed"]
    header = (tmp_path / "out" / "gtable.csv").read_text().splitlines()[0]
    assert header == "r,g,gprime"


def test_gcheck_undercalibrated(tmp_path):
    path = write(tmp_path, {"profile": {"beta": 0.25, "c_beta": 1e-6}, **RADIAL})
    assert main(["gcheck", str(path)]) == 1
    rep = read(tmp_path, "conditions.json")
    failed = [c for c in rep["conditions"] if not c["passed"]]
    assert [c["name"] for c in failed] == ["subdifferential"]
    assert failed[0]["worst_r"] < 0


@pytest.mark.parametrize(
    "doc",
    [
        {"profile": {"beta": 0.7}, **RADIAL},
        {"profile": {"beta": 0.25}},
        {"profile": {"beta": 0.25, "colour": 1}, **RADIAL},
        {**RADIAL, **SMALL_GRID},
    ],
)
def test_parameter_errors(tmp_path, doc):
    assert main(["gcheck", str(write(tmp_path, doc))]) == 2


def test_unreadable_scenario(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["gcheck", str(bad)]) == 2


def test_radial_solve(tmp_path):
    path = write(tmp_path, {**RADIAL, "charges": {"points": [{"q": 1.0}]}})
    assert main(["radial", str(path)]) == 0
    sol = read(tmp_path, "solution.json")
    assert sol["min_Q"] >= -1e-10
    assert sol["charge_neutrality_defect"] <= 1e-4
    assert sol["provenance"]["conditions"][0]["passed"]
    data = np.loadtxt(tmp_path / "out" / "Q.csv", delimiter=",")
    assert data.shape == (2000, 2)


def test_solve_is_deterministic(tmp_path):
    path = write(tmp_path, {**RADIAL, "charges": {"points": [{"q": -1.0}]}})
    assert main(["radial", str(path)]) == 0
    first = (tmp_path / "out" / "solution.json").read_bytes()
    assert main(["radial", str(path)]) == 0
    assert (tmp_path / "out" / "solution.json").read_bytes() == first
    assert json.loads(first)["min_Q"] < 0


def test_zero_source_grid(tmp_path):
    assert main(["solve", str(write(tmp_path, SMALL_GRID))]) == 0
    sol = read(tmp_path, "solution.json")
    assert sol["iterations"] == 1
    assert sol["min_Q"] == sol["max_Q"] == 0.0


def test_wrong_subcommand_for_mesh(tmp_path):
    assert main(["solve", str(write(tmp_path, {**RADIAL, "charges": {"points": [{"q": 1.0}]}}))]) == 2
    assert main(["radial", str(write(tmp_path, SMALL_GRID))]) == 2


def test_non_convergence_exit(tmp_path):
    path = write(tmp_path, {**RADIAL, "charges": {"points": [{"q": 1.0}]}, "solver": {"max_iter": 1}})
    assert main(["radial", str(path)]) == 3
    hist = np.loadtxt(tmp_path / "out" / "residual_history.csv")
    assert hist.size == 1


def test_sample_and_density(tmp_path):
    doc = {**SMALL_GRID, "charges": {"gaussians": [{"q": -1.0, "width": 1.5}]}}
    path = write(tmp_path, doc)
    assert main(["sample", str(path), "--point", "1", "0", "0", "--velocity", "0", "1", "0"]) == 0
    rows = np.loadtxt(tmp_path / "out" / "samples.csv", delimiter=",", skiprows=1, ndmin=2)
    assert rows.shape == (1, 7) and rows[0, 6] > 0
    res = read(tmp_path, "samples.json")
    assert res["boundary_deviation"][0]["deviation"] <= res["boundary_deviation"][0]["bound"]
    assert main(["density", str(path), "--z", "0.0", "--check", "4"]) == 0
    plane = np.loadtxt(tmp_path / "out" / "density_plane.csv", delimiter=",", skiprows=2)
    assert plane.shape == (24 * 24, 3)
    assert plane[:, 2].max() > 1.0


def test_compare_refuses_repulsive(tmp_path, capsys):
    path = write(tmp_path, {**RADIAL, "charges": {"points": [{"q": 1.0}]}})
    assert main(["compare", str(path), "0.1", "0.4"]) == 2
    assert "attractive" in capsys.readouterr().err


def test_compare_degenerate(tmp_path, capsys):
    path = write(tmp_path, {**RADIAL, "charges": {"points": [{"q": -1.0}]}})
    assert main(["compare", str(path), "0.25", "0.25"]) == 0
    assert "degenerate" in capsys.readouterr().out
    rep = read(tmp_path, "comparison.json")
    assert rep["degenerate"] and rep["q_diff_l2"] == 0.0


def test_compare_distinct(tmp_path):
    path = write(tmp_path, {**RADIAL, "charges": {"points": [{"q": -1.0}]}})
    assert main(["compare", str(path), "0.1", "0.4"]) == 0
    rep = read(tmp_path, "comparison.json")
    assert rep["q_diff_l2"] > rep["q_diff_threshold"]
    assert rep["f_diff_lower_bound"] > 0
    assert (tmp_path / "out" / "Q_difference.csv").exists()


def test_scenario_defaults_and_theta(tmp_path):
    sc = Scenario.from_dict({**SMALL_GRID, "charges": {"points": [{"q": -0.5}], "gaussians": [{"q": 0.2, "width": 1.0}]}},
                            base_dir=tmp_path)
    assert sc.theta == pytest.approx(-0.3)
    assert sc.c_beta is None and sc.beta == 0.25
    assert sc.measure().theta == pytest.approx(-0.3, abs=1e-12)


def test_scenario_density_file(tmp_path):
    from vpscreen.grids import Grid
    from vpscreen.sources import gaussian_density

    g = Grid(20.0, 24)
    gaussian_density(g, -0.7, 1.2).to_csv(tmp_path / "rho.csv")
    sc = Scenario.from_dict({**SMALL_GRID, "charges": {"density_file": "rho.csv"}}, base_dir=tmp_path)
    assert sc.theta == pytest.approx(-0.7, abs=1e-12)
    other = Scenario.from_dict({"grid": {"L": 20.0, "n": 32}, "charges": {"density_file": "rho.csv"}},
                               base_dir=tmp_path)
    with pytest.raises(ParameterError):
        other.measure()


def test_radial_scenario_rejects_offset_charge():
    sc = Scenario.from_dict({**RADIAL, "charges": {"points": [{"q": 1.0, "pos": [1, 0, 0]}]}})
    with pytest.raises(ParameterError):
        sc.solve_with(None)
