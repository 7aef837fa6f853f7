"""Case-file validation and the command line front end."""

import copy
import json
import re

import numpy as np
import pytest

from shell6p.cli import main
from shell6p.config import ConfigError, load_case
from shell6p.solver import FIELDS_CSV_COLUMNS

BASE_CASE = {
    "chart": {"kind": "flat"},
    "grid": {"n1": 10, "n2": 10, "x1_lim": [0.0, 1.0], "x2_lim": [0.0, 1.0]},
    "material": {
        "family": "drill_active",
        "youngs": 10000.0,
        "poisson": 0.3,
        "thickness": 0.05,
    },
    "loads": {"body_force": [0.0, 0.0, 0.01]},
    "boundary": {
        "west": {"kind": "dirichlet"},
        "east": {"kind": "dirichlet"},
        "south": {"kind": "dirichlet"},
        "north": {"kind": "dirichlet"},
    },
    "solver": {"max_iterations": 3000, "gradient_tolerance": 1e-4},
}


def _write_case(tmp_path, name="case.json", **edits):
    data = copy.deepcopy(BASE_CASE)
    for dotted, value in edits.items():
        node = data
        *parents, last = dotted.split(".")
        for key in parents:
            node = node.setdefault(key, {})
        if value is None:
            node.pop(last, None)
        else:
            node[last] = value
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


# ---------------------------------------------------------------------------
# config validation


def test_missing_file_reports_path(tmp_path):
    with pytest.raises(ConfigError, match="no_such.json"):
        load_case(str(tmp_path / "no_such.json"))


def test_malformed_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="broken.json"):
        load_case(str(path))


@pytest.mark.parametrize(
    "edits, path_fragment",
    [
        ({"grid.n3": 4}, "grid.n3"),
        ({"material.poison": 0.3}, "material.poison"),
        ({"chart.kind": "sphere"}, "chart.kind"),
        ({"boundary.rim": {"kind": "dirichlet"}}, "boundary.rim"),
        ({"boundary.west": {"kind": "welded"}}, "boundary.west.kind"),
        ({"solver.step_size": 0.1}, "solver.step_size"),
        ({"grid.x1_lim": [1.0, 0.0]}, "grid"),
        ({"grid.n1": 2}, "grid"),
        ({"loads.edge_force": {"rim": [1.0, 0.0, 0.0]}}, "loads.edge_force.rim"),
        ({"material": None}, "material"),
    ],
)
def test_invalid_cases_name_the_bad_key(tmp_path, edits, path_fragment):
    path = _write_case(tmp_path, **edits)
    with pytest.raises(ConfigError) as excinfo:
        load_case(path)
    assert path_fragment in str(excinfo.value)


def test_material_values_checked_at_build(tmp_path):
    # value bounds surface when the material is assembled, with the same
    # path-prefixed error type as the structural checks
    case = load_case(_write_case(tmp_path, **{"material.poisson": 0.7}))
    with pytest.raises(ConfigError, match="material"):
        case.build_material()


def test_valid_case_builds_everything(tmp_path):
    case = load_case(_write_case(tmp_path))
    surf = case.build_surface()
    assert surf.n_nodes == 100
    m = case.build_material()
    assert m.family == "drill_active"
    assert case.build_loads() is not None
    assert set(case.build_boundary().dirichlet_edges) == {
        "west", "east", "south", "north"
    }
    assert case.build_solver().gradient_tolerance == 1e-4


# ---------------------------------------------------------------------------
# solve command


def test_solve_writes_result_and_fields(tmp_path, capsys):
    case = _write_case(tmp_path)
    out = tmp_path / "result.json"
    fields = tmp_path / "fields.csv"
    code = main(
        ["solve", "--config", case, "--out", str(out), "--fields", str(fields)]
    )
    assert code == 0
    assert "converged" in capsys.readouterr().out

    payload = json.loads(out.read_text())
    assert payload["status"] == "converged"
    assert payload["converged"] is True
    assert payload["residuals"]["energy_history_non_increasing"] is True
    assert payload["residuals"]["rotation_orthogonality"] < 1e-10
    assert payload["config"]["grid"]["n1"] == 10
    # floats are serialized with 17 significant digits
    raw = out.read_text()
    m = re.search(r'"functional": (-?\d\.\d{16}e[+-]\d+)', raw)
    assert m is not None
    assert float(m.group(1)) == payload["energies"]["functional"]

    lines = fields.read_text().strip().splitlines()
    assert lines[0] == ",".join(FIELDS_CSV_COLUMNS)
    assert len(lines) == 1 + 100
    assert len(lines[1].split(",")) == len(FIELDS_CSV_COLUMNS)


def test_solve_round_trips_through_embedded_config(tmp_path):
    out1 = tmp_path / "r1.json"
    assert main(["solve", "--config", _write_case(tmp_path),
                 "--out", str(out1)]) == 0
    first = json.loads(out1.read_text())

    echo = tmp_path / "echo.json"
    echo.write_text(json.dumps(first["config"]))
    out2 = tmp_path / "r2.json"
    assert main(["solve", "--config", str(echo), "--out", str(out2)]) == 0
    second = json.loads(out2.read_text())

    first.pop("wall_time_seconds")
    second.pop("wall_time_seconds")
    assert first == second


def test_solve_config_error_exit_code(tmp_path, capsys):
    case = _write_case(tmp_path, **{"material.poisson": 0.7})
    assert main(["solve", "--config", case]) == 1
    err = capsys.readouterr().err
    assert "config error" in err
    assert "material" in err and "0.7" in err


def test_solve_unconverged_exit_code(tmp_path, capsys):
    case = _write_case(tmp_path, **{"solver.max_iterations": 1})
    out = tmp_path / "partial.json"
    assert main(["solve", "--config", case, "--out", str(out)]) == 2
    payload = json.loads(out.read_text())
    assert payload["status"] == "max_iterations"
    assert payload["converged"] is False


def test_solve_rejects_bad_thread_count(tmp_path, capsys):
    case = _write_case(tmp_path)
    assert main(["solve", "--config", case, "--threads", "0"]) == 1
    assert "config error" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# verify command


def test_verify_passes_and_is_deterministic(tmp_path, capsys):
    out1 = tmp_path / "a.json"
    out2 = tmp_path / "b.json"
    assert main(["verify", "--suite", "representation", "--seed", "7",
                 "--out", str(out1), "--threads", "1"]) == 0
    assert main(["verify", "--suite", "representation", "--seed", "7",
                 "--out", str(out2), "--threads", "8"]) == 0
    console = capsys.readouterr().out
    assert console.count("PASS") == 2
    assert out1.read_bytes() == out2.read_bytes()
    report = json.loads(out1.read_text())
    assert report["suite"] == "representation"
    assert report["counts"]["failed"] == 0
    assert {"case", "quantity", "value", "tolerance", "pass"} <= set(
        report["rows"][0]
    )


# ---------------------------------------------------------------------------
# compare command


def test_compare_families_differ(tmp_path, capsys):
    case = _write_case(tmp_path)
    out = tmp_path / "compare.json"
    assert main(["compare", "--config", case, "--out", str(out)]) == 0
    table = capsys.readouterr().out
    assert "drill_active" in table and "drill_free" in table

    payload = json.loads(out.read_text())
    res = payload["results"]
    for entry in res.values():
        assert entry["status"] == "converged"
        assert entry["strain_energy"] > 0.0
    # the families respond differently to the same transverse load
    wa = res["drill_active"]["max_normal_deflection"]
    wf = res["drill_free"]["max_normal_deflection"]
    assert abs(wa - wf) > 0.05 * wa
    assert payload["difference"]["max_normal_deflection"] == wa - wf


def test_compare_zero_load_is_degenerate_equal(tmp_path):
    case = _write_case(tmp_path, **{"loads.body_force": [0.0, 0.0, 0.0]})
    out = tmp_path / "compare0.json"
    assert main(["compare", "--config", case, "--out", str(out)]) == 0
    payload = json.loads(out.read_text())
    for entry in payload["results"].values():
        assert entry["strain_energy"] == 0.0
        assert entry["iterations"] == 0
    assert payload["difference"]["strain_energy"] == 0.0


def test_compare_rejects_custom_coefficients(tmp_path, capsys):
    case = _write_case(
        tmp_path,
        material={
            "family": "custom",
            "alpha": [1.0, 0.0, 1.0, 1.0],
            "beta": [1.0, 0.0, 1.0, 1.0],
        },
    )
    assert main(["compare", "--config", case]) == 1
    assert "counterpart" in capsys.readouterr().err
