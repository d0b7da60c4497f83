import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest

from actionforge.cli import main
from actionforge.config import ConfigError, build_potential, set_path, validate_config

ROOT = Path(__file__).resolve().parents[1]

PENDULUM = {"T": 1.0, "N": 1, "potential": {"type": "pendulum", "a": 1.0, "forcing": {"cos": [0.3]}},
            "discretization": {"M": 16}}
OSCILLATOR = {"T": math.pi, "N": 1,
              "potential": {"type": "linear_oscillator", "omega0": 1.0, "omega": 2.0, "eps": 0.3},
              "discretization": {"M": 8}}
SOFT_WELL = {"T": 1.0, "N": 1, "potential": {"type": "soft_well", "delta": 0.1}, "discretization": {"M": 8},
             "saddle": {"R": 5.0, "b": 0.1}}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def load(path):
    return json.loads(Path(path).read_text())


# config -------------------------------------------------------------------------------------------


@pytest.mark.parametrize("patch, message", [
    ({"T": -1}, "T must be > 0"),
    ({"zzz": 1}, "unknown key zzz"),
    ({"solver": {"xx": 1}}, "unknown key solver.xx"),
    ({"potential": {"type": "pendulum", "a": 1.0, "foo": 2}}, "unknown key potential.foo"),
    ({"potential": {"type": "bogus"}}, "unknown type 'bogus'"),
    ({"discretization": {"M": 10, "K": 20}}, "discretization.K"),
    ({"N": 2, "lattice": [1.0]}, "lattice"),
])
def test_config_errors_name_the_key(patch, message):
    with pytest.raises(ConfigError) as e:
        validate_config({**PENDULUM, **patch})
    assert message in str(e.value)


def test_expression_syntax_error_is_config_error():
    cfg = {**PENDULUM, "potential": {"type": "expr", "formula": "sin("}}
    with pytest.raises(ConfigError) as e:
        build_potential(validate_config(cfg))
    assert "position 4" in str(e.value)


def test_set_path():
    cfg = set_path(PENDULUM, "potential.forcing.cos.0", 0.5)
    assert cfg["potential"]["forcing"]["cos"] == [0.5]
    assert PENDULUM["potential"]["forcing"]["cos"] == [0.3]
    assert set_path(PENDULUM, "T", 2.0)["T"] == 2.0


def test_schema_copy_in_docs_matches_package():
    a = (ROOT / "src" / "actionforge" / "config.schema.json").read_text()
    b = (ROOT / "docs" / "config.schema.json").read_text()
    assert a == b


# solve-min --------------------------------------------------------------------------------------------


def test_solve_min_pendulum(tmp_path):
    out = tmp_path / "out"
    assert main(["solve-min", "--config", write(tmp_path, PENDULUM), "--out", str(out)]) == 0
    for name in ("result.json", "trajectory.csv", "trace.csv", "verify.json", "meta.json"):
        assert (out / name).exists()
    assert load(out / "verify.json")["residual_sup"] <= 1e-8
    result = load(out / "result.json")
    assert result["converged"] and result["problem"] == PENDULUM
    rows = list(csv.reader((out / "trajectory.csv").open()))
    assert rows[0] == ["t", "u_1", "du_1"]


def test_solve_min_deterministic(tmp_path):
    cfg = write(tmp_path, PENDULUM)
    main(["solve-min", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "7"])
    main(["solve-min", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "7"])
    for name in ("result.json", "trajectory.csv", "trace.csv", "verify.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_solve_min_bad_config_exits_2(tmp_path, capsys):
    assert main(["solve-min", "--config", write(tmp_path, {**PENDULUM, "T": -1}), "--out", str(tmp_path)]) == 2
    assert "T must be > 0" in capsys.readouterr().err


def test_solve_min_max_iter_exits_1_with_partial_result(tmp_path):
    cfg = {**PENDULUM, "solver": {"max_iter": 1}}
    out = tmp_path / "out"
    assert main(["solve-min", "--config", write(tmp_path, cfg), "--out", str(out)]) == 1
    result = load(out / "result.json")
    assert result["status"] == "max_iter" and not result["converged"]


def test_usage_errors_exit_2(tmp_path):
    assert main(["solve-min"]) == 2
    assert main(["nonsense"]) == 2
    assert main(["check", "--config", str(tmp_path / "missing.json")]) == 2
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["check", "--config", str(tmp_path / "bad.json")]) == 2


# solve-saddle ---------------------------------------------------------------------------------------------


def test_solve_saddle_oscillator(tmp_path):
    out = tmp_path / "out"
    assert main(["solve-saddle", "--config", write(tmp_path, OSCILLATOR), "--out", str(out)]) == 0
    rows = list(csv.DictReader((out / "trajectory.csv").open()))
    t = np.array([float(r["t"]) for r in rows])
    u = np.array([float(r["u_1"]) for r in rows])
    assert np.max(np.abs(u + 0.1 * np.cos(2 * t))) <= 1e-9
    assert load(out / "result.json")["nonconstant"]


def test_solve_saddle_soft_well(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["solve-saddle", "--config", write(tmp_path, SOFT_WELL), "--out", str(out)]) == 0
    result = load(out / "result.json")
    assert result["constant_solution"] and not result["nonconstant"]
    assert result["geometry"]["holds"] and result["geometry"]["threshold_ok"]
    assert "constant" in capsys.readouterr().out


def test_solve_saddle_divergent_steps(tmp_path, capsys):
    cfg = {**OSCILLATOR, "solver": {"descent_step": 1e9, "ascent_step": 1e9}}
    out = tmp_path / "out"
    assert main(["solve-saddle", "--config", write(tmp_path, cfg), "--out", str(out)]) == 1
    result = load(out / "result.json")
    assert result["status"] == "diverged"
    assert "geometry" in capsys.readouterr().err


# check ------------------------------------------------------------------------------------------------------


def _rows(out):
    return {r["condition"]: r for r in load(out / "check.json")}


def test_check_pendulum_passes(tmp_path, capsys):
    cfg = {**PENDULUM, "potential": {"type": "pendulum", "a": 1.0, "forcing": {"cos": [0.5]}},
           "check": {"C1": 0.1, "C2": 1.625}}
    out = tmp_path / "out"
    assert main(["check", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    rows = _rows(out)
    for name in ("A", "F1", "lattice_integral", "F3"):
        assert rows[name]["status"] == "pass", name
    for name in ("F4", "F5", "F6", "T_threshold"):
        assert rows[name]["status"] == "not checked"
    text = capsys.readouterr().out
    assert "not checked" in text and "lattice_integral" in text


def test_check_nonzero_mean_forcing_fails_lattice(tmp_path):
    cfg = {**PENDULUM, "potential": {"type": "pendulum", "a": 1.0, "forcing": {"mean": 1.0}}}
    out = tmp_path / "out"
    assert main(["check", "--config", write(tmp_path, cfg), "--out", str(out)]) == 1
    row = _rows(out)["lattice_integral"]
    assert row["status"] == "FAIL"
    assert row["magnitude"] == pytest.approx(2 * math.pi * 1.0, abs=1e-8)


def test_check_soft_well_F5_F6(tmp_path):
    cfg = {**SOFT_WELL, "check": {"delta": 0.1, "R": 5.0, "b": 0.1}}
    out = tmp_path / "out"
    assert main(["check", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    rows = _rows(out)
    assert rows["F5"]["status"] == rows["F6"]["status"] == rows["T_threshold"]["status"] == "pass"


# sweep -----------------------------------------------------------------------------------------------------------


def test_sweep_threshold_flips(tmp_path):
    cfg = {**SOFT_WELL, "sweep": {"solver": "saddle"}, "solver": {"max_iter": 50}}
    out = tmp_path / "out"
    main(["sweep", "--config", write(tmp_path, cfg), "--out", str(out), "--param", "T",
          "--values", "1,5,10,14,14.04,14.06,15,20"])
    rows = list(csv.DictReader((out / "sweep.csv").open()))
    flags = {float(r["value"]): r["threshold_ok"] == "True" for r in rows}
    assert all(flags[v] for v in (1, 5, 10, 14, 14.04))
    assert not any(flags[v] for v in (14.06, 15, 20))
    assert load(out / "sweep.json")["param"] == "T"


def test_sweep_forcing_amplitude(tmp_path):
    out = tmp_path / "out"
    code = main(["sweep", "--config", write(tmp_path, PENDULUM), "--out", str(out),
                 "--param", "potential.forcing.cos.0", "--values", "0,0.1,0.2,0.3,0.4,0.5", "--workers", "2"])
    assert code == 0
    rows = list(csv.DictReader((out / "sweep.csv").open()))
    assert all(float(r["residual_sup"]) <= 1e-8 for r in rows)
    sup = [float(r["sup_norm"]) for r in rows]
    assert all(b >= a for a, b in zip(sup, sup[1:]))


def test_sweep_empty_values_exit_2(tmp_path):
    cfg = write(tmp_path, PENDULUM)
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "o"), "--param", "T", "--values", ""]) == 2
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "o"), "--param", "T", "--values", "-1"]) == 2


# suite --------------------------------------------------------------------------------------------------------------


def test_suite_exit_codes_and_determinism(tmp_path):
    assert main(["suite", "--trials", "0"]) == 2
    assert main(["suite", "--trials", "40", "--seed", "5", "--out", str(tmp_path / "a")]) == 0
    assert main(["suite", "--trials", "40", "--seed", "5", "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "a" / "suite.json").read_bytes() == (tmp_path / "b" / "suite.json").read_bytes()
