import csv
import filecmp
import json
from pathlib import Path

import numpy as np
import pytest

from peeldyn.cli.main import SCENARIO_DIR, bundled_scenarios, main
from peeldyn.cli.output import format_number, write_csv
from peeldyn.cli.scenario import ScenarioError, load_scenario, parse_scenario_text


def _read(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    return {h: np.array([float(r[i]) for r in rows[1:]]) for i, h in enumerate(rows[0])}


def test_bundled_library_complete():
    names = set(bundled_scenarios())
    for n in ("standing_wave", "damped_standing_wave", "constant_speed_peel", "threshold_stationary",
              "sqrt_toughness", "pointwise_kappa", "forced_peel", "time_dependent_kappa"):
        assert n in names


def test_load_bundled_scenarios():
    sw = load_scenario(SCENARIO_DIR / "standing_wave.scn")
    assert sw.mode == "prescribed" and sw.nu == 0.0
    sq = load_scenario(SCENARIO_DIR / "sqrt_toughness.scn")
    assert sq.mode == "coupled" and sq.toughness_model().kind == "sqrt_example"


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ScenarioError, match=r":3: unknown key 'colour'"):
        parse_scenario_text("name = a\nmode = coupled\ncolour = red\n")
    with pytest.raises(ScenarioError, match=r":2: nu: expected a number"):
        parse_scenario_text("name = a\nnu = fast\nmode = prescribed\n")
    with pytest.raises(ScenarioError, match=r"unknown section"):
        parse_scenario_text("name = a\nmode = prescribed\n[extras]\n")


def test_nonpositive_length_rejected():
    with pytest.raises(ScenarioError, match="ℓ₀ must be positive"):
        parse_scenario_text("name = a\nmode = prescribed\nell0 = 0\n")


def test_defaults_are_echoed():
    sc = parse_scenario_text("name = a\nmode = prescribed\n")
    text = sc.as_text()
    assert "delta = 0.001" in text and "picard = 1e-10" in text
    again = parse_scenario_text(text)
    assert again.as_text() == text


def test_csv_format(tmp_path):
    p = write_csv(tmp_path / "x.csv", {"a": [0.1, 1 / 3], "b": [0.0, -2.5e-20]})
    raw = p.read_bytes()
    assert b"\r" not in raw
    assert raw.splitlines()[1] == b"0.10000000000000001,0"
    assert float(format_number(1 / 3)) == 1 / 3


def test_run_constant_speed_and_determinism(tmp_path):
    for sub in ("a", "b"):
        assert main(["run", "constant_speed_peel", "--out", str(tmp_path / sub)]) == 0
    front = _read(tmp_path / "a" / "front.csv")
    assert np.max(np.abs(front["ell_dot"] - 0.6)) < 1e-3
    for name in ("front.csv", "energy.csv", "field_t0.5.csv"):
        assert filecmp.cmp(tmp_path / "a" / name, tmp_path / "b" / name, shallow=False)
    rep = json.loads((tmp_path / "a" / "report.json").read_text())
    assert rep["exit_code"] == 0 and rep["residuals"]["energy_balance_max"] < 2e-3
    assert (tmp_path / "a" / "plot.py").exists()
    # round trip: the solver's own front verifies
    assert main(["verify", "constant_speed_peel", "--front", str(tmp_path / "a" / "front.csv"),
                 "--out", str(tmp_path / "v")]) == 0


def test_zero_data_coupled_run(tmp_path):
    scn = tmp_path / "zero.scn"
    scn.write_text("name = zero\nmode = coupled\nhorizon = 0.2\ndelta = 2e-3\n"
                   "[toughness]\nmodel = constant\nvalue = 0.5\n")
    assert main(["run", str(scn), "--out", str(tmp_path / "o")]) == 0
    assert np.all(_read(tmp_path / "o" / "front.csv")["ell"] == 1.0)


def test_nonexistence_exit_code(tmp_path, capsys):
    assert main(["run", "pointwise_kappa", "--out", str(tmp_path)]) == 3
    err = capsys.readouterr().err
    assert "no Lipschitz solution" in err
    assert json.loads((tmp_path / "report.json").read_text())["status"] == "non-existence"


def test_validation_exit_code(tmp_path):
    scn = tmp_path / "bad.scn"
    scn.write_text("name = bad\nmode = prescribed\nell0 = -1\n")
    assert main(["run", str(scn)]) == 4


def test_verify_candidates(tmp_path):
    assert main(["verify", "sqrt_toughness", "--front", "front_quadratic.csv", "--out", str(tmp_path / "q")]) == 0
    assert main(["verify", "sqrt_toughness", "--front", "front_stationary.csv", "--out", str(tmp_path / "s")]) == 0
    assert main(["verify", "sqrt_toughness", "--front", "front_sonic.csv", "--out", str(tmp_path / "n")]) != 0
    assert main(["verify", "sqrt_toughness", "--front", "front_identity.csv", "--out", str(tmp_path / "i")]) != 0


def test_batch_and_convergence(tmp_path):
    src = tmp_path / "scn"
    src.mkdir()
    for n in ("standing_wave", "threshold_stationary"):
        text = (SCENARIO_DIR / f"{n}.scn").read_text().replace("horizon = 0.5", "horizon = 0.2")
        (src / f"{n}.scn").write_text(text.replace("snapshots = 0.25, 0.5", "snapshots = 0.2"))
    assert main(["batch", str(src), "--jobs", "2", "--out", str(tmp_path / "out"), "--delta", "2e-3"]) == 0
    assert (tmp_path / "out" / "standing_wave" / "energy.csv").exists()
    assert main(["convergence", str(src / "standing_wave.scn"), "--levels", "2", "--delta", "4e-3",
                 "--out", str(tmp_path / "conv")]) == 0
    rows = _read(tmp_path / "conv" / "convergence.csv")
    assert rows["delta"].tolist() == [4e-3, 2e-3]


def test_oracle_mode(tmp_path):
    assert main(["run", "moving_front_oracle", "--delta", "2e-3", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["l2_max"] < 5e-3
