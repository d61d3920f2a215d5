import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from mfg_imitation import PolicySequence, build_attractor, dump_game
from mfg_imitation.cli import OUTPUT_DIR_ENV, build_parser, cmd_selfcheck, main
from mfg_imitation.experiments import random_tabular_game


def test_sweep_writes_csv(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--alphas", "0,0.5,1", "--lipschitz", "1", "--horizons", "3", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [float(r["alpha"]) for r in rows] == [0.0, 0.5, 1.0]
    assert float(rows[1]["eps_mfc_max"]) == pytest.approx(1.875)


def test_sweep_json_under_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path))
    assert main(["sweep", "--alphas", "0.5", "--lipschitz", "0.1", "--horizons", "4", "--format", "json",
                 "--out", "x.json"]) == 0
    assert json.loads((tmp_path / "x.json").read_text())[0]["H"] == 4


def test_invalid_input_exit_code(tmp_path):
    assert main(["sweep", "--alphas", "2", "--out", str(tmp_path / "a.csv")]) == 1
    assert main(["sweep", "--alphas", "abc"]) == 1
    assert main(["sweep", "--alphas", "0", "--out", str(tmp_path / "no" / "a.csv")]) == 1
    assert main(["nonsense"]) == 1


def test_verify_bounds(tmp_path):
    out = tmp_path / "b.csv"
    code = main(["verify-bounds", "--alphas", "0,0.5,1", "--lipschitz", "2", "--horizons", "3",
                 "--tabular-games", "5", "--out", str(out)])
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert {r["source"] for r in rows} == {"attractor", "tabular"}
    assert all(r["satisfied"] == "True" for r in rows)


def test_adversarial_attractor_mfc(tmp_path):
    game = tmp_path / "a.json"
    dump_game(build_attractor(2.0, 25), game)
    out = tmp_path / "t.json"
    assert main(["adversarial", "--game", str(game), "--mode", "mfc", "--out", str(out)]) == 0
    trace = json.loads(out.read_text())
    assert trace["final_params"] == 0.0 and trace["final_objective"] == 0.0


def test_adversarial_attractor_vanilla_from_expert(tmp_path):
    game = tmp_path / "a.json"
    dump_game(build_attractor(1.0, 3), game)
    out = tmp_path / "t.json"
    assert main(["adversarial", "--game", str(game), "--mode", "vanilla", "--init", "expert", "--out", str(out)]) == 0
    trace = json.loads(out.read_text())
    assert len(trace["iterations"]) == 1 and trace["final_objective"] == 0.0


def test_adversarial_needs_expert_for_general_games(tmp_path):
    game = tmp_path / "g.json"
    mfg = random_tabular_game(np.random.default_rng(0))
    dump_game(mfg, game)
    assert main(["adversarial", "--game", str(game), "--out", str(tmp_path / "t.json")]) == 1
    dump_game(mfg, game, PolicySequence.uniform(*mfg.shape))
    assert main(["adversarial", "--game", str(game), "--mode", "vanilla", "--out", str(tmp_path / "t.json")]) == 0


def test_selfcheck_negative_control(broken_builder, capsys):
    args = build_parser().parse_args(["selfcheck"])
    assert cmd_selfcheck(args, broken_builder) == 2
    assert "FAIL" in capsys.readouterr().out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "mfg_imitation", "selfcheck"], capture_output=True, text=True)
    assert res.returncode == 0, res.stdout + res.stderr
    assert res.stdout.count("[PASS]") == 4
