import json

import pytest

from thermoengines.cli import main


def test_no_subcommand_is_usage_error(capsys):
    assert main([]) == 2


def test_unknown_flag_is_usage_error():
    assert main(["explore", "--bogus"]) == 2


def test_missing_temperatures_is_usage_error():
    assert main(["explore", "--engine", "to"]) == 2


def test_bad_engine_is_exit_2():
    assert main(["explore", "--engine", "nope", "--exp-beta-c", "0.2", "--exp-beta-h", "0.6"]) == 2


def test_out_of_range_temperature_is_exit_2():
    assert main(["explore", "--exp-beta-c", "1.5", "--exp-beta-h", "0.6"]) == 2


def test_missing_input_file_is_io_error(tmp_path):
    assert main(["metrics", "--input", str(tmp_path / "none.csv")]) == 1


def test_explore_json(tmp_path):
    out = tmp_path / "e.json"
    assert main(["explore", "--engine", "separate", "--exp-beta-c", "0.2", "--exp-beta-h", "0.6",
                 "--iters", "30", "--traces", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["engine"] == "separate" and len(doc["traces"]) == len(doc["extreme_points"])


def test_metrics_state(capsys):
    assert main(["metrics", "--state", "0,0.75,0.25,0", "--metric", "max_negativity"]) == 0
    assert "0.25" in capsys.readouterr().out


def test_config_file_fills_defaults(tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text('[explore]\nengine = "separate"\niters = 10\nexp-beta-c = 0.3\nexp-beta-h = 0.5\n')
    out = tmp_path / "o.json"
    assert main(["explore", "--config", str(cfg), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["iterations"] <= 10
    bad = tmp_path / "b.json"
    bad.write_text('{"explore": {"nonsense": 1}}')
    assert main(["explore", "--config", str(bad)]) == 2


def test_sweep_and_edges(tmp_path):
    csv_path = tmp_path / "s.csv"
    assert main(["sweep", "--engine", "separate", "--grid", "4", "--iters", "10", "--metrics", "P_E",
                 "--out", str(csv_path)]) == 0
    out = tmp_path / "edges.json"
    assert main(["edges", "--input", str(csv_path), "--metric", "P_E", "--edge-grid", "32", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["critical_exp_betas"]) == 3 and "stand-in" in doc["threshold_note"]
    assert main(["sweep", "--engine", "separate"]) == 2


def test_tree_states_command(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["tree-states", "--engine", "ltocc2", "--grid", "3", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 10


def test_metric_names_match_sweep_spelling(capsys):
    assert main(["metrics", "--state", "0.4,0.3,0.2,0.1", "--metric", "P_G", "--metric", "N_max"]) == 0
    assert "max_negativity" in capsys.readouterr().out
