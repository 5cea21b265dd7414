import csv
import io
import json

import pytest

from mrvflab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_csv(capsys):
    code, out, _ = run(capsys, "analyze", "--scheme", "wqmix", "--corpus", "table2_qjt",
                       "--alpha", "0.1", "--format", "csv")
    rows = {r["action"]: r for r in csv.DictReader(io.StringIO(out))}
    assert code == 0 and rows["0,0"]["class"] == "Unstable"


def test_analyze_constant_payoff_file(capsys, tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"action_counts": [2, 2], "values": [1, 1, 1, 1]}))
    code, out, _ = run(capsys, "analyze", "--scheme", "idealqmix", "--payoff", str(path))
    assert code == 0 and {r["classification"] for r in json.loads(out)} == {"Strong"}


def test_trace_step_limit_and_manifest(capsys, tmp_path):
    out = tmp_path / "t.json"
    code, _, _ = run(capsys, "trace", "--scheme", "idealqmix", "--corpus", "table6_qjt",
                     "--start", "0,0", "--max-steps", "1", "--out", str(out))
    data = json.loads(out.read_text())
    man = json.loads((tmp_path / "t.json.manifest.json").read_text())
    assert code == 0 and data["step_limit_hit"] and man["command"] == "trace"
    assert man["outputs"] == [str(out)]


def test_trace_from_stable_point(capsys):
    code, out, _ = run(capsys, "trace", "--scheme", "idealqmix", "--corpus", "table6_qjt", "--start", "2,2")
    assert code == 0 and json.loads(out)["path"] == [[2, 2], [2, 2]]


def test_mrvf_plan(capsys):
    code, out, _ = run(capsys, "mrvf", "plan", "--corpus", "table6_qjt", "--rounds", "3")
    d = json.loads(out)
    assert code == 0 and d["output"] == [0, 0] and d["termination_round"] == 3


def test_mrvf_train_writes_log(capsys, monkeypatch, tmp_path):
    monkeypatch.setenv("MRVFLAB_OUT", str(tmp_path))
    code, _, _ = run(capsys, "mrvf", "train", "--game", "riskreward", "--agents", "2", "--actions", "3",
                     "--seed", "7", "--steps", "2000")
    rows = list(csv.DictReader(open(tmp_path / "mrvf_train.csv")))
    assert code == 0 and "eval_return" in rows[-1]


def test_gen_round_trip(capsys, tmp_path):
    path = tmp_path / "g.json"
    assert run(capsys, "gen", "riskreward", "--actions", "4", "--seed", "2", "--out", str(path))[0] == 0
    code, out, _ = run(capsys, "mrvf", "plan", "--payoff", str(path), "--rounds", "4")
    assert code == 0 and len(json.loads(out)["output"]) == 2


def test_reproduce_single_table(capsys):
    code, _, err = run(capsys, "reproduce", "table6")
    assert code == 0 and err.count("PASS") == 2


def test_exit_codes(capsys):
    assert run(capsys, "analyze", "--scheme", "qplex", "--corpus", "table8_qjt", "--require-complete")[0] == 3
    assert run(capsys, "analyze", "--scheme", "idealqmix", "--corpus", "missing")[0] == 2
    assert run(capsys, "trace", "--scheme", "idealqmix", "--corpus", "table6_qjt", "--start", "9,9")[0] == 2
    assert run(capsys, "reproduce", "table99")[0] == 2
    with pytest.raises(SystemExit) as e:
        main(["analyze"])
    assert e.value.code == 2


def test_gen_pp_env_trajectory(capsys):
    code, out, _ = run(capsys, "gen", "pp-env", "--episodes", "3", "--seed", "1")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0 and {r["episode"] for r in rows} == {"0", "1", "2"}
    assert run(capsys, "gen", "pp-env", "--episodes", "3", "--seed", "1")[1] == out
