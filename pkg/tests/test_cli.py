import csv
import json
import os
import subprocess
import sys

import pytest

from agentimp.cli import main
from agentimp.model import ModelConfig, init_params, load_params, save_params


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert run("gen", "--num-scenes", 200, "--seed", 3, "--out", d / "s.jsonl") == 0
    assert run("gen", "--num-scenes", 5, "--seed", 4, "--out", d / "tiny.jsonl") == 0
    assert run("train", "--data", d / "tiny.jsonl", "--epochs", 3, "--width", 16, "--out", d / "w.json") == 0
    return d


def test_gen_lines_and_determinism(tmp_path):
    for name in ("a", "b"):
        assert run("gen", "--num-scenes", 10, "--seed", 1, "--out", tmp_path / f"{name}.jsonl") == 0
    a = (tmp_path / "a.jsonl").read_bytes()
    assert a == (tmp_path / "b.jsonl").read_bytes()
    assert len(a.decode().strip().splitlines()) == 10
    cfg = json.loads((tmp_path / "a.jsonl.config.json").read_text())
    assert cfg["command"] == "gen" and cfg["resolved"]["num_scenes"] == 10


def test_gen_usage_errors(tmp_path):
    assert run("gen", "--num-scenes", 10) == 1
    assert run("gen", "--num-scenes", 0, "--out", tmp_path / "x.jsonl") == 1
    assert run("gen", "--mix", "bogus=1", "--out", tmp_path / "x.jsonl") == 1
    assert run("nonsense") == 1
    assert run() == 1


def test_gen_unwritable_path(tmp_path):
    assert run("gen", "--num-scenes", 2, "--out", tmp_path / "missing" / "x.jsonl") == 2


def test_train_outputs(workdir, capsys):
    capsys.readouterr()
    out = workdir / "w2.json"
    assert run("train", "--data", workdir / "tiny.jsonl", "--epochs", 3, "--width", 16, "--out", out) == 0
    printed = [l for l in capsys.readouterr().out.splitlines() if l.startswith("epoch")]
    assert len(printed) == 3
    rows = list(csv.DictReader(open(str(out) + ".loss.csv")))
    assert [int(r["epoch"]) for r in rows] == [1, 2, 3]
    assert load_params(out).equal(load_params(workdir / "w.json"))


def test_train_validation(workdir):
    assert run("train", "--data", workdir / "tiny.jsonl", "--layers", 0, "--out", workdir / "x.json") == 1
    assert run("train", "--data", workdir / "tiny.jsonl", "--lr", -1, "--out", workdir / "x.json") == 1
    assert run("train", "--data", workdir / "tiny.jsonl", "--layer-kind", "rnn", "--out", workdir / "x.json") == 1
    assert run("train", "--data", workdir / "nope.jsonl", "--out", workdir / "x.json") == 2


def test_train_resume_continues(workdir):
    base = [float(r["loss"]) for r in csv.DictReader(open(str(workdir / "w.json") + ".loss.csv"))]
    out = workdir / "resumed.json"
    assert run("train", "--data", workdir / "tiny.jsonl", "--epochs", 2, "--init", workdir / "w.json", "--out", out) == 0
    resumed = [float(r["loss"]) for r in csv.DictReader(open(str(out) + ".loss.csv"))]
    assert resumed[0] < base[0]
    assert resumed[0] < 1.5 * base[-1]
    assert run("train", "--data", workdir / "tiny.jsonl", "--init", workdir / "w.json", "--layer-kind", "transformer", "--out", out) == 1


def test_train_corrupt_scene_file(tmp_path):
    (tmp_path / "bad.jsonl").write_text('{"schema": 1, "scene_id": 3}\n')
    assert run("train", "--data", tmp_path / "bad.jsonl", "--out", tmp_path / "w.json") == 2


def test_train_nan_loss_exit_code(workdir, tmp_path):
    p = init_params(ModelConfig(width=16, pair_hidden=16, encoder_hidden=16, decoder_hidden=16), 0)
    p.tensors["dec.w1"][:] = 1e200
    save_params(p, tmp_path / "bad.json")
    assert run("train", "--data", workdir / "tiny.jsonl", "--epochs", 1, "--init", tmp_path / "bad.json", "--out", tmp_path / "w.json") == 3


def test_eval_report_files(workdir):
    rep = workdir / "rep"
    assert run("eval", "--model", workdir / "w.json", "--data", workdir / "s.jsonl", "--report-dir", rep) == 0
    for name in ("table1.csv", "table2.csv", "table3.csv", "fig1_hist.csv", "summary.json", "config.json"):
        assert (rep / name).is_file(), name
    t1 = list(csv.DictReader(open(rep / "table1.csv")))
    assert [r["k"] for r in t1] == ["1", "2", "3", "all"]
    t3 = list(csv.DictReader(open(rep / "table3.csv")))
    assert [r["aggregation"] for r in t3] == ["max", "mean", "last"]


def test_eval_agg_modes_comparable(workdir):
    rows = {}
    for mode in ("max", "mean", "last"):
        rep = workdir / f"rep_{mode}"
        assert run("eval", "--model", workdir / "w.json", "--data", workdir / "s.jsonl", "--ks", "1", "--agg", mode, "--report-dir", rep) == 0
        rows[mode] = list(csv.DictReader(open(rep / "table1.csv")))[0]
        t3 = {r["aggregation"]: r for r in csv.DictReader(open(rep / "table3.csv"))}
        assert t3[mode]["traj_pearson"] == rows[mode]["traj_pearson"]
    assert {r["n"] for r in rows.values()} == {"200"}


def test_eval_errors(workdir, tmp_path):
    (tmp_path / "empty.jsonl").write_text("")
    assert run("eval", "--model", workdir / "w.json", "--data", tmp_path / "empty.jsonl", "--report-dir", tmp_path / "r") == 2
    assert run("eval", "--model", workdir / "w.json", "--data", workdir / "s.jsonl", "--ks", "0", "--report-dir", tmp_path / "r") == 1
    # weights expecting a different history length than the scene file provides
    save_params(init_params(ModelConfig(history_len=11), 0), tmp_path / "h11.json")
    assert run("eval", "--model", tmp_path / "h11.json", "--data", workdir / "s.jsonl", "--report-dir", tmp_path / "r") == 2


def test_heatmap_default(workdir):
    out = workdir / "hm.csv"
    assert run("heatmap", "--model", workdir / "w.json", "--data", workdir / "s.jsonl", "--out", out) == 0
    rows = list(csv.reader(open(out)))
    assert rows[0][1] == "-60.0" and rows[0][-1] == "56.0"
    assert rows[1][0] == "56.0" and rows[-1][0] == "-60.0"
    assert len(rows) == 31 and all(len(r) == 31 for r in rows)
    side = json.loads(open(str(out) + ".json").read())
    assert 0.0 <= side["front_fraction"] <= 1.0


def test_heatmap_validation_and_overflow(workdir):
    assert run("heatmap", "--model", workdir / "w.json", "--data", workdir / "s.jsonl", "--cell", 0, "--out", workdir / "h0.csv") == 1
    out = workdir / "h4.csv"
    assert run("heatmap", "--model", workdir / "w.json", "--data", workdir / "s.jsonl", "--extent", 4, "--out", out) == 0
    side = json.loads(open(str(out) + ".json").read())
    assert side["overflow_count"] > 0 and side["overflow_mass"] > 0


def test_config_sidecar_reruns_identically(workdir, tmp_path):
    cfg = json.loads(open(str(workdir / "w.json") + ".config.json").read())
    a = cfg["args"]
    argv = ["train", "--data", a["data"], "--epochs", a["epochs"], "--lr", a["lr"], "--seed", a["seed"],
            "--width", a["width"], "--batch", a["batch"], "--out", tmp_path / "again.json"]
    assert run(*argv) == 0
    assert (tmp_path / "again.json").read_bytes() == (workdir / "w.json").read_bytes()


def test_module_entry_and_log_level(workdir, tmp_path):
    env = dict(os.environ, AGENTIMP_LOG_LEVEL="ERROR")
    p = subprocess.run([sys.executable, "-m", "agentimp", "gen", "--num-scenes", "2", "--out", str(tmp_path / "q.jsonl")],
                       env=env, capture_output=True, text=True)
    assert p.returncode == 0 and p.stderr == ""
    env["AGENTIMP_LOG_LEVEL"] = "INFO"
    p = subprocess.run([sys.executable, "-m", "agentimp", "gen", "--num-scenes", "2", "--out", str(tmp_path / "q.jsonl")],
                       env=env, capture_output=True, text=True)
    assert p.returncode == 0 and "wrote 2 scenes" in p.stderr
