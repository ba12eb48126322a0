import json
import subprocess
import sys

import numpy as np
import pytest

from graphunlearn.cli import main

BASE_CONFIG = {
    "datagen.n": 160, "datagen.classes": 3, "datagen.p_in": 0.08,
    "datagen.p_out": 0.02, "datagen.features": 8,
    "propagation.k": 1, "propagation.scheme": "s2gc",
    "model.mode": "linear", "train.epochs": 30,
    "nim.theta": 0.0, "nim.budget_multiplier": 1.0,
    "unlearn.epochs": 5, "unlearn.lambda": 0.5,
    "seed": 0,
}


def write_config(tmp_path, overrides=None, name="cfg.json"):
    doc = dict(BASE_CONFIG)
    if overrides:
        doc.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def run(command, cfg, out, seed=None, seeds=None):
    argv = [command, "--config", cfg, "--out", str(out)]
    if seed is not None:
        argv += ["--seed", str(seed)]
    if seeds is not None:
        argv += ["--seeds", seeds]
    return main(argv)


def read_metrics(path):
    return [json.loads(l) for l in path.read_text(encoding="utf-8").splitlines()]


def test_gen_writes_dataset_and_is_deterministic(tmp_path):
    cfg = write_config(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("gen", cfg, a, seed=3) == 0
    assert run("gen", cfg, b, seed=3) == 0
    names = ["edges.tsv", "features.gufm", "labels.tsv", "train_mask.txt",
             "test_mask.txt", "request.json", "resolved_config.json"]
    for name in names:
        assert (a / name).exists()
        assert (a / name).read_bytes() == (b / name).read_bytes()
    resolved = json.loads((a / "resolved_config.json").read_text())
    assert resolved["datagen.n"] == 160
    assert resolved["propagation.k"] == 1


def test_train_metrics_shard_content_and_rerun_identity(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    assert run("gen", cfg, out) == 0
    assert run("train", cfg, out) == 0
    assert (out / "checkpoint.guwt").exists()
    shard = out / "metrics_train.jsonl"
    first = shard.read_bytes()
    rows = read_metrics(shard)
    assert {r["metric"] for r in rows} == {"train_f1", "test_f1", "final_loss"}
    assert all(set(r) == {"run_id", "seed", "stage", "metric", "value"}
               for r in rows)
    assert all(r["stage"] == "train" and r["seed"] == 0 for r in rows)
    assert run("train", cfg, out) == 0
    assert shard.read_bytes() == first


def full_chain(tmp_path, overrides=None, seed=0):
    cfg = write_config(tmp_path, overrides)
    out = tmp_path / "run"
    for command in ("gen", "train", "unlearn", "retrain", "attack"):
        assert run(command, cfg, out, seed=seed) == 0
    return cfg, out


def test_unlearn_artifacts(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    run("gen", cfg, out)
    run("train", cfg, out)
    assert run("unlearn", cfg, out) == 0
    assert (out / "checkpoint_unlearned.guwt").exists()
    hie = (out / "hie.csv").read_text(encoding="utf-8").splitlines()
    assert hie[0] == "node,score,round"
    assert len(hie) > 1
    log = [json.loads(l) for l in
           (out / "finetune_log.jsonl").read_text().splitlines()]
    assert len(log) == 5
    assert set(log[0]) == {"epoch", "total", "label", "prototype",
                           "contrastive", "l2", "kl"}
    rows = {r["metric"]: r["value"] for r in read_metrics(out / "metrics_unlearn.jsonl")}
    request = json.loads((out / "request.json").read_text())
    assert rows["num_ue"] == len(request["nodes"])
    assert rows["num_hie"] > 0


def test_unlearn_khop_selection_writes_no_influence_table(tmp_path):
    cfg = write_config(tmp_path, {"nim.method": "khop"})
    out = tmp_path / "run"
    run("gen", cfg, out)
    run("train", cfg, out)
    assert run("unlearn", cfg, out) == 0
    assert not (out / "hie.csv").exists()


def test_attack_mia_covers_all_present_checkpoints(tmp_path):
    cfg, out = full_chain(tmp_path)
    doc = json.loads((out / "attack_mia.json").read_text())
    assert set(doc) == {"original", "unlearned", "retrain"}
    for report in doc.values():
        assert 0.0 <= report["auc"] <= 1.0
        assert report["member_count"] == report["non_member_count"]
    rows = {r["metric"] for r in read_metrics(out / "metrics_attack.jsonl")}
    assert rows == {"mia_auc_original", "mia_auc_unlearned", "mia_auc_retrain"}


def test_attack_edge_and_plot_series(tmp_path):
    overrides = {
        "datagen.n": 200, "datagen.classes": 2, "datagen.p_in": 0.04,
        "datagen.p_out": 0.01, "datagen.separation": 2.5,
        "eval.attack": "edge", "eval.rho": [0.05],
    }
    cfg = write_config(tmp_path, overrides)
    out = tmp_path / "run"
    run("gen", cfg, out)
    assert run("attack", cfg, out) == 0
    doc = json.loads((out / "attack_edge.json").read_text())
    assert len(doc) == 1 and doc[0]["rho"] == 0.05
    rows = {r["metric"] for r in read_metrics(out / "metrics_attack.jsonl")}
    assert rows == {"edge_f1_clean_rho0.05", "edge_f1_poisoned_rho0.05",
                    "edge_f1_unlearned_rho0.05"}
    assert run("report", cfg, out) == 0
    plot = (out / "plot_edge_f1.csv").read_text().splitlines()
    assert plot[0] == "x,y"
    assert plot[1].startswith("0.05,")


def test_report_aggregates_seed_shards(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    for seed in (0, 1):
        sub = out / f"seed_{seed}"
        run("gen", cfg, sub, seed=seed)
        run("train", cfg, sub, seed=seed)
    assert run("report", cfg, out) == 0

    merged = read_metrics(out / "metrics.jsonl")
    assert sorted({r["seed"] for r in merged}) == [0, 1]
    vals = [r["value"] for r in merged if r["metric"] == "test_f1"]
    report = (out / "report.csv").read_text().splitlines()
    assert report[0] == "stage,metric,mean,std,count"
    line = next(l for l in report if l.startswith("train,test_f1,"))
    _, _, mean, _, count = line.split(",")
    assert float(mean) == pytest.approx(np.mean(vals), abs=1e-15)
    assert int(count) == 2


def test_report_mia_plot_series(tmp_path):
    cfg, out = full_chain(tmp_path)
    assert run("report", cfg, out) == 0
    plot = (out / "plot_mia_auc.csv").read_text().splitlines()
    assert plot[0] == "x,y"
    assert [l.split(",")[0] for l in plot[1:]] == ["original", "unlearned", "retrain"]


def test_seeds_fan_out(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    assert run("gen", cfg, out, seeds="0..2") == 0
    assert run("train", cfg, out, seeds="0..2") == 0
    for s in (0, 1, 2):
        assert (out / f"seed_{s}" / "checkpoint.guwt").exists()
    merged = read_metrics(out / "metrics.jsonl")
    assert [r["seed"] for r in merged] == [0, 0, 0, 1, 1, 1, 2, 2, 2]


def test_full_chain_is_byte_reproducible(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    cfg_a, out_a = full_chain(tmp_path / "a")
    cfg_b, out_b = full_chain(tmp_path / "b")
    run("report", cfg_a, out_a)
    run("report", cfg_b, out_b)
    for name in ("metrics.jsonl", "report.csv", "attack_mia.json",
                 "plot_mia_auc.csv", "checkpoint_unlearned.guwt"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_unknown_config_key_fails_with_error_line(tmp_path, capsys):
    cfg = write_config(tmp_path, {"nim.thetaa": 0.4})
    assert run("gen", cfg, tmp_path / "run") == 1
    err = capsys.readouterr().err
    assert err.startswith("error=ConfigError")
    assert "nim.thetaa" in err


def test_bad_seed_range_and_missing_dataset(tmp_path, capsys):
    cfg = write_config(tmp_path)
    assert run("train", cfg, tmp_path / "run", seeds="5..2") == 1
    assert capsys.readouterr().err.startswith("error=ConfigError")
    assert run("train", cfg, tmp_path / "empty") == 1
    assert capsys.readouterr().err.startswith("error=IoError")


def test_console_entry_point_smoke(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "run"
    proc = subprocess.run(
        [sys.executable, "-m", "graphunlearn.cli", "gen",
         "--config", cfg, "--out", str(out)],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "edges.tsv").exists()
