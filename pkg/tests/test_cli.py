import json
import math
import subprocess
import sys

import numpy as np
import pytest

from protoclf.data import load_dataset


def run_cli(*args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "protoclf", *[str(a) for a in args]],
        capture_output=True,
        text=True,
        cwd=cwd,
    )


def gen_args(out, n=200, noise=0.3, extra=()):
    return [
        "--seed", 7, "gen", "--out", out, "--classes", 3, "--n", n,
        "--dim", 16, "--noise", noise, *extra,
    ]


def snapshot(paths):
    return {p.name: p.read_bytes() for p in paths if p.is_file()}


def test_gen_output_passes_validation(tmp_path):
    out = tmp_path / "d"
    r = run_cli(*gen_args(out))
    assert r.returncode == 0, r.stderr
    ds = load_dataset(out)
    assert ds.n == 600 and ds.dim == 16 and ds.classes == 3
    assert (out / "resolved_config.json").is_file()


def test_gen_rejects_bad_noise(tmp_path):
    r = run_cli(*gen_args(tmp_path / "d", noise=1.5))
    assert r.returncode == 2
    assert "noise_rate" in r.stderr


def test_gen_byte_identical_rerun(tmp_path):
    out = tmp_path / "d"
    assert run_cli(*gen_args(out)).returncode == 0
    first = snapshot(out.iterdir())
    assert run_cli(*gen_args(out)).returncode == 0
    second = snapshot(out.iterdir())
    assert first.keys() == second.keys()
    for name in first:
        assert first[name] == second[name], name


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("data") / "d"
    assert run_cli(*gen_args(out)).returncode == 0
    return out


def test_select_budget_law(dataset_dir):
    r = run_cli("--seed", 7, "select", "--data", dataset_dir, "--preliminary-epochs", 2)
    assert r.returncode == 0, r.stderr
    protos = json.loads((dataset_dir / "prototypes.json").read_text())
    ds = load_dataset(dataset_dir)
    for c in range(3):
        n_c = int((ds.noisy_labels == c).sum())
        budget = max(1, int(math.floor(math.log2(n_c))))
        assert len(protos[str(c)]["difficult"]) == budget
        assert len(protos[str(c)]["anomaly"]) == budget
    sidecar = json.loads((dataset_dir / "selection_metrics.json").read_text())
    assert set(sidecar) == {"0", "1", "2"}
    assert len(sidecar["0"]["proximity"]) == len(sidecar["0"]["indices"])


def test_select_protos_per_class_override(dataset_dir, tmp_path):
    r = run_cli(
        "--seed", 7, "select", "--data", dataset_dir, "--out", tmp_path,
        "--preliminary-epochs", 2, "--protos-per-class", 1,
    )
    assert r.returncode == 0, r.stderr
    protos = json.loads((tmp_path / "prototypes.json").read_text())
    for c in range(3):
        assert len(protos[str(c)]["difficult"]) == 1
        assert len(protos[str(c)]["anomaly"]) == 1


def test_select_rerun_identical(dataset_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        r = run_cli("--seed", 7, "select", "--data", dataset_dir, "--out", out,
                    "--preliminary-epochs", 2)
        assert r.returncode == 0, r.stderr
    assert (a / "prototypes.json").read_bytes() == (b / "prototypes.json").read_bytes()
    assert (a / "selection_metrics.json").read_bytes() == (b / "selection_metrics.json").read_bytes()


def test_select_requires_logits_or_flag(dataset_dir):
    r = run_cli("--seed", 7, "select", "--data", dataset_dir)
    assert r.returncode == 2
    assert "preliminary" in r.stderr


def test_adjust_summary_and_accuracy(dataset_dir, tmp_path):
    protos = tmp_path / "protos"
    assert run_cli("--seed", 7, "select", "--data", dataset_dir, "--out", protos,
                   "--preliminary-epochs", 2).returncode == 0
    r = run_cli("--seed", 7, "adjust", "--data", dataset_dir,
                "--prototypes", protos / "prototypes.json", "--out", tmp_path / "adj.json")
    assert r.returncode == 0, r.stderr
    assert "adj_label_acc=" in r.stdout
    acc = float(r.stdout.split("adj_label_acc=")[1].split()[0])
    assert acc >= 0.90
    adj = json.loads((tmp_path / "adj.json").read_text())
    assert set(adj) == {"noisy", "clean", "changed"}
    assert len(adj["noisy"]) == 600


def test_adjust_noiseless_planted_fixed_point(tmp_path):
    out = tmp_path / "clean"
    assert run_cli(*gen_args(out, noise=0.0, extra=(
        "--anomaly-frac", "0", "--centroid-distance", "8",
    ))).returncode == 0
    assert run_cli("--seed", 7, "select", "--data", out, "--preliminary-epochs", 2).returncode == 0
    r = run_cli("--seed", 7, "adjust", "--data", out,
                "--prototypes", out / "prototypes.json")
    assert r.returncode == 0, r.stderr
    adj = json.loads((out / "labels_adjusted.json").read_text())
    assert not any(adj["changed"])


def test_adjust_missing_prototypes_exit_2(dataset_dir):
    r = run_cli("--seed", 7, "adjust", "--data", dataset_dir,
                "--prototypes", dataset_dir / "nope.json")
    assert r.returncode == 2


def test_train_eval_round_trip(dataset_dir, tmp_path):
    protos = dataset_dir / "prototypes.json"
    out = tmp_path / "run"
    r = run_cli("--seed", 7, "train", "--data", dataset_dir, "--prototypes", protos,
                "--out", out, "--alpha", 0.2, "--beta", 0.3, "--adjust", "--epochs", 5)
    assert r.returncode == 0, r.stderr
    assert (out / "head.json").is_file()
    trace = (out / "loss_trace.csv").read_text().splitlines()
    assert trace[0] == "epoch,total,ce,proto_c,proto_a"
    assert len(trace) == 6
    assert (out / "labels_adjusted.json").is_file()

    r = run_cli("--seed", 7, "eval", "--data", dataset_dir, "--head", out / "head.json",
                "--out", out / "metrics.json")
    assert r.returncode == 0, r.stderr
    assert "accuracy=" in r.stdout
    metrics = json.loads((out / "metrics.json").read_text())
    assert 0.0 <= metrics["accuracy"] <= 1.0
    assert np.asarray(metrics["confusion"]).shape == (3, 3)


def test_train_rejects_bad_weights(dataset_dir, tmp_path):
    r = run_cli("--seed", 7, "train", "--data", dataset_dir,
                "--prototypes", dataset_dir / "prototypes.json",
                "--out", tmp_path / "x", "--alpha", 0.6, "--beta", 0.5)
    assert r.returncode == 2
    assert "alpha + beta < 1" in r.stderr


def test_train_rerun_identical(dataset_dir, tmp_path):
    protos = dataset_dir / "prototypes.json"
    out = tmp_path / "run"
    args = ["--seed", 7, "train", "--data", dataset_dir, "--prototypes", protos,
            "--out", out, "--alpha", 0.1, "--beta", 0.2, "--epochs", 3]
    assert run_cli(*args).returncode == 0
    first = snapshot(out.iterdir())
    assert run_cli(*args).returncode == 0
    second = snapshot(out.iterdir())
    assert first.keys() == second.keys()
    for name in first:
        assert first[name] == second[name], name


def test_experiment_flagship(tmp_path):
    out = tmp_path / "exp"
    args = ["--seed", 0, "experiment", "--out", out, "--grid", "flagship",
            "--seeds", "0,1", "--n", 60, "--epochs", 5]
    r = run_cli(*args)
    assert r.returncode == 0, r.stderr
    lines = (out / "report.csv").read_text().splitlines()
    # header + 2 cells x 2 seeds x 2 splits
    assert len(lines) == 1 + 8
    assert run_cli(*args).returncode == 0
    assert snapshot(out.iterdir()) == {
        p.name: p.read_bytes() for p in out.iterdir() if p.is_file()
    }


def test_resolved_config_round_trips(tmp_path):
    out = tmp_path / "d"
    assert run_cli(*gen_args(out, n=20)).returncode == 0
    path = out / "resolved_config.json"
    resolved = json.loads(path.read_text())
    rewritten = json.dumps(resolved, sort_keys=True, indent=1) + "\n"
    assert rewritten == path.read_text()
    assert resolved["seed"] == 7 and resolved["n"] == 20


def test_config_file_defaults(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 30, "dim": 6, "classes": 2}))
    out = tmp_path / "d"
    r = run_cli("--seed", 1, "--config", cfg, "gen", "--out", out)
    assert r.returncode == 0, r.stderr
    ds = load_dataset(out)
    assert ds.n == 60 and ds.dim == 6 and ds.classes == 2
