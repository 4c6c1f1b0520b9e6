import json

import numpy as np
import pytest

from skelgan.cli import main
from skelgan.ntu import random_skeleton, write_ntu_skeleton

TINY_TRAIN = ["--max-steps", "6", "--batch-size", "8", "--latent-dim", "4", "--z-dim", "5",
              "--length", "12", "--window", "4", "--lr", "1e-3"]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data = root / "synth.json"
    assert main(["synth", "--per-class", "10", "--length", "12", "--seed", "7", "--out", str(data)]) == 0
    assert main(["train", "--data", str(data), "--out-dir", str(root / "run"), *TINY_TRAIN]) == 0
    return root, data, root / "run" / "final.ckpt"


def test_synth_is_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    args = ["synth", "--classes", "3", "--per-class", "300", "--seed", "7"]
    assert main([*args, "--out", str(a), "--csv", str(tmp_path / "a.csv")]) == 0
    assert main([*args, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.csv").read_text().count("\n") == 1 + 900 * 32


def test_train_outputs(workspace, capsys):
    root, _, ckpt = workspace
    assert ckpt.exists()
    assert len((root / "run" / "metrics.jsonl").read_text().splitlines()) == 6


def test_generate_json(workspace, tmp_path):
    _, _, ckpt = workspace
    out = tmp_path / "g.json"
    assert main(["generate", "--checkpoint", str(ckpt), "--label", "2", "--seed", "1", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert len(doc["sequences"]) == 1
    assert len(doc["sequences"][0]["frames"]) == 12
    assert doc["sequences"][0]["label"] == 2
    again = tmp_path / "g2.json"
    main(["generate", "--checkpoint", str(ckpt), "--label", "2", "--seed", "1", "--out", str(again)])
    assert out.read_bytes() == again.read_bytes()


def test_generate_from_dataset_start(workspace, capsys):
    _, data, ckpt = workspace
    assert main(["generate", "--checkpoint", str(ckpt), "--label", "0", "--data", str(data), "--index", "4"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert len(doc["sequences"][0]["frames"][0]) == 10


def test_chain(workspace, capsys):
    _, _, ckpt = workspace
    assert main(["chain", "--checkpoint", str(ckpt), "--labels", "0,2,1", "--seed", "3"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert [s["label"] for s in doc["sequences"]] == [0, 2, 1]


def test_eval_report(workspace, tmp_path):
    _, data, ckpt = workspace
    out = tmp_path / "r.json"
    assert main(["eval", "--checkpoint", str(ckpt), "--data", str(data), "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert report["schema_version"] == 1
    for key in ("recon_ratio", "conditional_accuracy", "diversity_ratio", "start_region_rate",
                "initial_pose_rate", "chain_rate", "median_jerk"):
        assert np.isfinite(report[key])


def test_plot(workspace, tmp_path):
    _, data, ckpt = workspace
    svg, csv = tmp_path / "p.svg", tmp_path / "p.csv"
    assert main(["plot", "--checkpoint", str(ckpt), "--data", str(data), "--draws", "3",
                 "--svg", str(svg), "--csv", str(csv)]) == 0
    text = svg.read_text()
    assert text.startswith("<svg") and text.count("<polyline") == 3 and "<polygon" in text
    assert len(csv.read_text().splitlines()) == 1 + 3 * 12


def test_import_ntu(tmp_path):
    paths = []
    for i, name in enumerate(["S001C001P001R001A003.skeleton", "S001C001P001R001A010.skeleton"]):
        p = tmp_path / name
        p.write_text(write_ntu_skeleton(random_skeleton(np.random.default_rng(i), 5)))
        paths.append(str(p))
    out = tmp_path / "ntu.json"
    assert main(["import-ntu", *paths, "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert [s["label"] for s in doc["sequences"]] == [2, 9]
    assert doc["joints"] == 25 and doc["dims"] == 3


def test_import_ntu_reports_bad_line(tmp_path, capsys):
    p = tmp_path / "A001.skeleton"
    p.write_text("3\n1\n")
    assert main(["import-ntu", str(p), "--out", str(tmp_path / "x.json")]) == 1
    assert "line 3" in capsys.readouterr().err


def test_config_file_and_env(workspace, tmp_path, monkeypatch):
    _, _, ckpt = workspace
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 1, "generate": {"checkpoint": str(ckpt), "label": 2}}))
    a, b, c = tmp_path / "a.json", tmp_path / "b.json", tmp_path / "c.json"
    assert main(["--config", str(cfg), "generate", "--out", str(a)]) == 0
    assert main(["generate", "--checkpoint", str(ckpt), "--label", "2", "--seed", "1", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    monkeypatch.setenv("SKELGAN_CONFIG", str(cfg))
    assert main(["generate", "--label", "1", "--out", str(c)]) == 0
    assert json.loads(c.read_text())["sequences"][0]["label"] == 1


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["nope"],
        ["synth", "--per-class", "abc"],
        ["synth"],
        ["generate", "--label", "1"],
        ["chain", "--checkpoint", "x", "--labels", "a,b"],
    ],
)
def test_usage_errors_exit_2(argv):
    assert main(argv) == 2


def test_unknown_config_key_is_usage_error(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"synth": {"colour": 3}}))
    assert main(["--config", str(cfg), "synth", "--out", str(tmp_path / "x.json")]) == 2


def test_runtime_errors_exit_1(tmp_path, workspace):
    _, _, ckpt = workspace
    assert main(["generate", "--checkpoint", str(tmp_path / "missing.ckpt"), "--label", "0"]) == 1
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"garbage")
    assert main(["generate", "--checkpoint", str(bad), "--label", "0"]) == 1
    assert main(["generate", "--checkpoint", str(ckpt), "--label", "7"]) == 1


def test_help_lists_subcommands(capsys):
    assert main(["--help"]) == 0
    out = capsys.readouterr().out
    for cmd in ("synth", "import-ntu", "train", "generate", "chain", "eval", "plot"):
        assert cmd in out
