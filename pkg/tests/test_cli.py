"""End-to-end runs of every subcommand plus the exit-code contract."""
import os

import numpy as np
import pytest

from sdrcnn import cli, raster

CFG_TEXT = """
bands = 3
width = 4
expansion = 2
scene_size = 16
scenes = 5
patch = 16
stride = 16
blur_size = 11
iterations = 2
batch_size = 8
val_every = 1
q_block = 32
q_shift = 32
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One simulate+train run shared by the command tests."""
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "run.cfg"
    cfg.write_text(CFG_TEXT, encoding="utf-8")
    data = root / "data"
    train_out = root / "train"
    assert cli.main(["simulate", "--config", str(cfg), "--out-dir", str(data)]) == 0
    assert cli.main(["train", "--config", str(cfg), "--data", str(data),
                     "--out-dir", str(train_out)]) == 0
    return {"root": root, "cfg": cfg, "data": data, "train": train_out}


def test_usage_errors_exit_1(capsys):
    assert cli.main([]) == 1
    assert cli.main(["frobnicate"]) == 1
    assert cli.main(["train", "--out-dir", "x"]) == 1  # --data is required
    err = capsys.readouterr().err
    assert "error:" in err


def test_config_errors_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("bogus = 1\n", encoding="utf-8")
    code = cli.main(["simulate", "--config", str(bad), "--out-dir", str(tmp_path / "o")])
    assert code == 1
    assert "unknown key" in capsys.readouterr().err


def test_data_errors_exit_2(tmp_path, capsys):
    code = cli.main(["train", "--data", str(tmp_path / "nowhere"),
                     "--out-dir", str(tmp_path / "o")])
    assert code == 2
    corrupt = tmp_path / "x.msr"
    corrupt.write_bytes(b"garbage")
    code = cli.main(["aem", "--fused", str(corrupt), "--reference", str(corrupt),
                     "--out-dir", str(tmp_path / "o")])
    assert code == 2


def test_sdrcnn_requires_checkpoint(tmp_path, workspace):
    data = workspace["data"]
    pan = data / "s00_000_000_pan.msr"
    lrms = data / "s00_000_000_lrms.msr"
    code = cli.main(["sharpen", "--method", "sdrcnn", "--pan", str(pan),
                     "--lrms", str(lrms), "--out-dir", str(tmp_path)])
    assert code == 1


def test_simulate_wrote_a_dataset(workspace, capsys):
    data = workspace["data"]
    assert (data / "manifest.txt").exists()
    rasters = [f for f in os.listdir(data) if f.endswith(".msr")]
    assert len(rasters) == 15  # 5 scenes x 1 patch x 3 roles
    arr = raster.read_raster(data / "s00_000_000_gt.msr")
    assert arr.shape == (3, 16, 16)


def test_train_outputs(workspace):
    out = workspace["train"]
    assert (out / "final.ckpt").exists()
    assert (out / "best.ckpt").exists()
    loss = (out / "loss.csv").read_text(encoding="utf-8").splitlines()
    assert loss[0] == "iteration,raw,smoothed"
    assert len(loss) == 3  # header + 2 iterations
    for row in loss[1:]:
        i, raw, smoothed = row.split(",")
        assert int(i) >= 0 and float(raw) > 0 and float(smoothed) > 0
    val = (out / "val.csv").read_text(encoding="utf-8").splitlines()
    assert val[0] == "iteration,val_loss"
    for row in val[1:]:
        i, v = row.split(",")
        assert int(i) >= 0 and float(v) > 0
    run = (out / "run.txt").read_text(encoding="utf-8")
    assert "width=4\n" in run
    assert "dataset_hash=" in run


@pytest.mark.parametrize("method", ["sfim", "gs", "sdrcnn"])
def test_sharpen_each_method(workspace, tmp_path, method):
    data = workspace["data"]
    argv = ["sharpen", "--method", method, "--config", str(workspace["cfg"]),
            "--pan", str(data / "s01_000_000_pan.msr"),
            "--lrms", str(data / "s01_000_000_lrms.msr"),
            "--out-dir", str(tmp_path)]
    if method == "sdrcnn":
        argv += ["--checkpoint", str(workspace["train"] / "final.ckpt")]
    assert cli.main(argv) == 0
    fused = raster.read_raster(tmp_path / "hrms.msr")
    assert fused.shape == (3, 16, 16)
    assert (tmp_path / "hrms.png").exists()


def test_eval_reduced(workspace, tmp_path, capsys):
    assert cli.main(["eval", "--method", "sfim", "--config", str(workspace["cfg"]),
                     "--data", str(workspace["data"]), "--split", "test",
                     "--out-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    for name in ("sam", "ergas", "scc", "q2n"):
        assert f"{name}:" in out
    lines = (tmp_path / "report.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "method,sample_id,metric,value"


def test_eval_full_mode(workspace, tmp_path, capsys):
    assert cli.main(["eval", "--method", "gs", "--config", str(workspace["cfg"]),
                     "--data", str(workspace["data"]), "--split", "test",
                     "--mode", "full", "--out-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "qnr:" in out and "d_lambda:" in out


def test_ablate(workspace, tmp_path, capsys):
    assert cli.main(["ablate", "--config", str(workspace["cfg"]),
                     "--data", str(workspace["data"]),
                     "--out-dir", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.count("q2n") == 11
    lines = (tmp_path / "summary.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0] == "variant,metric,mean,std"
    variants = {ln.split(",")[0] for ln in lines[1:]}
    assert len(variants) == 11
    assert (tmp_path / "budget50k" / "report.csv").exists()


def test_inspect_features(workspace, tmp_path, capsys):
    data = workspace["data"]
    assert cli.main(["inspect-features", "--checkpoint", str(workspace["train"] / "final.ckpt"),
                     "--pan", str(data / "s02_000_000_pan.msr"),
                     "--lrms", str(data / "s02_000_000_lrms.msr"),
                     "--out-dir", str(tmp_path)]) == 0
    for i in (1, 2, 3):
        assert (tmp_path / f"features_block{i}.msr").exists()
        for j in (1, 2, 3, 4):
            assert (tmp_path / f"features_block{i}_pc{j}.png").exists()
    assert "12 feature maps" in capsys.readouterr().out


def test_aem_command(workspace, tmp_path, capsys):
    data = workspace["data"]
    gt = str(data / "s03_000_000_gt.msr")
    sharpen_out = tmp_path / "f"
    assert cli.main(["sharpen", "--method", "gs", "--config", str(workspace["cfg"]),
                     "--pan", str(data / "s03_000_000_pan.msr"),
                     "--lrms", str(data / "s03_000_000_lrms.msr"),
                     "--out-dir", str(sharpen_out)]) == 0
    aem_out = tmp_path / "aem"
    assert cli.main(["aem", "--fused", str(sharpen_out / "hrms.msr"),
                     "--reference", gt, "--out-dir", str(aem_out)]) == 0
    assert "mean absolute error" in capsys.readouterr().out
    err_map = raster.read_raster(aem_out / "aem.msr")
    assert err_map.shape == (1, 16, 16)
    assert (aem_out / "aem.png").exists()


def test_outputs_stay_under_out_dir(tmp_path, monkeypatch):
    scratch = tmp_path / "cwd"
    scratch.mkdir()
    monkeypatch.chdir(scratch)
    cfg = tmp_path / "run.cfg"
    cfg.write_text(CFG_TEXT.replace("scenes = 5", "scenes = 2"), encoding="utf-8")
    before = set(os.listdir(scratch))
    assert cli.main(["simulate", "--config", str(cfg),
                     "--out-dir", str(tmp_path / "sim")]) == 0
    assert set(os.listdir(scratch)) == before


def test_seed_override_changes_the_dataset(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(CFG_TEXT.replace("scenes = 5", "scenes = 1"), encoding="utf-8")
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert cli.main(["simulate", "--config", str(cfg), "--out-dir", str(a)]) == 0
    assert cli.main(["simulate", "--config", str(cfg), "--seed", "9", "--out-dir", str(b)]) == 0
    assert cli.main(["simulate", "--config", str(cfg), "--out-dir", str(c)]) == 0
    base = raster.read_raster(a / "s00_000_000_gt.msr")
    assert np.array_equal(base, raster.read_raster(c / "s00_000_000_gt.msr"))
    assert not np.array_equal(base, raster.read_raster(b / "s00_000_000_gt.msr"))
