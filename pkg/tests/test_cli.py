import json
import os

import numpy as np
import pytest

import tnet.nnops
from tnet.cli import main
from tnet.cli import config as cfgmod
from tnet.cli.checkpoint import decode, encode, load_checkpoint, save_checkpoint
from tnet.cli.commands import SWEEP_GRID, cmd_bench, cmd_eval, cmd_predict, cmd_train, sweep_rows
from tnet.cli.training import load_datasets, train
from tnet.data import gen_synthetic, read_pgm, write_ppm
from tnet.errors import ConfigError, DataError, StateError
from tnet.gradsuite import run_suite
from tnet.model import TerraceConfig, build
from tnet.optim import AdamW

TINY = ["--synthetic-train", "16", "--synthetic-val", "8", "--epochs", "1", "--batch-size", "8"]


def _cfg(tmp_path, *extra, **kw):
    return cfgmod.load(None, [*TINY, "--out-dir", str(tmp_path), *extra]).replace(**kw)


def test_config_file_and_overrides(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\nnum_classes = 5\nlateral_kernel = none\ntranspose_kernel = upsample\nseed = 4\n")
    cfg = cfgmod.load(str(p), ["--seed", "9", "--stage-channels=8,16,24,32"])
    assert cfg.num_classes == 5 and cfg.lateral_kernel is None and cfg.transpose_kernel == "upsample"
    assert cfg.seed == 9 and cfg.stage_channels == (8, 16, 24, 32)
    again = cfgmod.parse_text(cfg.to_text())
    assert cfgmod.RunConfig(**again) == cfg


@pytest.mark.parametrize("text", ["colour = red\n", "seed 4\n", "seed = four\n", "stage_channels = 16,8,32,64\n",
                                  "crop = 48\n", "activation = swish\n"])
def test_config_rejects(tmp_path, text):
    p = tmp_path / "bad.cfg"
    p.write_text(text)
    with pytest.raises(ConfigError):
        cfgmod.load(str(p))


def test_override_errors():
    with pytest.raises(ConfigError, match="unknown option"):
        cfgmod.parse_overrides(["--learning-rate", "1"])
    with pytest.raises(ConfigError):
        cfgmod.parse_overrides(["--seed"])
    with pytest.raises(ConfigError):
        cfgmod.parse_overrides(["seed", "1"])


def test_paper_preset_defaults():
    cfg = cfgmod.load(None, ["--preset", "paper"])
    assert cfg.crop == 512 and cfg.stage_channels == (64, 128, 256, 512)


def test_checkpoint_roundtrip(tmp_path):
    model = build(TerraceConfig(num_classes=4), seed=3)
    opt = AdamW()
    model.registry["head.classifier.bias"].grad[:] = 1.0
    opt.step(model.registry, 1e-3)
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, model.state_arrays(), opt)
    arrays, opt2 = load_checkpoint(path)
    assert list(arrays) == list(model.state_arrays())
    assert all(np.array_equal(arrays[k], v) for k, v in model.state_arrays().items())
    assert opt2.step_count == 1 and set(opt2.m) == set(opt.m)
    assert all(np.array_equal(opt2.m[k], opt.m[k]) and np.array_equal(opt2.v[k], opt.v[k]) for k in opt.m)
    other = build(model.cfg, seed=99)
    other.load_arrays(arrays)
    x = np.random.default_rng(0).random((1, 3, 64, 64)).astype(np.float32)
    assert np.array_equal(model.eval().forward(x), other.eval().forward(x))


def test_checkpoint_layout():
    data = encode({"a": np.array([[1.0, 2.0]], np.float32)})
    assert data[:4] == b"TNET"
    assert data[4:12] == (1).to_bytes(4, "little") + (1).to_bytes(4, "little")
    assert data[12:14] == (1).to_bytes(2, "little") and data[14:15] == b"a"
    assert data[15:17] == bytes([0, 2])
    assert data[17:25] == (1).to_bytes(4, "little") + (2).to_bytes(4, "little")
    assert np.frombuffer(data[25:33], "<f4").tolist() == [1.0, 2.0]
    assert len(data) == 37


def test_checkpoint_corruption(tmp_path):
    data = bytearray(encode({"w": np.ones(4, np.float32)}))
    data[20] ^= 0x01
    with pytest.raises(DataError, match="CRC"):
        decode(bytes(data))
    with pytest.raises(DataError):
        decode(b"NOPE" + bytes(20))
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "missing.ckpt")


def test_checkpoint_missing_path():
    model = build(TerraceConfig(num_classes=4), seed=0)
    arrays = model.state_arrays()
    del arrays["decoder.terrace.stage2.lateral.weight"]
    with pytest.raises(StateError, match="decoder.terrace.stage2.lateral.weight"):
        build(model.cfg, seed=None).load_arrays(decode(encode(arrays)))


def test_exit_codes(tmp_path, capsys):
    assert main(["train", "--bogus", "1"]) == 1
    assert main(["frobnicate"]) == 1
    assert main(["eval", "--out-dir", str(tmp_path), "--checkpoint", str(tmp_path / "none.ckpt"), *TINY]) == 2
    assert main(["train", "--config", str(tmp_path / "missing.cfg")]) == 1
    capsys.readouterr()


def test_train_eval_predict_cycle(tmp_path, capsys):
    run = tmp_path / "run"
    assert main(["train", "--out-dir", str(run), *TINY, "--epochs", "2"]) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["steps"] == 4
    log = [json.loads(line) for line in (run / "metrics.jsonl").read_text().splitlines()]
    assert [r["epoch"] for r in log] == [0, 1]
    assert set(log[0]) >= {"ce", "dice", "total", "lr", "train_miou", "val_miou"}
    for name in ("last.ckpt", "best.ckpt", "run.cfg"):
        assert (run / name).exists()
    arrays, opt = load_checkpoint(run / "last.ckpt")
    assert opt is not None and opt.step_count == 4

    ev = tmp_path / "ev"
    args = ["eval", "--out-dir", str(ev), "--checkpoint", str(run / "last.ckpt"), *TINY, "--excluded-classes", "0"]
    assert main(args) == 0
    first = (ev / "metrics.csv").read_text()
    assert main(args) == 0
    assert (ev / "metrics.csv").read_text() == first
    assert first.splitlines()[0] == "metric,class0,class1,class2,class3,mF1,OA,mIoU"
    assert "excluded from means: 0" in (ev / "metrics.txt").read_text()

    imgs = tmp_path / "imgs"
    for s in gen_synthetic(2, 4, 64, 5):
        write_ppm(s.image, imgs / f"{s.id}.ppm")
    pred = tmp_path / "pred"
    args = ["predict", "--out-dir", str(pred), "--checkpoint", str(run / "last.ckpt"), "--images-dir", str(imgs),
            "--save-logits", "true"]
    assert main(args) == 0
    mask = read_pgm(pred / "syn00000.pgm")
    assert mask.shape == (64, 64)
    logits = np.load(pred / "syn00000_logits.npy")
    assert np.array_equal(np.argmax(logits, axis=0), mask)
    assert (pred / "syn00001_color.ppm").exists()
    before = mask.copy()
    assert main(args) == 0
    assert np.array_equal(read_pgm(pred / "syn00000.pgm"), before)
    capsys.readouterr()


def test_trained_beats_random_on_train_split(tmp_path, capsys):
    cfg = _cfg(tmp_path, synthetic_train=32, epochs=4, max_steps=16)
    cmd_train(cfg.replace(out_dir=str(tmp_path / "r")))
    zero = _cfg(tmp_path, epochs=0, synthetic_train=32)
    cmd_train(zero.replace(out_dir=str(tmp_path / "z")))
    trained = cmd_eval(cfg.replace(checkpoint=str(tmp_path / "r" / "last.ckpt"), eval_split="train", out_dir=str(tmp_path / "e1")))
    rand = cmd_eval(cfg.replace(checkpoint=str(tmp_path / "z" / "last.ckpt"), eval_split="train", out_dir=str(tmp_path / "e2")))
    assert trained.miou >= rand.miou
    capsys.readouterr()


def test_epochs_zero_saves_initialization(tmp_path, capsys):
    cfg = _cfg(tmp_path, epochs=0, seed=11)
    cmd_train(cfg)
    arrays, _ = load_checkpoint(tmp_path / "last.ckpt")
    init = build(cfg.model_config(), seed=11).state_arrays()
    assert all(np.array_equal(arrays[k], v) for k, v in init.items())
    capsys.readouterr()


def test_train_is_deterministic(tmp_path):
    cfg = _cfg(tmp_path, epochs=2)
    train_set, val_set = load_datasets(cfg)
    a = train(cfg, train_set, val_set, str(tmp_path / "a"))
    b = train(cfg, train_set, val_set, str(tmp_path / "b"))
    assert (tmp_path / "a" / "metrics.jsonl").read_bytes() == (tmp_path / "b" / "metrics.jsonl").read_bytes()
    assert all(np.array_equal(p.value, b.model.registry[k].value) for k, p in a.model.registry.items())


def test_predict_errors(tmp_path, capsys):
    assert main(["predict", "--out-dir", str(tmp_path), "--images-dir", str(tmp_path / "x"), "--checkpoint", "c"]) == 2
    capsys.readouterr()


def test_gradcheck_command(capsys):
    assert main(["gradcheck"]) == 0
    out = capsys.readouterr().out
    for label in ("conv2d", "conv_transpose2d k=3", "conv_transpose2d k=4", "conv_transpose2d k=6", "batchnorm",
                  "maxpool", "bilinear", "activation relu6", "activation gelu", "terrace block", "unet", "seg head",
                  "total loss", "composed terrace model"):
        assert label in out
    assert out.strip().splitlines()[-1].startswith("PASS")


def test_gradcheck_catches_sign_flip(monkeypatch, capsys):
    real = tnet.nnops.conv2d_bwd

    def flipped(x, w, grad_out, spec):
        gx, gw = real(x, w, grad_out, spec)
        return gx, -gw

    monkeypatch.setattr(tnet.nnops, "conv2d_bwd", flipped)
    assert not run_suite().passed
    assert main(["gradcheck"]) == 3
    assert "FAIL" in capsys.readouterr().out


def test_bench(tmp_path, capsys):
    cfg = _cfg(tmp_path, bench_iters=2)
    rows = cmd_bench(cfg)
    by = {r["decoder"]: r for r in rows}
    assert set(by) == {"terrace", "unet"}
    for r in rows:
        assert r["params"] > 0 and r["median_ms"] > 0 and r["imgs_per_s"] > 0
    assert by["terrace"]["approx_peak_bytes"] < by["unet"]["approx_peak_bytes"]
    big = cmd_bench(cfg.replace(bench_shape=(1, 3, 128, 128), out_dir=str(tmp_path / "big")))
    assert big[0]["approx_peak_bytes"] == 4 * rows[0]["approx_peak_bytes"]
    two = cmd_bench(cfg.replace(bench_shape=(2, 3, 64, 64), out_dir=str(tmp_path / "two")))
    assert two[0]["params"] == rows[0]["params"]
    assert json.loads((tmp_path / "bench.json").read_text())[0]["decoder"] == "terrace"
    capsys.readouterr()


def test_sweep_marks_failed_rows(tmp_path, monkeypatch):
    import tnet.cli.commands as commands

    real = commands.train

    def flaky(cfg, *a, **kw):
        if cfg.activation == "gelu":
            raise FloatingPointError("boom")
        return real(cfg, *a, **kw)

    monkeypatch.setattr(commands, "train", flaky)
    rows = sweep_rows(_cfg(tmp_path, max_steps=1, bench_iters=1), "activation")
    assert [r["variant"] for r in rows] == ["relu6", "relu", "gelu", "identity"]
    assert rows[2]["status"].startswith("failed") and all(r["status"] == "ok" for i, r in enumerate(rows) if i != 2)


def test_sweep_command_writes_table(tmp_path, capsys):
    assert main(["sweep", "--out-dir", str(tmp_path), *TINY, "--max-steps", "1", "--bench-iters", "1",
                 "--sweep-axis", "lateral_kernel"]) == 0
    lines = (tmp_path / "sweep_lateral_kernel.csv").read_text().splitlines()
    assert lines[0] == "axis,variant,status,mIoU,mF1,OA,params,median_ms"
    assert [line.split(",")[1] for line in lines[1:]] == ["none", "1", "3", "5", "7"]
    assert len(SWEEP_GRID["lateral_kernel"]) == 5
    capsys.readouterr()


def test_folder_dataset_training(tmp_path, capsys):
    from tnet.data import save_folder

    save_folder(gen_synthetic(8, 3, 64, 1), tmp_path / "tr")
    save_folder(gen_synthetic(4, 3, 64, 2), tmp_path / "va")
    args = ["train", "--out-dir", str(tmp_path / "o"), "--train-dir", str(tmp_path / "tr"),
            "--val-dir", str(tmp_path / "va"), "--num-classes", "3", "--epochs", "1"]
    assert main(args) == 0
    assert main([*args[:-4], "--num-classes", "2", "--epochs", "1"]) == 2
    capsys.readouterr()
