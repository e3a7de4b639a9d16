"""Implementations of the ``tnet`` subcommands."""
from __future__ import annotations

import csv
import io
import json
import logging
import os
import sys

import numpy as np

from .. import metrics
from ..data import read_ppm, save_color, save_mask
from ..errors import DataError, NumericError
from ..gradsuite import run_suite
from ..model import UPSAMPLE, activation_bytes, build, count_params, forward_bench
from ..model.network import TNet
from ..nnops import backend
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, ensure_dir
from .training import evaluate, load_datasets, train

log = logging.getLogger("tnet")

SWEEP_GRID = {
    "activation": ("relu6", "relu", "gelu", "identity"),
    "transpose_kernel": (UPSAMPLE, 3, 4, 6),
    "lateral_kernel": (None, 1, 3, 5, 7),
    "decoder": ("terrace", "unet"),
}


def _emit(text: str, out=None) -> None:
    (out or sys.stdout).write(text if text.endswith("\n") else text + "\n")


def load_model(cfg: RunConfig) -> TNet:
    if not cfg.checkpoint:
        raise DataError("a --checkpoint path is required")
    arrays, _ = load_checkpoint(cfg.checkpoint)
    model = build(cfg.model_config(), seed=None)
    model.load_arrays(arrays)
    return model.eval()


def cmd_train(cfg: RunConfig) -> dict:
    train_set, val_set = load_datasets(cfg)
    out = ensure_dir(cfg.out_dir)
    with open(os.path.join(out, "run.cfg"), "w") as f:
        f.write(cfg.to_text())
    res = train(cfg, train_set, val_set, out)
    last = res.history[-1] if res.history else {}
    summary = {"steps": res.steps, "best_val_miou": res.best_miou, **{f"final_{k}": v for k, v in last.items()}}
    _emit(json.dumps(summary))
    return summary


def _eval_set(cfg: RunConfig):
    if cfg.eval_dir:
        from .training import _folder

        return _folder(cfg.eval_dir, cfg.num_classes)
    train_set, val_set = load_datasets(cfg)
    return train_set if cfg.eval_split == "train" else val_set


def cmd_eval(cfg: RunConfig) -> metrics.Scores:
    dataset = _eval_set(cfg)
    model = load_model(cfg)
    cm = evaluate(model, dataset, cfg.num_classes)
    scores = metrics.derive(cm, cfg.excluded_classes)
    text = metrics.to_text(scores)
    out = ensure_dir(cfg.out_dir)
    with open(os.path.join(out, "metrics.csv"), "w") as f:
        f.write(metrics.to_csv(scores))
    with open(os.path.join(out, "metrics.txt"), "w") as f:
        f.write(text)
    _emit(text)
    return scores


def cmd_predict(cfg: RunConfig) -> list[str]:
    if not cfg.images_dir:
        raise DataError("--images-dir is required for predict")
    try:
        names = sorted(n for n in os.listdir(cfg.images_dir) if n.lower().endswith(".ppm"))
    except OSError as e:
        raise DataError(f"{cfg.images_dir}: {e.strerror}") from None
    if not names:
        raise DataError(f"no .ppm images in {cfg.images_dir}")
    model = load_model(cfg)
    out = ensure_dir(cfg.out_dir)
    written = []
    for name in names:
        img = read_ppm(os.path.join(cfg.images_dir, name))
        if img.shape[1] % 32 or img.shape[2] % 32:
            raise DataError(f"{name}: {img.shape[2]}x{img.shape[1]} is not a multiple of 32 pixels per side")
        logits = model.forward(img[None])
        labels = np.argmax(logits, axis=1)[0].astype(np.uint8)
        stem = os.path.splitext(name)[0]
        save_mask(labels, os.path.join(out, f"{stem}.pgm"))
        save_color(labels, os.path.join(out, f"{stem}_color.ppm"))
        if cfg.save_logits:
            np.save(os.path.join(out, f"{stem}_logits.npy"), logits[0])
        written.append(stem)
    _emit(f"wrote {len(written)} predictions to {out}")
    return written


def cmd_gradcheck(cfg: RunConfig):
    result = run_suite(cfg.gradcheck_h, cfg.gradcheck_tol, cfg.seed)
    _emit("\n".join(result.lines()))
    if not result.passed:
        raise NumericError("gradient check failed")
    return result


def bench_row(cfg: RunConfig, model_cfg=None) -> dict:
    mc = model_cfg or cfg.model_config()
    shape = tuple(cfg.bench_shape)
    model = build(mc, cfg.seed)
    timing = forward_bench(model, shape, cfg.bench_iters)
    return {
        "decoder": mc.decoder,
        "params": count_params(mc),
        "median_ms": timing["median_ms"],
        "imgs_per_s": timing["throughput"],
        "approx_peak_bytes": activation_bytes(mc, shape),
        "backend": backend.NAME,
    }


def cmd_bench(cfg: RunConfig) -> list[dict]:
    """Benchmark the configured network and its other-decoder counterpart."""
    mc = cfg.model_config()
    other = mc.with_(decoder="unet" if mc.decoder == "terrace" else "terrace")
    rows = [bench_row(cfg, mc), bench_row(cfg, other)]
    by = {r["decoder"]: r for r in rows}
    lines = [f"input {tuple(cfg.bench_shape)}  backend {backend.NAME}"]
    lines.append(f"{'decoder':<10}{'params':>12}{'median_ms':>12}{'imgs/s':>10}{'act_bytes':>14}")
    for r in rows:
        lines.append(f"{r['decoder']:<10}{r['params']:>12}{r['median_ms']:>12.2f}{r['imgs_per_s']:>10.1f}{r['approx_peak_bytes']:>14}")
    ratio = by["terrace"]["approx_peak_bytes"] / by["unet"]["approx_peak_bytes"]
    lines.append(f"terrace/unet activation bytes: {ratio:.3f} ({'lower' if ratio < 1 else 'NOT lower'})")
    _emit("\n".join(lines))
    out = ensure_dir(cfg.out_dir)
    with open(os.path.join(out, "bench.json"), "w") as f:
        json.dump(rows, f, indent=1)
    return rows


SWEEP_FIELDS = ["axis", "variant", "status", "mIoU", "mF1", "OA", "params", "median_ms"]


def _label(v) -> str:
    return "none" if v is None else str(v)


def sweep_rows(cfg: RunConfig, axis: str) -> list[dict]:
    train_set, val_set = load_datasets(cfg)
    rows = []
    for value in SWEEP_GRID[axis]:
        row = {"axis": axis, "variant": _label(value)}
        try:
            vcfg = cfg.replace(**{axis: value})
            res = train(vcfg, train_set, val_set, None)
            scores = metrics.derive(evaluate(res.model, val_set, cfg.num_classes), cfg.excluded_classes)
            timing = forward_bench(res.model, tuple(cfg.bench_shape), max(1, min(cfg.bench_iters, 5)))
            row.update(status="ok", mIoU=scores.miou, mF1=scores.mf1, OA=scores.oa,
                       params=res.model.registry.count(), median_ms=timing["median_ms"])
        except Exception as e:  # one failing variant must not abort the table
            log.warning("sweep %s=%s failed: %s", axis, _label(value), e)
            row.update(status=f"failed: {type(e).__name__}: {e}")
        rows.append(row)
    return rows


def format_sweep(rows: list[dict]) -> str:
    lines = [f"{'variant':<10}{'mIoU':>8}{'mF1':>8}{'OA':>8}{'params':>10}{'ms':>8}  status"]
    for r in rows:
        if r["status"] == "ok":
            lines.append(f"{r['variant']:<10}{100 * r['mIoU']:>8.2f}{100 * r['mF1']:>8.2f}{100 * r['OA']:>8.2f}"
                         f"{r['params']:>10}{r['median_ms']:>8.2f}  ok")
        else:
            lines.append(f"{r['variant']:<10}{'-':>8}{'-':>8}{'-':>8}{'-':>10}{'-':>8}  {r['status']}")
    return "\n".join(lines)


def cmd_sweep(cfg: RunConfig) -> dict[str, list[dict]]:
    axes = list(SWEEP_GRID) if cfg.sweep_axis == "all" else [cfg.sweep_axis]
    out = ensure_dir(cfg.out_dir)
    tables = {}
    for axis in axes:
        rows = sweep_rows(cfg, axis)
        tables[axis] = rows
        buf = io.StringIO()
        w = csv.DictWriter(buf, SWEEP_FIELDS, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        w.writerows(rows)
        with open(os.path.join(out, f"sweep_{axis}.csv"), "w") as f:
            f.write(buf.getvalue())
        _emit(f"== sweep: {axis} ==\n{format_sweep(rows)}")
    return tables


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "predict": cmd_predict,
    "gradcheck": cmd_gradcheck,
    "bench": cmd_bench,
    "sweep": cmd_sweep,
}
