"""Training and evaluation loops shared by the CLI commands."""
from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field

import numpy as np

from ..data import AugmentConfig, augment, batch_iter, gen_synthetic, load_folder, validate_labels
from ..errors import DataError, NumericError
from ..metrics import ConfusionMatrix, derive
from ..model import build
from ..model.network import TNet
from ..objective import total_loss
from ..optim import AdamW, OneCycleSchedule
from ..tensor import Rng
from .checkpoint import save_checkpoint
from .config import RunConfig

log = logging.getLogger("tnet")

AUG_STREAM = 0xA6


def _folder(root: str, k: int):
    return load_folder(os.path.join(root, "images"), os.path.join(root, "masks"), k)


def load_datasets(cfg: RunConfig):
    """Return (train, val) sample lists; synthetic unless directories are configured."""
    k = cfg.num_classes
    if cfg.train_dir:
        train = _folder(cfg.train_dir, k)
    else:
        train = gen_synthetic(cfg.synthetic_train, k, cfg.synthetic_size, cfg.data_seed)
    if cfg.val_dir:
        val = _folder(cfg.val_dir, k)
    else:
        val = gen_synthetic(cfg.synthetic_val, k, cfg.synthetic_size, cfg.data_seed + 1)
    validate_labels(train, k)
    validate_labels(val, k)
    for name, ds in (("train", train), ("val", val)):
        if not ds:
            raise DataError(f"{name} dataset is empty")
        bad = [s.id for s in ds if s.mask.shape[0] % 32 or s.mask.shape[1] % 32]
        if bad and not (name == "train" and cfg.augment):
            raise DataError(f"{name} sample {bad[0]!r} is not a multiple of 32 pixels per side")
    return train, val


def total_steps(cfg: RunConfig, n_train: int) -> int:
    steps = cfg.epochs * math.ceil(n_train / cfg.batch_size)
    return min(steps, cfg.max_steps) if cfg.max_steps else steps


def evaluate(model: TNet, dataset, num_classes: int, batch_size: int = 16) -> ConfusionMatrix:
    model.eval()
    cm = ConfusionMatrix(num_classes)
    for x, y in batch_iter(dataset, batch_size, None, 0):
        cm.accumulate(model.predict(x), y)
    return cm


@dataclass
class TrainResult:
    model: TNet
    optimizer: AdamW
    history: list = field(default_factory=list)
    best_miou: float = float("nan")
    steps: int = 0


def train(cfg: RunConfig, train_set, val_set, out_dir: str | None = None) -> TrainResult:
    """Run the full schedule. With ``out_dir`` writes ``last.ckpt``, ``best.ckpt`` and ``metrics.jsonl``."""
    model = build(cfg.model_config(), cfg.seed)
    opt = AdamW(weight_decay=cfg.weight_decay)
    n_steps = total_steps(cfg, len(train_set))
    result = TrainResult(model, opt)
    log_f = None
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        log_f = open(os.path.join(out_dir, "metrics.jsonl"), "w")
    try:
        if n_steps == 0:
            if out_dir:
                save_checkpoint(os.path.join(out_dir, "last.ckpt"), model.state_arrays())
                save_checkpoint(os.path.join(out_dir, "best.ckpt"), model.state_arrays())
            return result
        schedule = OneCycleSchedule(max(n_steps, 2), cfg.peak_lr)
        aug_cfg: AugmentConfig = cfg.augment_config()
        aug_root = Rng(cfg.seed).spawn(AUG_STREAM)
        step = 0
        for epoch in range(cfg.epochs):
            if step >= n_steps:
                break
            transform = None
            if cfg.augment:
                transform = lambda s, i, e=epoch: augment(s, aug_cfg, aug_root.spawn(e, i))  # noqa: E731
            sums = np.zeros(3)
            batches = 0
            cm = ConfusionMatrix(cfg.num_classes)
            lr = 0.0
            for x, y in batch_iter(train_set, cfg.batch_size, cfg.seed, epoch, transform):
                if step >= n_steps:
                    break
                model.train()
                logits = model.forward(x)
                out = total_loss(logits, y)
                if not math.isfinite(out.total):
                    raise NumericError(f"non-finite loss at step {step} (epoch {epoch})")
                model.backward(out.grad_logits)
                lr = schedule.lr_at(step)
                opt.step(model.registry, lr)
                model.registry.zero_grad()
                cm.accumulate(np.argmax(logits, axis=1), y)
                sums += (out.ce, out.dice, out.total)
                batches += 1
                step += 1
            val_miou = derive(evaluate(model, val_set, cfg.num_classes)).miou
            ce, dice, tot = sums / max(batches, 1)
            record = {
                "epoch": epoch, "step": step, "ce": ce, "dice": dice, "total": tot, "lr": lr,
                "train_miou": derive(cm).miou if cm.total else float("nan"), "val_miou": val_miou,
            }
            result.history.append(record)
            log.info("epoch %d step %d total %.4f val mIoU %.4f", epoch, step, tot, val_miou)
            if log_f:
                log_f.write(json.dumps(record) + "\n")
                log_f.flush()
                save_checkpoint(os.path.join(out_dir, "last.ckpt"), model.state_arrays(), opt)
                if not val_miou <= result.best_miou:  # also true while best is nan
                    save_checkpoint(os.path.join(out_dir, "best.ckpt"), model.state_arrays())
            if not val_miou <= result.best_miou:
                result.best_miou = val_miou
        result.steps = step
        return result
    finally:
        if log_f:
            log_f.close()
