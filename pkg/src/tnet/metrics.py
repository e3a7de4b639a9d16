"""Confusion-matrix segmentation metrics (OA, IoU, F1 and their class means)."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .objective import IGNORE


@dataclass
class ConfusionMatrix:
    """Rows are ground truth, columns are predictions."""

    num_classes: int
    counts: np.ndarray = None
    ignored_pixels: int = 0

    def __post_init__(self):
        if self.counts is None:
            self.counts = np.zeros((self.num_classes, self.num_classes), dtype=np.int64)

    def accumulate(self, pred: np.ndarray, mask: np.ndarray) -> "ConfusionMatrix":
        pred = np.asarray(pred).reshape(-1).astype(np.int64)
        mask = np.asarray(mask).reshape(-1).astype(np.int64)
        if pred.shape != mask.shape:
            raise ValueError(f"prediction has {pred.size} pixels, mask has {mask.size}")
        valid = mask != IGNORE
        self.ignored_pixels += int((~valid).sum())
        k = self.num_classes
        gt, pr = mask[valid], pred[valid]
        if gt.size and (gt.min() < 0 or gt.max() >= k or pr.min() < 0 or pr.max() >= k):
            raise ValueError(f"labels outside [0, {k})")
        self.counts += np.bincount(gt * k + pr, minlength=k * k).reshape(k, k)
        return self

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.num_classes, self.counts + other.counts, self.ignored_pixels + other.ignored_pixels)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass
class Scores:
    oa: float
    iou: list
    f1: list
    miou: float
    mf1: float
    present: list = field(default_factory=list)
    excluded: tuple = ()


def derive(cm: ConfusionMatrix, excluded_classes=()) -> Scores:
    """Per-class IoU/F1 and their means over non-excluded classes.

    A class with no ground truth and no predictions has undefined scores
    (``nan``) and is left out of the means.
    """
    counts = cm.counts.astype(np.float64)
    if counts.sum() == 0:
        raise ValueError("cannot derive metrics from an empty confusion matrix")
    tp = np.diag(counts)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    present = (tp + fp + fn) > 0
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(present, tp / (tp + fp + fn), np.nan)
        f1 = np.where(present, 2 * tp / (2 * tp + fp + fn), np.nan)
    excluded = tuple(sorted(set(int(c) for c in excluded_classes)))
    use = present.copy()
    use[list(excluded)] = False
    miou = float(iou[use].mean()) if use.any() else float("nan")
    mf1 = float(f1[use].mean()) if use.any() else float("nan")
    return Scores(
        oa=float(tp.sum() / counts.sum()),
        iou=[float(v) for v in iou],
        f1=[float(v) for v in f1],
        miou=miou,
        mf1=mf1,
        present=[bool(v) for v in present],
        excluded=excluded,
    )


def _header(class_names):
    return ["metric", *class_names, "mF1", "OA", "mIoU"]


def table_rows(scores: Scores, class_names=None) -> list[list[str]]:
    k = len(scores.iou)
    names = list(class_names) if class_names else [f"class{i}" for i in range(k)]
    fmt = lambda v: "-" if v != v else f"{100 * v:.2f}"  # noqa: E731
    return [
        _header(names),
        ["F1", *[fmt(v) for v in scores.f1], fmt(scores.mf1), fmt(scores.oa), fmt(scores.miou)],
        ["IoU", *[fmt(v) for v in scores.iou], "", "", ""],
    ]


def to_csv(scores: Scores, class_names=None) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(table_rows(scores, class_names))
    return buf.getvalue()


def to_text(scores: Scores, class_names=None) -> str:
    rows = table_rows(scores, class_names)
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(c.rjust(wd) if j else c.ljust(wd) for j, (c, wd) in enumerate(zip(r, widths))) for r in rows]
    if scores.excluded:
        lines.append(f"(excluded from means: {', '.join(str(c) for c in scores.excluded)})")
    return "\n".join(lines) + "\n"
