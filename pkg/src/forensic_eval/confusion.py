"""Shape-mask-aware confusion counting.

Every pixel metric reduces through this kernel. Counts are exact integer
sums; no floating point is used anywhere in this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .util import parallel_map


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp + other.tp,
            self.tn + other.tn,
            self.fp + other.fp,
            self.fn + other.fn,
        )

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def invert_pred(self) -> "ConfusionCounts":
        """Counts after complementing the prediction (gt unchanged)."""
        return ConfusionCounts(tp=self.fn, tn=self.fp, fp=self.tn, fn=self.tp)

    def invert_gt(self) -> "ConfusionCounts":
        """Counts after complementing the ground truth (prediction unchanged)."""
        return ConfusionCounts(tp=self.fp, tn=self.fn, fp=self.tp, fn=self.tn)

    def as_dict(self) -> dict:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


ZERO_COUNTS = ConfusionCounts(0, 0, 0, 0)


def confusion(pred: np.ndarray, gt: np.ndarray, shape: np.ndarray | None = None) -> ConfusionCounts:
    """Count tp/tn/fp/fn over the valid region (shape mask, or everything).

    pred and gt are bool planes with manipulated = True; pixels where the
    shape mask is False are excluded from all four counts.
    """
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError(f"dimension mismatch: pred {pred.shape} vs gt {gt.shape}")
    if shape is None:
        tp = int(np.count_nonzero(pred & gt))
        fp = int(np.count_nonzero(pred)) - tp
        fn = int(np.count_nonzero(gt)) - tp
        tn = pred.size - tp - fp - fn
        return ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)
    shape = np.asarray(shape, dtype=bool)
    if shape.shape != pred.shape:
        raise ValueError(f"dimension mismatch: shape {shape.shape} vs pred {pred.shape}")
    pred_valid = pred & shape
    gt_valid = gt & shape
    tp = int(np.count_nonzero(pred_valid & gt_valid))
    fp = int(np.count_nonzero(pred_valid)) - tp
    fn = int(np.count_nonzero(gt_valid)) - tp
    tn = int(np.count_nonzero(shape)) - tp - fp - fn
    return ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)


def confusion_batch(pairs, workers: int | None = None) -> list[ConfusionCounts]:
    """confusion() over a sequence of (pred, gt) or (pred, gt, shape).

    Output order matches input order and is bit-identical for any worker
    count. Per-pair failures are re-raised with the pair index attached.
    """
    return parallel_map(lambda pair: confusion(*pair), pairs, workers)
