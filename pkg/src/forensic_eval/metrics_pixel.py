"""Pixel-level localization metrics: F1 and its variants, AUC, accuracy, IoU.

Two distinct inversion notions exist and are both implemented:

* invert-F1 complements only the prediction: F1(gt, ~pred). It is the
  second operand of permute-F1 and is the quantity that reaches
  2w/(1+w) for an empty prediction on a mask with white fraction w.
* the negative-class F1 complements prediction and ground truth
  together: F1(~gt, ~pred). It is the second operand of the macro and
  weighted averages.

Conflating the two is exactly the scoring confusion these metrics are
meant to expose, so the names here keep them apart.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .confusion import ConfusionCounts, ZERO_COUNTS, confusion
from .corpus import (
    Manifest,
    binarize_scores,
    decode_mask,
    decode_prediction,
    invert_scores,
    pad_to,
)
from .util import parallel_map

METRIC_FIELDS = (
    "f1",
    "invert_f1",
    "permute_f1",
    "macro_f1",
    "micro_f1",
    "weighted_f1",
    "auc",
    "accuracy",
    "iou",
)


class UndefinedAucError(ValueError):
    """AUC is undefined: the valid ground truth contains a single class."""


class MissingPredictionsError(FileNotFoundError):
    """One or more manipulated samples have no prediction file."""

    def __init__(self, ids):
        self.ids = list(ids)
        shown = ", ".join(self.ids[:10]) + ("..." if len(self.ids) > 10 else "")
        super().__init__(f"missing prediction files for {len(self.ids)} sample(s): {shown}")


# ---------------------------------------------------------------------------
# confusion-count metrics
# ---------------------------------------------------------------------------


def f1_binary(c: ConfusionCounts) -> float:
    """F1 of the manipulated class: 2*tp / (2*tp + fp + fn).

    A zero denominator (both sets empty) counts as perfect agreement.
    """
    denom = 2 * c.tp + c.fp + c.fn
    return 1.0 if denom == 0 else 2.0 * c.tp / denom


def f1_invert(c: ConfusionCounts) -> float:
    """F1 between the complemented prediction and the original ground truth."""
    return f1_binary(c.invert_pred())


def f1_negative(c: ConfusionCounts) -> float:
    """F1 of the unmanipulated class (prediction and gt both complemented)."""
    denom = 2 * c.tn + c.fn + c.fp
    return 1.0 if denom == 0 else 2.0 * c.tn / denom


def f1_permute(c: ConfusionCounts) -> float:
    """max(F1, invert-F1); overestimates whenever the inversion wins."""
    return max(f1_binary(c), f1_invert(c))


def f1_macro(c: ConfusionCounts) -> float:
    """Unweighted mean of the positive-class and negative-class F1."""
    return 0.5 * (f1_binary(c) + f1_negative(c))


def f1_micro(c: ConfusionCounts) -> float:
    """Two-class micro average; identical to accuracy for a single mask."""
    return 1.0 if c.total == 0 else (c.tp + c.tn) / c.total


def f1_weighted(c: ConfusionCounts) -> float:
    """Support-weighted mean of the per-class F1 scores."""
    if c.total == 0:
        return 1.0
    pos_support = c.tp + c.fn
    neg_support = c.tn + c.fp
    return (pos_support * f1_binary(c) + neg_support * f1_negative(c)) / c.total


def iou(c: ConfusionCounts) -> float:
    """Intersection over union of the manipulated regions."""
    denom = c.tp + c.fp + c.fn
    return 1.0 if denom == 0 else c.tp / denom


def accuracy(c: ConfusionCounts) -> float:
    if c.total == 0:
        raise ValueError("accuracy undefined: no valid pixels counted")
    return (c.tp + c.tn) / c.total


# ---------------------------------------------------------------------------
# ROC / AUC
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    tpr: float
    fpr: float


def _flat_valid(score: np.ndarray, gt: np.ndarray, shape: np.ndarray | None):
    score = np.asarray(score)
    gt = np.asarray(gt, dtype=bool)
    if score.shape != gt.shape:
        raise ValueError(f"dimension mismatch: score {score.shape} vs gt {gt.shape}")
    if shape is None:
        return score.reshape(-1), gt.reshape(-1)
    shape = np.asarray(shape, dtype=bool)
    if shape.shape != gt.shape:
        raise ValueError(f"dimension mismatch: shape {shape.shape} vs gt {gt.shape}")
    return score[shape], gt[shape]


def _cumulative_roc_counts(scores: np.ndarray, labels: np.ndarray):
    """Cumulative tp/fp at each distinct score, thresholds descending.

    Tied scores share one threshold point. Integer score planes take an
    exact O(n) histogram path; floats are sorted.
    """
    if scores.dtype == bool:
        scores = scores.astype(np.uint8)
        scale = 1
    elif scores.dtype.kind in "ui":
        scale = int(np.iinfo(scores.dtype).max)
    else:
        scale = None
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")

    if scale is not None:
        pos_hist = np.bincount(scores[labels], minlength=scale + 1).astype(np.int64)
        all_hist = np.bincount(scores, minlength=scale + 1).astype(np.int64)
        values = np.nonzero(all_hist)[0][::-1]  # distinct values, descending
        tp = np.cumsum(pos_hist[values])
        fp = np.cumsum(all_hist[values] - pos_hist[values])
        thresholds = values.astype(np.float64) / scale
        return thresholds, tp, fp

    order = np.argsort(scores, kind="stable")[::-1]
    sorted_scores = scores[order].astype(np.float64)
    sorted_labels = labels[order]
    distinct = np.nonzero(np.diff(sorted_scores))[0]
    idx = np.append(distinct, sorted_scores.size - 1)
    tp = np.cumsum(sorted_labels.astype(np.int64))[idx]
    fp = (idx + 1) - tp
    return sorted_scores[idx], tp, fp


def auc_scores(scores: np.ndarray, labels: np.ndarray) -> float:
    """Trapezoid-rule area under the ROC built at every distinct score.

    The ROC is anchored at the virtual (0, 0) point; the (1, 1) point is
    the lowest-threshold entry. The result equals the tie-aware
    pair-ranking statistic.
    """
    scores = np.asarray(scores).reshape(-1)
    labels = np.asarray(labels, dtype=bool).reshape(-1)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have equal length")
    n_pos = int(np.count_nonzero(labels))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAucError("AUC undefined: single-class ground truth")
    _, tp, fp = _cumulative_roc_counts(scores, labels)
    tpr = np.concatenate(([0.0], tp / n_pos))
    fpr = np.concatenate(([0.0], fp / n_neg))
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) * 0.5))


def roc_points(score: np.ndarray, gt: np.ndarray, shape: np.ndarray | None = None) -> list[RocPoint]:
    """ROC operating points at every distinct score value (descending)."""
    scores, labels = _flat_valid(score, gt, shape)
    n_pos = int(np.count_nonzero(labels))
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAucError("ROC undefined: single-class ground truth")
    thresholds, tp, fp = _cumulative_roc_counts(scores, labels)
    return [
        RocPoint(threshold=float(t), tpr=float(a) / n_pos, fpr=float(b) / n_neg)
        for t, a, b in zip(thresholds, tp, fp)
    ]


def auc_pixel(score: np.ndarray, gt: np.ndarray, shape: np.ndarray | None = None) -> float:
    """Pixel AUC over the valid region of one image."""
    scores, labels = _flat_valid(score, gt, shape)
    return auc_scores(scores, labels)


# ---------------------------------------------------------------------------
# per-image metric sets and dataset evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PixelMetricSet:
    f1: float
    invert_f1: float
    permute_f1: float
    macro_f1: float
    micro_f1: float
    weighted_f1: float
    auc: float | None
    accuracy: float
    iou: float

    @classmethod
    def from_counts(cls, c: ConfusionCounts, auc: float | None = None) -> "PixelMetricSet":
        return cls(
            f1=f1_binary(c),
            invert_f1=f1_invert(c),
            permute_f1=f1_permute(c),
            macro_f1=f1_macro(c),
            micro_f1=f1_micro(c),
            weighted_f1=f1_weighted(c),
            auc=auc,
            accuracy=accuracy(c),
            iou=iou(c),
        )

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in METRIC_FIELDS}


@dataclass(frozen=True)
class SampleResult:
    id: str
    metrics: PixelMetricSet
    counts: ConfusionCounts


@dataclass
class PixelReport:
    dataset: str
    per_sample: list[SampleResult]
    aggregate: dict
    skipped_auc: list[str]
    options: dict

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "per_sample": [
                {"id": r.id, **r.metrics.as_dict(), **r.counts.as_dict()}
                for r in self.per_sample
            ],
            "aggregate": self.aggregate,
            "skipped_auc": self.skipped_auc,
            "options": self.options,
        }

    def csv_rows(self) -> list[list]:
        header = ["id", *METRIC_FIELDS, "tp", "tn", "fp", "fn"]
        rows = [header]
        for r in self.per_sample:
            m = r.metrics.as_dict()
            rows.append(
                [r.id]
                + [("" if m[k] is None else m[k]) for k in METRIC_FIELDS]
                + [r.counts.tp, r.counts.tn, r.counts.fp, r.counts.fn]
            )
        return rows


def evaluate_pair(
    scores: np.ndarray,
    gt: np.ndarray,
    shape: np.ndarray | None = None,
    *,
    threshold: float = 0.5,
) -> tuple[PixelMetricSet, ConfusionCounts]:
    """All pixel metrics for one (score plane, gt mask) pair.

    AUC is None when the valid ground truth is single-class.
    """
    pred = binarize_scores(scores, threshold)
    counts = confusion(pred, gt, shape)
    try:
        auc = auc_pixel(scores, gt, shape)
    except UndefinedAucError:
        auc = None
    return PixelMetricSet.from_counts(counts, auc=auc), counts


def find_prediction(pred_dir, sample_id: str) -> Path | None:
    """Locate <id>.png or <id>.f32 under the prediction directory."""
    pred_dir = Path(pred_dir)
    for suffix in (".png", ".f32"):
        candidate = pred_dir / f"{sample_id}{suffix}"
        if candidate.is_file():
            return candidate
    return None


def evaluate_pixel(
    manifest: Manifest,
    pred_dir,
    *,
    threshold: float = 0.5,
    aggregate: str = "mean",
    workers: int | None = None,
    invert_gt: bool = False,
    invert_pred: bool = False,
) -> PixelReport:
    """Evaluate predictions for every manipulated sample of a manifest.

    Predictions live in pred_dir as <id>.png (8/16-bit scores) or <id>.f32
    (raw floats). A prediction larger than its ground truth in both
    dimensions is treated as zero-padded at the bottom-right: the ground
    truth is padded to match and the padding is excluded via the emitted
    shape mask. Authentic samples are excluded from the aggregate.

    aggregate="mean" averages per-sample metrics (AUC over the samples
    where it is defined); "global" pools confusion counts dataset-wide
    first, while AUC stays a per-sample mean.
    """
    if aggregate not in ("mean", "global"):
        raise ValueError(f"unknown aggregate mode {aggregate!r}")
    pred_dir = Path(pred_dir)
    manipulated = manifest.manipulated()
    if not manipulated:
        raise ValueError("manifest has no manipulated samples to evaluate")
    missing = [s.id for s in manipulated if find_prediction(pred_dir, s.id) is None]
    if missing:
        raise MissingPredictionsError(missing)

    def evaluate_one(record):
        gt = decode_mask(manifest.mask_path(record))
        if invert_gt:
            gt = ~gt
        plane = decode_prediction(find_prediction(pred_dir, record.id))
        if invert_pred:
            plane = invert_scores(plane)
        shape = None
        if plane.shape != gt.shape:
            if plane.shape[0] >= gt.shape[0] and plane.shape[1] >= gt.shape[1]:
                gt, shape = pad_to(gt, plane.shape[1], plane.shape[0])
            else:
                raise ValueError(
                    f"sample {record.id!r}: prediction {plane.shape} smaller than "
                    f"ground truth {gt.shape}"
                )
        metrics, counts = evaluate_pair(plane, gt, shape, threshold=threshold)
        return SampleResult(id=record.id, metrics=metrics, counts=counts)

    results = parallel_map(evaluate_one, manipulated, workers)
    skipped_auc = [r.id for r in results if r.metrics.auc is None]
    options = {
        "threshold": threshold,
        "aggregate": aggregate,
        "invert_gt": invert_gt,
        "invert_pred": invert_pred,
    }
    agg = _aggregate(results, aggregate)
    return PixelReport(
        dataset=manifest.dataset,
        per_sample=results,
        aggregate=agg,
        skipped_auc=skipped_auc,
        options=options,
    )


def _aggregate(results: list[SampleResult], mode: str) -> dict:
    auc_values = [r.metrics.auc for r in results if r.metrics.auc is not None]
    mean_auc = sum(auc_values) / len(auc_values) if auc_values else None
    agg: dict = {}
    if mode == "mean":
        for name in METRIC_FIELDS:
            if name == "auc":
                continue
            values = [getattr(r.metrics, name) for r in results]
            agg[name] = sum(values) / len(values)
    else:
        pooled = ZERO_COUNTS
        for r in results:
            pooled = pooled + r.counts
        pooled_set = PixelMetricSet.from_counts(pooled)
        for name in METRIC_FIELDS:
            if name == "auc":
                continue
            agg[name] = getattr(pooled_set, name)
        agg["pooled_counts"] = pooled.as_dict()
    agg["auc"] = mean_auc  # per-sample mean in both modes
    agg["n_samples"] = len(results)
    agg["n_auc_samples"] = len(auc_values)
    return agg


def evaluate_pairs_stream(
    pairs,
    *,
    threshold: float = 0.5,
    workers: int | None = None,
) -> list[tuple[PixelMetricSet, ConfusionCounts]]:
    """evaluate_pair over in-memory (scores, gt[, shape]) tuples, in order.

    The batched analogue of evaluate_pixel for callers that already hold
    decoded planes (synthetic corpora, benchmark harnesses).
    """

    def one(pair):
        scores, gt = pair[0], pair[1]
        shape = pair[2] if len(pair) > 2 else None
        return evaluate_pair(scores, gt, shape, threshold=threshold)

    return parallel_map(one, pairs, workers)
