"""Image-level detection metrics over per-image manipulation scores.

Gather-then-compute: records are collected first, metrics are computed
once over the full list with the same ROC kernel the pixel metrics use.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .confusion import ConfusionCounts
from .corpus import Manifest
from .metrics_pixel import UndefinedAucError, accuracy, auc_scores, f1_binary


class ScoresError(ValueError):
    """Detection scores CSV is malformed or inconsistent with the manifest."""


@dataclass(frozen=True)
class DetectionRecord:
    id: str
    score: float
    label: int


def evaluate_image(records, threshold: float = 0.5) -> dict:
    """F1, AUC, and accuracy over detection records.

    A score >= threshold predicts manipulated; manipulated is the positive
    class. AUC is None when only one label is present.
    """
    records = list(records)
    if not records:
        raise ValueError("no detection records to evaluate")
    scores = np.array([r.score for r in records], dtype=np.float64)
    labels = np.array([r.label for r in records], dtype=bool)
    if not np.all(np.isfinite(scores)) or scores.min() < 0.0 or scores.max() > 1.0:
        raise ValueError("detection scores must be finite and within [0, 1]")
    pred = scores >= threshold
    tp = int(np.count_nonzero(pred & labels))
    fp = int(np.count_nonzero(pred)) - tp
    fn = int(np.count_nonzero(labels)) - tp
    tn = labels.size - tp - fp - fn
    counts = ConfusionCounts(tp=tp, tn=tn, fp=fp, fn=fn)
    try:
        auc = auc_scores(scores, labels)
    except UndefinedAucError:
        auc = None
    return {
        "f1": f1_binary(counts),
        "auc": auc,
        "accuracy": accuracy(counts),
        "counts": counts.as_dict(),
        "n_samples": len(records),
    }


def load_scores(path, manifest: Manifest) -> list[DetectionRecord]:
    """Join an `id,score` CSV with manifest labels, ordered by manifest.

    Every manifest id must appear exactly once; unknown ids, duplicates,
    unparsable or out-of-range scores are errors.
    """
    path = Path(path)
    known = {s.id: s.label for s in manifest.samples}
    by_id: dict[str, float] = {}
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ScoresError(f"cannot read scores file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["id", "score"]:
            raise ScoresError(f"{path}: expected header 'id,score', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ScoresError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            sample_id, raw = row
            if sample_id not in known:
                raise ScoresError(f"{path}:{lineno}: unknown sample id {sample_id!r}")
            if sample_id in by_id:
                raise ScoresError(f"{path}:{lineno}: duplicate sample id {sample_id!r}")
            try:
                score = float(raw)
            except ValueError as exc:
                raise ScoresError(f"{path}:{lineno}: unparsable score {raw!r}") from exc
            if not math.isfinite(score) or not 0.0 <= score <= 1.0:
                raise ScoresError(f"{path}:{lineno}: score {score} out of [0, 1]")
            by_id[sample_id] = score
    missing = [s.id for s in manifest.samples if s.id not in by_id]
    if missing:
        raise ScoresError(f"{path}: missing scores for ids: {', '.join(missing)}")
    return [
        DetectionRecord(id=s.id, score=by_id[s.id], label=s.label)
        for s in manifest.samples
    ]


def write_scores(records, path) -> Path:
    """Write detection records as the `id,score` CSV."""
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "score"])
        for r in records:
            writer.writerow([r.id, repr(float(r.score))])
    return path
