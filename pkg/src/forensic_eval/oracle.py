"""Slow, independent reference implementations.

These deliberately avoid the vectorized engine paths: per-pixel Python
loops, literal pair counting, and an explicit windowed SSIM. The test
suite checks the engine against them, and the throughput comparison
treats the scalar pixel pipeline here as the single-threaded baseline.
"""

from __future__ import annotations

import math

import numpy as np


def confusion_loop(pred, gt, shape=None) -> tuple[int, int, int, int]:
    """Per-pixel scalar confusion counts: (tp, tn, fp, fn)."""
    pred_rows = np.asarray(pred, dtype=bool).tolist()
    gt_rows = np.asarray(gt, dtype=bool).tolist()
    shape_rows = None if shape is None else np.asarray(shape, dtype=bool).tolist()
    tp = tn = fp = fn = 0
    for y, (prow, grow) in enumerate(zip(pred_rows, gt_rows)):
        srow = None if shape_rows is None else shape_rows[y]
        for x, (p, g) in enumerate(zip(prow, grow)):
            if srow is not None and not srow[x]:
                continue
            if p and g:
                tp += 1
            elif p and not g:
                fp += 1
            elif g:
                fn += 1
            else:
                tn += 1
    return tp, tn, fp, fn


def auc_pairwise(scores, labels) -> float:
    """Literal rank statistic: mean over (pos, neg) pairs of win + half-tie.

    Quadratic; for small instances only.
    """
    scores = [float(s) for s in np.asarray(scores).reshape(-1)]
    labels = [bool(l) for l in np.asarray(labels).reshape(-1)]
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    if not pos or not neg:
        raise ValueError("AUC undefined for single-class labels")
    wins = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                wins += 1.0
            elif sp == sn:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def auc_midrank(scores, labels) -> float:
    """Rank statistic via midranks (pure Python, O(n log n)).

    Equal to auc_pairwise; usable on full-size score planes where the
    quadratic form is not.
    """
    scores = [float(s) for s in np.asarray(scores).reshape(-1)]
    labels = [bool(l) for l in np.asarray(labels).reshape(-1)]
    n_pos = sum(labels)
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC undefined for single-class labels")
    order = sorted(range(len(scores)), key=lambda i: scores[i])
    rank_sum_pos = 0.0
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and scores[order[j + 1]] == scores[order[i]]:
            j += 1
        midrank = (i + j) / 2.0 + 1.0  # ranks are 1-based
        for k in range(i, j + 1):
            if labels[order[k]]:
                rank_sum_pos += midrank
        i = j + 1
    u_statistic = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u_statistic / (n_pos * n_neg)


def pixel_metrics_loop(scores, gt) -> dict:
    """Scalar single-threaded pixel pipeline: F1, AUC, ACC, IoU.

    The throughput baseline: per-pixel confusion loop at threshold 0.5
    plus the midrank AUC, all in plain Python.
    """
    score_list = [float(s) for s in np.asarray(scores).reshape(-1)]
    if np.asarray(scores).dtype.kind in "ui":
        scale = float(np.iinfo(np.asarray(scores).dtype).max)
        score_list = [s / scale for s in score_list]
    gt_list = [bool(g) for g in np.asarray(gt, dtype=bool).reshape(-1)]
    tp = tn = fp = fn = 0
    for s, g in zip(score_list, gt_list):
        p = s >= 0.5
        if p and g:
            tp += 1
        elif p:
            fp += 1
        elif g:
            fn += 1
        else:
            tn += 1
    f1 = 1.0 if 2 * tp + fp + fn == 0 else 2.0 * tp / (2 * tp + fp + fn)
    iou_val = 1.0 if tp + fp + fn == 0 else tp / (tp + fp + fn)
    acc = (tp + tn) / (tp + tn + fp + fn)
    auc = auc_midrank(score_list, gt_list)
    return {"f1": f1, "auc": auc, "accuracy": acc, "iou": iou_val}


def ssim_windowed(a, b, window_size: int = 11, sigma: float = 1.5) -> float:
    """SSIM by looping every fully-covered window position explicitly."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    radius = (window_size - 1) // 2
    coords = np.arange(-radius, radius + 1, dtype=np.float64)
    window = np.exp(-(coords[:, None] ** 2 + coords[None, :] ** 2) / (2.0 * sigma * sigma))
    window /= window.sum()
    c1 = (0.01 * 255.0) ** 2
    c2 = (0.03 * 255.0) ** 2
    height, width = a.shape
    total = 0.0
    count = 0
    for y in range(radius, height - radius):
        for x in range(radius, width - radius):
            pa = a[y - radius : y + radius + 1, x - radius : x + radius + 1]
            pb = b[y - radius : y + radius + 1, x - radius : x + radius + 1]
            mu_a = float((window * pa).sum())
            mu_b = float((window * pb).sum())
            var_a = float((window * pa * pa).sum()) - mu_a * mu_a
            var_b = float((window * pb * pb).sum()) - mu_b * mu_b
            cov = float((window * pa * pb).sum()) - mu_a * mu_b
            total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) / (
                (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
            )
            count += 1
    return total / count


def warshall_closure(adjacency) -> np.ndarray:
    """Boolean transitive closure (reflexive) via the Floyd-Warshall recurrence."""
    adj = np.asarray(adjacency, dtype=bool)
    n = adj.shape[0]
    closure = adj | np.eye(n, dtype=bool)
    for k in range(n):
        closure |= np.outer(closure[:, k], closure[k, :])
    return closure


def closure_classes(adjacency) -> list[frozenset]:
    """Equivalence classes of the transitive closure of a symmetric graph."""
    closure = warshall_closure(adjacency)
    classes = []
    seen: set[int] = set()
    for i in range(closure.shape[0]):
        if i in seen:
            continue
        members = frozenset(int(j) for j in np.nonzero(closure[i])[0])
        seen.update(members)
        classes.append(members)
    return classes


def border_ring_mean(img, y0: int, x0: int, side: int) -> tuple[int, int, int]:
    """Per-channel mean of the 1-pixel ring around a square, rounded half up."""
    img = np.asarray(img, dtype=np.int64)
    sums = [0, 0, 0]
    count = 0
    for y in range(y0 - 1, y0 + side + 1):
        for x in range(x0 - 1, x0 + side + 1):
            inside = y0 <= y < y0 + side and x0 <= x < x0 + side
            if inside:
                continue
            for c in range(3):
                sums[c] += int(img[y, x, c])
            count += 1
    return tuple(int(math.floor(s / count + 0.5)) for s in sums)
