"""SSIM-based label-leakage detection and dataset deduplication.

Pipeline: pairwise SSIM matrix over grayscale 256x256 renditions of the
manipulated images, threshold into a similarity graph, collapse connected
components (equivalently: equivalence classes of the transitive closure),
keep one deterministic representative per component. The group report
preserves every member and pairwise value so a human can re-draw the
line; the heatmap CSV is the raw matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .corpus import (
    DecodeError,
    Manifest,
    decode_image,
    luma_u8,
    resize_bilinear,
)
from .util import parallel_map

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_L = 255

DEFAULT_THRESHOLD = 0.9
DEFAULT_RESIZE = (256, 256)


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    radius = (size - 1) // 2
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return w / w.sum()


def _filter_valid(plane: np.ndarray, window: np.ndarray) -> np.ndarray:
    """Separable windowed correlation, cropped to fully-covered positions."""
    radius = (window.size - 1) // 2
    out = correlate1d(plane, window, axis=0, mode="constant")
    out = correlate1d(out, window, axis=1, mode="constant")
    return out[radius:-radius, radius:-radius]


@dataclass(frozen=True)
class _PlaneStats:
    """Per-image filtered quantities reused across all pairings."""

    plane: np.ndarray
    mu: np.ndarray
    var: np.ndarray


def _plane_stats(plane: np.ndarray, window: np.ndarray) -> _PlaneStats:
    mu = _filter_valid(plane, window)
    var = _filter_valid(plane * plane, window) - mu * mu
    return _PlaneStats(plane=plane, mu=mu, var=var)


def _ssim_from_stats(a: _PlaneStats, b: _PlaneStats, window: np.ndarray) -> float:
    c1 = (SSIM_K1 * SSIM_L) ** 2
    c2 = (SSIM_K2 * SSIM_L) ** 2
    mu_ab = a.mu * b.mu
    cov = _filter_valid(a.plane * b.plane, window) - mu_ab
    ssim_map = ((2.0 * mu_ab + c1) * (2.0 * cov + c2)) / (
        (a.mu * a.mu + b.mu * b.mu + c1) * (a.var + b.var + c2)
    )
    return float(ssim_map.mean())


def ssim(a: np.ndarray, b: np.ndarray) -> float:
    """Mean structural similarity of two grayscale planes.

    11x11 Gaussian window (sigma 1.5), C1 = (0.01*255)^2,
    C2 = (0.03*255)^2, window means over fully-covered positions only.
    Symmetric by construction: ssim(a, b) == ssim(b, a) exactly.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if a.ndim != 2 or min(a.shape) < SSIM_WINDOW:
        raise ValueError(f"planes must be 2-D and at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    window = _gaussian_window()
    return _ssim_from_stats(_plane_stats(a, window), _plane_stats(b, window), window)


# ---------------------------------------------------------------------------
# pairwise matrix and grouping
# ---------------------------------------------------------------------------


@dataclass
class SimilarityMatrix:
    ids: list[str]
    values: np.ndarray  # n x n float64, symmetric, unit diagonal

    def __post_init__(self):
        n = len(self.ids)
        if self.values.shape != (n, n):
            raise ValueError(f"matrix shape {self.values.shape} does not match {n} ids")


def similarity_matrix(
    items, resize_to: tuple[int, int] = DEFAULT_RESIZE, workers: int | None = None
) -> SimilarityMatrix:
    """Pairwise SSIM over (id, image plane) items at a common resolution.

    Images are converted to grayscale and bilinearly resized; only the
    upper triangle is computed and mirrored.
    """
    items = list(items)
    if len(items) < 2:
        raise ValueError(f"need at least 2 images, got {len(items)}")
    ids = [item[0] for item in items]
    window = _gaussian_window()
    width, height = resize_to

    def prepare(item):
        plane = np.asarray(item[1])
        if plane.ndim == 3:
            plane = luma_u8(plane)
        resized = resize_bilinear(plane.astype(np.float64), width, height)
        gray = np.clip(np.floor(resized + 0.5), 0, 255)  # round half up to 8-bit levels
        return _plane_stats(gray, window)

    stats = parallel_map(prepare, items, workers)
    n = len(items)
    values = np.ones((n, n), dtype=np.float64)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    results = parallel_map(lambda p: _ssim_from_stats(stats[p[0]], stats[p[1]], window), pairs, workers)
    for (i, j), value in zip(pairs, results):
        values[i, j] = value
        values[j, i] = value
    return SimilarityMatrix(ids=ids, values=values)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))
        self.rank = [0] * n

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:  # path compression
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: int, y: int) -> None:
        rx, ry = self.find(x), self.find(y)
        if rx == ry:
            return
        if self.rank[rx] < self.rank[ry]:
            rx, ry = ry, rx
        self.parent[ry] = rx
        if self.rank[rx] == self.rank[ry]:
            self.rank[rx] += 1


@dataclass
class SimilarityGroups:
    threshold: float
    components: list[list[str]]  # members sorted; components sorted by representative
    representatives: list[str]


def group(matrix: SimilarityMatrix, threshold: float = DEFAULT_THRESHOLD) -> SimilarityGroups:
    """Connected components of the thresholded similarity graph.

    Adjacency is symmetric, so the components equal the equivalence
    classes of the transitive closure. The representative is the
    lexicographically smallest id of each component.
    """
    if not 0.0 < threshold <= 1.0:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    n = len(matrix.ids)
    uf = _UnionFind(n)
    adjacent = matrix.values >= threshold
    for i in range(n):
        for j in range(i + 1, n):
            if adjacent[i, j]:
                uf.union(i, j)
    by_root: dict[int, list[str]] = {}
    for i, sample_id in enumerate(matrix.ids):
        by_root.setdefault(uf.find(i), []).append(sample_id)
    components = sorted((sorted(members) for members in by_root.values()), key=lambda c: c[0])
    return SimilarityGroups(
        threshold=threshold,
        components=components,
        representatives=[c[0] for c in components],
    )


# ---------------------------------------------------------------------------
# dataset cleansing
# ---------------------------------------------------------------------------


@dataclass
class CleanseResult:
    manifest: Manifest
    groups: SimilarityGroups
    matrix: SimilarityMatrix
    report: dict


def cleanse_dataset(
    manifest: Manifest,
    threshold: float = DEFAULT_THRESHOLD,
    *,
    resize_to: tuple[int, int] = DEFAULT_RESIZE,
    workers: int | None = None,
) -> CleanseResult:
    """Deduplicate the manipulated samples of a manifest by SSIM grouping.

    Keeps exactly one representative per similarity component; authentic
    samples pass through untouched. The report lists every component with
    member ids and pairwise SSIM values for manual review.
    """
    manipulated = manifest.manipulated()
    if len(manipulated) < 2:
        raise ValueError(f"need at least 2 manipulated samples, got {len(manipulated)}")

    def load(record):
        try:
            return record.id, decode_image(manifest.image_path(record))
        except DecodeError as exc:
            raise DecodeError(f"sample {record.id!r}: {exc}") from exc

    items = parallel_map(load, manipulated, workers)
    matrix = similarity_matrix(items, resize_to=resize_to, workers=workers)
    groups = group(matrix, threshold)
    keep = set(groups.representatives)
    kept_samples = [s for s in manifest.samples if s.label == 0 or s.id in keep]
    cleansed = Manifest(
        dataset=f"{manifest.dataset}-C", samples=kept_samples, root=manifest.root
    )
    index = {sample_id: i for i, sample_id in enumerate(matrix.ids)}
    report = {
        "threshold": threshold,
        "resize": [resize_to[0], resize_to[1]],
        "n_manipulated": len(manipulated),
        "n_kept": len(keep),
        "components": [
            {
                "members": members,
                "representative": members[0],
                "pairwise": [
                    [a, b, matrix.values[index[a], index[b]]]
                    for k, a in enumerate(members)
                    for b in members[k + 1 :]
                ],
            }
            for members in groups.components
        ],
    }
    return CleanseResult(manifest=cleansed, groups=groups, matrix=matrix, report=report)


def heatmap_csv_rows(matrix: SimilarityMatrix) -> list[list[float]]:
    """Raw matrix rows for the heatmap CSV (row-major, no header)."""
    return [[float(v) for v in row] for row in matrix.values]
