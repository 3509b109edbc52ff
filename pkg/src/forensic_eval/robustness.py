"""Deterministic perturbation generators and the robustness-curve harness.

Perturbation kinds: Gaussian blur, additive Gaussian noise, JPEG
recompression. Only images are perturbed, never ground-truth masks.
Model inference over the perturbed corpora happens outside this engine;
the harness evaluates one prediction directory per level.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import correlate1d

from .corpus import Manifest, decode_image, encode_image
from .metrics_pixel import METRIC_FIELDS, PixelReport, evaluate_pixel
from .util import ensure_dir, parallel_map, stable_rng

PERTURB_KINDS = ("gaussian_blur", "gaussian_noise", "jpeg_compress")

DEFAULT_LEVELS = {
    "gaussian_blur": (0, 3, 7, 11, 15, 19),
    "gaussian_noise": (0, 3, 7, 11, 15, 23),
    "jpeg_compress": (100, 90, 80, 70, 60, 50),
}


@dataclass(frozen=True)
class PerturbSpec:
    kind: str
    levels: tuple
    seed: int

    def __post_init__(self):
        if self.kind not in PERTURB_KINDS:
            raise ValueError(f"unknown perturbation kind {self.kind!r}")
        if not self.levels:
            raise ValueError("levels must be non-empty")
        object.__setattr__(self, "levels", tuple(self.levels))
        for level in self.levels:
            if self.kind == "gaussian_blur":
                k = int(level)
                if k != level or k < 0 or (k != 0 and k % 2 == 0):
                    raise ValueError(f"blur kernel size must be 0 or odd, got {level}")
            elif self.kind == "gaussian_noise":
                if level < 0:
                    raise ValueError(f"noise sigma must be >= 0, got {level}")
            else:
                if not 1 <= level <= 100:
                    raise ValueError(f"jpeg quality must be in [1, 100], got {level}")


def default_spec(kind: str, seed: int) -> PerturbSpec:
    return PerturbSpec(kind=kind, levels=DEFAULT_LEVELS[kind], seed=seed)


def _round_u8(arr: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(arr + 0.5), 0, 255).astype(np.uint8)


def blur_sigma(kernel_size: int) -> float:
    """Sigma derived from the kernel size: 0.3*((k-1)/2 - 1) + 0.8."""
    return 0.3 * ((kernel_size - 1) / 2.0 - 1.0) + 0.8


def _gaussian_kernel(kernel_size: int) -> np.ndarray:
    sigma = blur_sigma(kernel_size)
    radius = (kernel_size - 1) // 2
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    weights = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return weights / weights.sum()


def gaussian_blur(img: np.ndarray, kernel_size: int) -> np.ndarray:
    """Separable Gaussian blur with reflect borders; k = 0 is an exact no-op."""
    img = np.asarray(img, dtype=np.uint8)
    if kernel_size == 0:
        return img.copy()
    kernel = _gaussian_kernel(kernel_size)
    out = img.astype(np.float64)
    for axis in (0, 1):
        out = correlate1d(out, kernel, axis=axis, mode="reflect")
    return _round_u8(out)


def gaussian_noise(img: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Additive i.i.d. Gaussian noise on the 0-255 scale, clamped; sigma 0 is a no-op."""
    img = np.asarray(img, dtype=np.uint8)
    if sigma == 0:
        return img.copy()
    noisy = img.astype(np.float64) + rng.normal(0.0, sigma, size=img.shape)
    return _round_u8(noisy)


def jpeg_roundtrip(img: np.ndarray, quality: int) -> np.ndarray:
    """Encode at the given quality with 4:2:0 subsampling, then decode."""
    img = np.asarray(img, dtype=np.uint8)
    buf = io.BytesIO()
    Image.fromarray(img).save(buf, format="JPEG", quality=int(quality), subsampling=2)
    buf.seek(0)
    with Image.open(buf) as decoded:
        return np.asarray(decoded.convert("RGB"), dtype=np.uint8)


def perturb_image(
    img: np.ndarray, spec: PerturbSpec, level_index: int, sample_id: str
) -> np.ndarray:
    """Apply spec.levels[level_index] to one RGB image.

    Noise draws from a generator seeded by (seed, sample_id, level_index),
    so outputs are reproducible per sample and independent across samples.
    """
    if not 0 <= level_index < len(spec.levels):
        raise IndexError(f"level index {level_index} out of range for {len(spec.levels)} levels")
    level = spec.levels[level_index]
    if spec.kind == "gaussian_blur":
        return gaussian_blur(img, int(level))
    if spec.kind == "gaussian_noise":
        rng = stable_rng(spec.seed, sample_id, level_index)
        return gaussian_noise(img, float(level), rng)
    return jpeg_roundtrip(img, int(level))


def perturb_manifest(
    manifest: Manifest, spec: PerturbSpec, out_dir, workers: int | None = None
) -> dict:
    """Write perturbed copies of every sample image per level.

    Output layout: <out>/<kind>/<level>/<id>.png. Returns
    {level: directory} in level order.
    """
    out_dir = Path(out_dir)
    level_dirs = {
        level: ensure_dir(out_dir / spec.kind / str(level)) for level in spec.levels
    }
    tasks = [
        (record, level_index)
        for record in manifest.samples
        for level_index in range(len(spec.levels))
    ]

    def one(task):
        record, level_index = task
        img = decode_image(manifest.image_path(record))
        out = perturb_image(img, spec, level_index, record.id)
        encode_image(out, level_dirs[spec.levels[level_index]] / f"{record.id}.png")

    parallel_map(one, tasks, workers)
    return level_dirs


@dataclass
class RobustnessCurve:
    kind: str
    levels: list
    reports: list[PixelReport]

    def rows(self, metrics=None) -> list[tuple]:
        """(kind, level, metric, value) rows in level order."""
        names = METRIC_FIELDS if metrics is None else metrics
        out = []
        for level, report in zip(self.levels, self.reports):
            for name in names:
                out.append((self.kind, level, name, report.aggregate.get(name)))
        return out


def run_robustness(
    manifest: Manifest,
    pred_dirs,
    spec: PerturbSpec,
    *,
    threshold: float = 0.5,
    aggregate: str = "mean",
    workers: int | None = None,
) -> RobustnessCurve:
    """Evaluate pixel metrics per level; one prediction directory per level."""
    pred_dirs = list(pred_dirs)
    if len(pred_dirs) != len(spec.levels):
        raise ValueError(
            f"{len(spec.levels)} levels but {len(pred_dirs)} prediction directories"
        )
    reports = [
        evaluate_pixel(
            manifest,
            pred_dir,
            threshold=threshold,
            aggregate=aggregate,
            workers=workers,
        )
        for pred_dir in pred_dirs
    ]
    return RobustnessCurve(kind=spec.kind, levels=list(spec.levels), reports=reports)
