"""Naive tamper synthesis: copy-move and inpaint-style region fills.

Rectangular regions keep the emitted ground-truth masks exact, and every
output is a pure function of (seed, sample id, spec), so synthesized
corpora double as end-to-end fixtures with known metric outcomes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Manifest, SampleRecord, encode_image, encode_mask, save_manifest
from .util import ensure_dir, stable_rng

TAMPER_KINDS = ("copy_move", "inpaint")

PREDICTION_SETS = ("perfect", "empty", "complement")


class ImageTooSmallError(ValueError):
    """Image cannot host a tamper rectangle under the given spec."""


@dataclass(frozen=True)
class TamperSpec:
    kind: str
    area_fraction_range: tuple[float, float] = (0.01, 0.15)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in TAMPER_KINDS:
            raise ValueError(f"unknown tamper kind {self.kind!r}")
        lo, hi = self.area_fraction_range
        if not 0.0 < lo <= hi < 1.0:
            raise ValueError(f"area fraction range must satisfy 0 < lo <= hi < 1, got ({lo}, {hi})")


def _rect_side(rng: np.random.Generator, spec: TamperSpec, width: int, height: int) -> int:
    lo, hi = spec.area_fraction_range
    short = min(width, height)
    side = int(math.floor(rng.uniform(math.sqrt(lo), math.sqrt(hi)) * short + 0.5))
    return max(1, min(side, short))


def copy_move(img: np.ndarray, spec: TamperSpec, sample_id: str) -> tuple[np.ndarray, np.ndarray]:
    """Copy a square region to a different position; mask = destination.

    Deterministic per (seed, sample_id). The destination receives pixels
    from the original image, so overlapping source/destination behaves as
    a single simultaneous copy.
    """
    img = np.asarray(img, dtype=np.uint8)
    height, width = img.shape[:2]
    rng = stable_rng(spec.seed, sample_id)
    side = _rect_side(rng, spec, width, height)
    max_y = height - side
    max_x = width - side
    if max_y == 0 and max_x == 0:
        raise ImageTooSmallError(
            f"sample {sample_id!r}: {width}x{height} image has a single placement for side {side}"
        )
    src = (int(rng.integers(0, max_y + 1)), int(rng.integers(0, max_x + 1)))
    dst = src
    while dst == src:
        dst = (int(rng.integers(0, max_y + 1)), int(rng.integers(0, max_x + 1)))
    out = img.copy()
    out[dst[0] : dst[0] + side, dst[1] : dst[1] + side] = img[
        src[0] : src[0] + side, src[1] : src[1] + side
    ]
    mask = np.zeros((height, width), dtype=bool)
    mask[dst[0] : dst[0] + side, dst[1] : dst[1] + side] = True
    return out, mask


def inpaint(img: np.ndarray, spec: TamperSpec, sample_id: str) -> tuple[np.ndarray, np.ndarray]:
    """Fill a square region with the mean color of its 1-pixel border ring.

    The rectangle is placed with a 1-pixel margin so the ring is complete;
    the fill is the per-channel integer mean, rounded half up.
    """
    img = np.asarray(img, dtype=np.uint8)
    height, width = img.shape[:2]
    rng = stable_rng(spec.seed, sample_id)
    side = _rect_side(rng, spec, width, height)
    if side + 2 > min(width, height):
        side = min(width, height) - 2
    if side < 1:
        raise ImageTooSmallError(
            f"sample {sample_id!r}: {width}x{height} image too small for a ringed rectangle"
        )
    y0 = int(rng.integers(1, height - side))
    x0 = int(rng.integers(1, width - side))
    ring = np.concatenate(
        [
            img[y0 - 1, x0 - 1 : x0 + side + 1].reshape(-1, 3),
            img[y0 + side, x0 - 1 : x0 + side + 1].reshape(-1, 3),
            img[y0 : y0 + side, x0 - 1].reshape(-1, 3),
            img[y0 : y0 + side, x0 + side].reshape(-1, 3),
        ]
    )
    sums = ring.astype(np.int64).sum(axis=0)
    count = ring.shape[0]
    fill = ((2 * sums + count) // (2 * count)).astype(np.uint8)  # round half up
    out = img.copy()
    out[y0 : y0 + side, x0 : x0 + side] = fill
    mask = np.zeros((height, width), dtype=bool)
    mask[y0 : y0 + side, x0 : x0 + side] = True
    return out, mask


def tamper(img: np.ndarray, spec: TamperSpec, sample_id: str) -> tuple[np.ndarray, np.ndarray]:
    if spec.kind == "copy_move":
        return copy_move(img, spec, sample_id)
    return inpaint(img, spec, sample_id)


def base_image(seed: int, sample_id: str, size: tuple[int, int]) -> np.ndarray:
    """Procedural RGB base image: oriented gradients, a sinusoid, mild noise.

    Smooth by construction so JPEG round-trips at high quality stay close.
    """
    width, height = size
    rng = stable_rng(seed, "base", sample_id)
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    if width > 1:
        xx /= width - 1
    if height > 1:
        yy /= height - 1
    img = np.empty((height, width, 3), dtype=np.float64)
    for channel in range(3):
        ax, ay = rng.uniform(-1.0, 1.0, size=2)
        freq = rng.uniform(1.0, 3.0)
        theta = rng.uniform(0.0, 2.0 * math.pi)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        wave = np.sin(2.0 * math.pi * freq * (xx * math.cos(theta) + yy * math.sin(theta)) + phase)
        plane = ax * xx + ay * yy + 0.5 * wave
        lo, hi = plane.min(), plane.max()
        span = hi - lo if hi > lo else 1.0
        img[..., channel] = 28.0 + 200.0 * (plane - lo) / span
    img += rng.normal(0.0, 2.0, size=img.shape)
    return np.clip(np.floor(img + 0.5), 0, 255).astype(np.uint8)


def build_test_corpus(n: int, size: tuple[int, int], spec: TamperSpec, out_dir) -> Manifest:
    """Generate a tampered corpus plus three prediction sets on disk.

    Layout: images/, masks/, preds_perfect/, preds_empty/,
    preds_complement/, and manifest.json. Known outcomes: perfect
    predictions score F1 = 1, empty ones F1 = 0 with invert-F1 =
    2w/(1+w) for white fraction w, complemented ones F1 = 0 with
    permute-F1 = 1.
    """
    if n <= 0:
        raise ValueError(f"corpus size must be positive, got {n}")
    out_dir = ensure_dir(out_dir)
    images_dir = ensure_dir(out_dir / "images")
    masks_dir = ensure_dir(out_dir / "masks")
    pred_dirs = {name: ensure_dir(out_dir / f"preds_{name}") for name in PREDICTION_SETS}
    samples = []
    for i in range(n):
        sample_id = f"synth_{i:04d}"
        base = base_image(spec.seed, sample_id, size)
        tampered, mask = tamper(base, spec, sample_id)
        encode_image(tampered, images_dir / f"{sample_id}.png")
        encode_mask(mask, masks_dir / f"{sample_id}.png")
        encode_mask(mask, pred_dirs["perfect"] / f"{sample_id}.png")
        encode_mask(np.zeros_like(mask), pred_dirs["empty"] / f"{sample_id}.png")
        encode_mask(~mask, pred_dirs["complement"] / f"{sample_id}.png")
        samples.append(
            SampleRecord(
                id=sample_id,
                image=f"images/{sample_id}.png",
                mask=f"masks/{sample_id}.png",
                label=1,
            )
        )
    manifest = Manifest(dataset=f"synthetic-{spec.kind}", samples=samples, root=Path(out_dir))
    save_manifest(manifest, out_dir / "manifest.json")
    return manifest
