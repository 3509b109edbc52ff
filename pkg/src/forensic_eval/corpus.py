"""Dataset manifests and decoding of images, masks, and score maps.

Canonical in-memory forms are numpy planes:

* binary mask  — bool array, manipulated = True
* score map    — float32 array with values in [0, 1]
* shape mask   — bool array marking pixels that are valid for metrics

Decoding is deterministic everywhere: grayscale conversion uses integer
BT.601 weights (299, 587, 114)/1000 and binarization tests
luma/255 >= threshold.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

LUMA_WEIGHTS = (299, 587, 114)  # BT.601 per-mille weights

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg")
RAW_SCORE_EXTENSION = ".f32"


class ManifestError(ValueError):
    """Manifest violates the schema or one of its invariants."""


class DecodeError(ValueError):
    """An image, mask, or raw score file could not be decoded."""


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SampleRecord:
    """One dataset sample; paths are relative to the manifest directory."""

    id: str
    image: str
    mask: str | None
    label: int


@dataclass
class Manifest:
    """Ordered, validated collection of samples for one dataset."""

    dataset: str
    samples: list[SampleRecord]
    root: Path | None = field(default=None, compare=False)

    def __post_init__(self):
        validate_samples(self.samples)

    def __len__(self) -> int:
        return len(self.samples)

    def manipulated(self) -> list[SampleRecord]:
        return [s for s in self.samples if s.label == 1]

    def image_path(self, record: SampleRecord) -> Path:
        return self._resolve(record.image)

    def mask_path(self, record: SampleRecord) -> Path | None:
        return None if record.mask is None else self._resolve(record.mask)

    def _resolve(self, rel: str) -> Path:
        return (self.root / rel) if self.root is not None else Path(rel)


def validate_samples(samples) -> None:
    """Enforce id uniqueness, binary labels, and the label/mask coupling."""
    seen = set()
    for s in samples:
        if not isinstance(s.id, str) or not s.id:
            raise ManifestError(f"sample id must be a non-empty string, got {s.id!r}")
        if s.id in seen:
            raise ManifestError(f"duplicate sample id {s.id!r}")
        seen.add(s.id)
        if not isinstance(s.image, str) or not s.image:
            raise ManifestError(f"sample {s.id!r}: image path must be a non-empty string")
        if s.mask is not None and (not isinstance(s.mask, str) or not s.mask):
            raise ManifestError(f"sample {s.id!r}: mask path must be a string or null")
        if s.label not in (0, 1):
            raise ManifestError(f"sample {s.id!r}: label must be 0 or 1, got {s.label!r}")
        if (s.mask is None) != (s.label == 0):
            raise ManifestError(f"sample {s.id!r}: mask path must be present iff label is 1")


def load_manifest(path) -> Manifest:
    """Load and validate a manifest JSON file; sample order is preserved."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"malformed manifest JSON in {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ManifestError("manifest root must be a JSON object")
    for key in ("dataset", "samples"):
        if key not in doc:
            raise ManifestError(f"manifest missing required key {key!r}")
    if not isinstance(doc["dataset"], str):
        raise ManifestError("manifest 'dataset' must be a string")
    if not isinstance(doc["samples"], list):
        raise ManifestError("manifest 'samples' must be an array")
    samples = []
    for i, raw in enumerate(doc["samples"]):
        if not isinstance(raw, dict):
            raise ManifestError(f"sample #{i} is not an object")
        missing = {"id", "image", "mask", "label"} - raw.keys()
        if missing:
            raise ManifestError(f"sample #{i} missing fields {sorted(missing)}")
        samples.append(
            SampleRecord(id=raw["id"], image=raw["image"], mask=raw["mask"], label=raw["label"])
        )
    return Manifest(dataset=doc["dataset"], samples=samples, root=path.parent)


def save_manifest(manifest: Manifest, path) -> Path:
    """Write the manifest JSON; byte-stable for identical content."""
    doc = {
        "dataset": manifest.dataset,
        "samples": [
            {"id": s.id, "image": s.image, "mask": s.mask, "label": s.label}
            for s in manifest.samples
        ],
    }
    path = Path(path)
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return path


def build_manifest_from_dir(directory, dataset: str | None = None) -> Manifest:
    """Build a manifest from a directory with images/ and optional masks/.

    A sample is manipulated (label 1) iff masks/ holds a file with the same
    stem as its image. A mask without a matching image is an error.
    """
    directory = Path(directory)
    images_dir = directory / "images"
    masks_dir = directory / "masks"
    if not images_dir.is_dir():
        raise ManifestError(f"missing images directory {images_dir}")
    images = {}
    for p in sorted(images_dir.iterdir()):
        if p.suffix.lower() not in IMAGE_EXTENSIONS:
            continue
        if p.stem in images:
            raise ManifestError(f"duplicate image stem {p.stem!r} in {images_dir}")
        images[p.stem] = p
    masks = {}
    if masks_dir.is_dir():
        for p in sorted(masks_dir.iterdir()):
            if p.suffix.lower() not in IMAGE_EXTENSIONS:
                continue
            if p.stem not in images:
                raise ManifestError(f"orphan mask {p.name!r} has no matching image")
            masks[p.stem] = p
    samples = [
        SampleRecord(
            id=stem,
            image=f"images/{images[stem].name}",
            mask=f"masks/{masks[stem].name}" if stem in masks else None,
            label=1 if stem in masks else 0,
        )
        for stem in sorted(images)
    ]
    return Manifest(dataset=dataset or directory.name, samples=samples, root=directory)


def rebase_manifest(manifest: Manifest, new_root) -> Manifest:
    """Rewrite sample paths so they resolve relative to a different directory."""
    import os

    if manifest.root is None:
        raise ManifestError("cannot rebase a manifest that has no root directory")
    new_root = Path(new_root)
    samples = [
        SampleRecord(
            id=s.id,
            image=Path(os.path.relpath(manifest.root / s.image, new_root)).as_posix(),
            mask=None
            if s.mask is None
            else Path(os.path.relpath(manifest.root / s.mask, new_root)).as_posix(),
            label=s.label,
        )
        for s in manifest.samples
    ]
    return Manifest(dataset=manifest.dataset, samples=samples, root=new_root)


def missing_files(manifest: Manifest) -> list[str]:
    """Paths referenced by the manifest that do not exist on disk."""
    problems = []
    for s in manifest.samples:
        if not manifest.image_path(s).is_file():
            problems.append(f"sample {s.id!r}: missing image {s.image}")
        mask = manifest.mask_path(s)
        if mask is not None and not mask.is_file():
            problems.append(f"sample {s.id!r}: missing mask {s.mask}")
    return problems


# ---------------------------------------------------------------------------
# decoding
# ---------------------------------------------------------------------------


def _open_image(path) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()
    except (OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"cannot decode image {path}: {exc}") from exc
    if img.width == 0 or img.height == 0:
        raise DecodeError(f"zero-dimension image {path}")
    return img


def decode_image(path) -> np.ndarray:
    """Decode any supported image to an (H, W, 3) uint8 RGB plane."""
    img = _open_image(path)
    return np.asarray(img.convert("RGB"), dtype=np.uint8)


def encode_image(rgb: np.ndarray, path) -> Path:
    path = Path(path)
    Image.fromarray(np.asarray(rgb, dtype=np.uint8)).save(path)
    return path


def luma_u8(rgb: np.ndarray) -> np.ndarray:
    """Integer BT.601 grayscale of an RGB plane, rounded half up."""
    rgb = np.asarray(rgb, dtype=np.int64)
    milli = LUMA_WEIGHTS[0] * rgb[..., 0] + LUMA_WEIGHTS[1] * rgb[..., 1] + LUMA_WEIGHTS[2] * rgb[..., 2]
    return ((milli + 500) // 1000).astype(np.uint8)


def decode_mask(path, binarize_threshold: float = 0.5) -> np.ndarray:
    """Decode an 8-bit mask image to a bool plane.

    RGB collapses to BT.601 luma; a pixel is set iff luma/255 >= threshold.
    """
    if not 0.0 < binarize_threshold < 1.0:
        raise ValueError(f"binarize_threshold must be in (0, 1), got {binarize_threshold}")
    img = _open_image(path)
    if img.mode == "L":
        luma_milli = np.asarray(img, dtype=np.int64) * 1000
    else:
        rgb = np.asarray(img.convert("RGB"), dtype=np.int64)
        luma_milli = (
            LUMA_WEIGHTS[0] * rgb[..., 0]
            + LUMA_WEIGHTS[1] * rgb[..., 1]
            + LUMA_WEIGHTS[2] * rgb[..., 2]
        )
    return luma_milli >= binarize_threshold * 255000.0


def encode_mask(mask: np.ndarray, path) -> Path:
    """Write a bool plane as an 8-bit PNG with values {0, 255}."""
    path = Path(path)
    arr = np.where(np.asarray(mask, dtype=bool), np.uint8(255), np.uint8(0))
    Image.fromarray(arr).save(path)
    return path


def decode_prediction(path) -> np.ndarray:
    """Decode a prediction file to a score plane in its native resolution.

    8-bit images give uint8 planes (scale 255), 16-bit grayscale gives
    uint16 (scale 65535), and ``.f32`` raw files give float32 in [0, 1].
    Integer planes keep their dtype so downstream metrics can use exact
    histogram paths; ``unit_scores`` converts to [0, 1] floats.
    """
    path = Path(path)
    if path.suffix.lower() == RAW_SCORE_EXTENSION:
        return _read_raw_scores(path)
    img = _open_image(path)
    if img.mode == "L":
        return np.asarray(img, dtype=np.uint8)
    if img.mode in ("I;16", "I;16B", "I;16L", "I"):
        arr = np.asarray(img, dtype=np.int64)
        if arr.min() < 0 or arr.max() > 65535:
            raise DecodeError(f"{path}: 16-bit scoremap values out of range")
        return arr.astype(np.uint16)
    rgb = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return luma_u8(rgb)


def decode_scoremap(path) -> np.ndarray:
    """Decode a prediction file to a float32 score plane in [0, 1].

    Integer images scale by their type maximum (255 or 65535).
    """
    return unit_scores(decode_prediction(path))


def _read_raw_scores(path: Path) -> np.ndarray:
    data = path.read_bytes()
    if len(data) < 8:
        raise DecodeError(f"{path}: truncated raw score file")
    width, height = struct.unpack("<II", data[:8])
    if width == 0 or height == 0:
        raise DecodeError(f"{path}: zero-dimension raw score file")
    expected = 8 + 4 * width * height
    if len(data) != expected:
        raise DecodeError(f"{path}: expected {expected} bytes, got {len(data)}")
    arr = np.frombuffer(data, dtype="<f4", offset=8).reshape(height, width).copy()
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise DecodeError(f"{path}: raw scores out of [0, 1]")
    return arr


def write_raw_scores(scores: np.ndarray, path) -> Path:
    """Write a float score plane as a raw .f32 file (LE u32 w, h + f32 data)."""
    scores = np.asarray(scores, dtype="<f4")
    if scores.ndim != 2:
        raise ValueError("raw score plane must be 2-D")
    path = Path(path)
    height, width = scores.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", width, height))
        fh.write(scores.tobytes())
    return path


# ---------------------------------------------------------------------------
# score-plane utilities
# ---------------------------------------------------------------------------


def _integer_scale(dtype) -> int:
    return int(np.iinfo(dtype).max)


def unit_scores(plane: np.ndarray) -> np.ndarray:
    """Convert any score plane to float32 in [0, 1]."""
    plane = np.asarray(plane)
    if plane.dtype == bool:
        return plane.astype(np.float32)
    if plane.dtype.kind in "ui":
        return (plane.astype(np.float64) / _integer_scale(plane.dtype)).astype(np.float32)
    arr = plane.astype(np.float32)
    if not np.all(np.isfinite(arr)) or (arr.size and (arr.min() < 0.0 or arr.max() > 1.0)):
        raise ValueError("float score plane must be finite and within [0, 1]")
    return arr


def binarize_scores(plane: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Threshold a score plane: predicted-manipulated iff score >= threshold."""
    plane = np.asarray(plane)
    if plane.dtype == bool:
        return plane.copy()
    if plane.dtype.kind in "ui":
        return plane.astype(np.float64) / _integer_scale(plane.dtype) >= threshold
    return plane >= threshold


def invert_scores(plane: np.ndarray) -> np.ndarray:
    """Complement a score plane (flips prediction polarity)."""
    plane = np.asarray(plane)
    if plane.dtype == bool:
        return ~plane
    if plane.dtype.kind in "ui":
        return (_integer_scale(plane.dtype) - plane.astype(np.int64)).astype(plane.dtype)
    return (1.0 - plane).astype(plane.dtype)


# ---------------------------------------------------------------------------
# shape transforms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ShapePolicy:
    """Shaping strategy: one of pad_to, center_crop, resize."""

    kind: str
    width: int
    height: int

    def __post_init__(self):
        if self.kind not in ("pad_to", "center_crop", "resize"):
            raise ValueError(f"unknown shape policy {self.kind!r}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("shape policy target dimensions must be positive")


def pad_to(plane: np.ndarray, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Zero-pad to (height, width) with the original at the top-left.

    The returned shape mask marks exactly the original region valid.
    """
    plane = np.asarray(plane)
    h, w = plane.shape
    if width < w or height < h:
        raise ValueError(f"pad_to target ({width}x{height}) smaller than source ({w}x{h})")
    out = np.zeros((height, width), dtype=plane.dtype)
    out[:h, :w] = plane
    shape_mask = np.zeros((height, width), dtype=bool)
    shape_mask[:h, :w] = True
    return out, shape_mask


def center_crop(plane: np.ndarray, width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Centered crop to (height, width); every output pixel is valid."""
    plane = np.asarray(plane)
    h, w = plane.shape
    if width > w or height > h:
        raise ValueError(f"crop ({width}x{height}) larger than source ({w}x{h})")
    top = (h - height) // 2
    left = (w - width) // 2
    out = plane[top : top + height, left : left + width].copy()
    return out, np.ones((height, width), dtype=bool)


def _nearest_indices(n_src: int, n_dst: int) -> np.ndarray:
    # floor((i + 0.5) * n_src / n_dst) in exact integer arithmetic
    return ((2 * np.arange(n_dst, dtype=np.int64) + 1) * n_src) // (2 * n_dst)


def resize_nearest(plane: np.ndarray, width: int, height: int) -> np.ndarray:
    """Nearest-neighbor resize with half-pixel centers."""
    plane = np.asarray(plane)
    rows = _nearest_indices(plane.shape[0], height)
    cols = _nearest_indices(plane.shape[1], width)
    return plane[np.ix_(rows, cols)].copy()


def _linear_coords(n_src: int, n_dst: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = (np.arange(n_dst, dtype=np.float64) + 0.5) * (n_src / n_dst) - 0.5
    x = np.clip(x, 0.0, n_src - 1.0)
    lo = np.floor(x).astype(np.int64)
    hi = np.minimum(lo + 1, n_src - 1)
    return lo, hi, x - lo


def resize_bilinear(plane: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resize with half-pixel centers and clamped edges (float64)."""
    src = np.asarray(plane, dtype=np.float64)
    ylo, yhi, fy = _linear_coords(src.shape[0], height)
    xlo, xhi, fx = _linear_coords(src.shape[1], width)
    a = src[np.ix_(ylo, xlo)]
    b = src[np.ix_(ylo, xhi)]
    c = src[np.ix_(yhi, xlo)]
    d = src[np.ix_(yhi, xhi)]
    fx = fx[None, :]
    fy = fy[:, None]
    top = a * (1.0 - fx) + b * fx
    bottom = c * (1.0 - fx) + d * fx
    return top * (1.0 - fy) + bottom * fy


def apply_shape_transform(plane: np.ndarray, policy: ShapePolicy) -> tuple[np.ndarray, np.ndarray]:
    """Apply a shaping policy; returns (transformed plane, shape mask).

    Resize is nearest-neighbor for bool planes and bilinear (float32)
    for score planes; resized and cropped planes are valid everywhere.
    """
    plane = np.asarray(plane)
    if policy.kind == "pad_to":
        return pad_to(plane, policy.width, policy.height)
    if policy.kind == "center_crop":
        return center_crop(plane, policy.width, policy.height)
    if plane.dtype == bool:
        out = resize_nearest(plane, policy.width, policy.height)
    else:
        out = resize_bilinear(plane, policy.width, policy.height).astype(np.float32)
    return out, np.ones((policy.height, policy.width), dtype=bool)
