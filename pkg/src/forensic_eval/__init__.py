"""Deterministic evaluation and dataset-hygiene engine for image
manipulation detection & localization."""

__version__ = "0.1.0"

from .cleanse import cleanse_dataset, group, similarity_matrix, ssim
from .confusion import ConfusionCounts, confusion, confusion_batch
from .corpus import (
    Manifest,
    SampleRecord,
    ShapePolicy,
    apply_shape_transform,
    decode_mask,
    decode_scoremap,
    load_manifest,
    save_manifest,
)
from .metrics_image import DetectionRecord, evaluate_image, load_scores
from .metrics_pixel import (
    PixelMetricSet,
    RocPoint,
    auc_pixel,
    evaluate_pair,
    evaluate_pixel,
    f1_binary,
    f1_invert,
    f1_macro,
    f1_micro,
    f1_negative,
    f1_permute,
    f1_weighted,
    iou,
)
from .robustness import PerturbSpec, perturb_image, run_robustness
from .synth import TamperSpec, build_test_corpus, copy_move, inpaint

__all__ = [
    "__version__",
    "ConfusionCounts",
    "DetectionRecord",
    "Manifest",
    "PerturbSpec",
    "PixelMetricSet",
    "RocPoint",
    "SampleRecord",
    "ShapePolicy",
    "TamperSpec",
    "apply_shape_transform",
    "auc_pixel",
    "build_test_corpus",
    "cleanse_dataset",
    "confusion",
    "confusion_batch",
    "copy_move",
    "decode_mask",
    "decode_scoremap",
    "evaluate_image",
    "evaluate_pair",
    "evaluate_pixel",
    "f1_binary",
    "f1_invert",
    "f1_macro",
    "f1_micro",
    "f1_negative",
    "f1_permute",
    "f1_weighted",
    "group",
    "inpaint",
    "iou",
    "load_manifest",
    "load_scores",
    "perturb_image",
    "run_robustness",
    "save_manifest",
    "similarity_matrix",
    "ssim",
]
