"""srattack: super-resolution face attack toolkit.

Applies a downscale/SR-upscale round-trip to face regions of images and
evaluates the effect on external deepfake detectors: manifest tooling, a
from-scratch EDSR-style inference engine, bicubic resampling, SSIM/PSNR
similarity metrics and FNR/FPR/ROC/AUC score evaluation.
"""

__version__ = "0.1.0"

from .attack import AttackConfig, AttackRecord, attack_batch, attack_face
from .detection import (
    ConfusionCounts,
    EvalRow,
    ScoreRecord,
    auc,
    classification_metrics,
    confusion_at_threshold,
    evaluate_setup,
    roc_curve,
)
from .engine import ConvLayer, SrModel, forward, load_weights, pixel_shuffle, write_weights
from .image import BoundingBox, crop, load_image, paste, quantize, save_image
from .manifest import ManifestEntry, SplitSpec, build_manifest, read_boxes, validate_manifest
from .metrics import mse, pearson_corr, psnr, similarity_report, ssim
from .resample import downscale, pad_to_multiple, unpad, upscale_bicubic

__all__ = [
    "__version__",
    "AttackConfig",
    "AttackRecord",
    "BoundingBox",
    "ConfusionCounts",
    "ConvLayer",
    "EvalRow",
    "ManifestEntry",
    "ScoreRecord",
    "SplitSpec",
    "SrModel",
    "attack_batch",
    "attack_face",
    "auc",
    "build_manifest",
    "classification_metrics",
    "confusion_at_threshold",
    "crop",
    "downscale",
    "evaluate_setup",
    "forward",
    "load_image",
    "load_weights",
    "mse",
    "pad_to_multiple",
    "paste",
    "pearson_corr",
    "pixel_shuffle",
    "psnr",
    "quantize",
    "read_boxes",
    "roc_curve",
    "save_image",
    "similarity_report",
    "ssim",
    "unpad",
    "upscale_bicubic",
    "validate_manifest",
    "write_weights",
]
