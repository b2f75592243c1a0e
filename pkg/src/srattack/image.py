"""Raster representation, crop/paste geometry, quantization and image file I/O.

Images are numpy arrays of shape (height, width, 3), RGB order, floating
samples on a nominal [0, 255] scale.  Every function here is pure: inputs are
never mutated and results are freshly allocated, so images can be shared
freely across threads.
"""

import numpy as np
from dataclasses import dataclass
from pathlib import Path

from PIL import Image as PILImage, UnidentifiedImageError

__all__ = [
    "BoundingBox",
    "ImageFormatError",
    "load_image",
    "save_image",
    "crop",
    "paste",
    "quantize",
    "as_image",
]


class ImageFormatError(ValueError):
    """Unsupported or corrupt image file."""


@dataclass(frozen=True)
class BoundingBox:
    """Face region in frame pixel coordinates: (x, y) top-left corner, (w, h) size."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ValueError(f"box size must be >= 1, got {self.w}x{self.h}")
        if self.x < 0 or self.y < 0:
            raise ValueError(f"box origin must be >= 0, got ({self.x}, {self.y})")

    def fits(self, height: int, width: int) -> bool:
        return self.x + self.w <= width and self.y + self.h <= height

    def clamped(self, height: int, width: int) -> "BoundingBox":
        """Clamp the box into a height x width frame, keeping at least 1x1."""
        x = min(self.x, width - 1)
        y = min(self.y, height - 1)
        return BoundingBox(x, y, min(self.w, width - x), min(self.h, height - y))

    def expanded(self, margin: float, height: int, width: int) -> "BoundingBox":
        """Grow by `margin` (fraction of w/h) on every side, clamped to the frame."""
        if margin <= 0:
            return self
        dx = int(round(self.w * margin))
        dy = int(round(self.h * margin))
        x0 = max(0, self.x - dx)
        y0 = max(0, self.y - dy)
        x1 = min(width, self.x + self.w + dx)
        y1 = min(height, self.y + self.h + dy)
        return BoundingBox(x0, y0, x1 - x0, y1 - y0)


def as_image(arr: np.ndarray) -> np.ndarray:
    """Validate an array as an image: (h, w, 3), finite floating samples."""
    a = np.asarray(arr, dtype=np.float64)
    if a.ndim != 3 or a.shape[2] != 3:
        raise ValueError(f"expected (h, w, 3) array, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"image dimensions must be >= 1, got {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("image contains non-finite samples")
    return a


def load_image(path) -> np.ndarray:
    """Decode a PNG or JPEG file into a float RGB image.

    Grayscale is replicated to three channels and an alpha channel is
    dropped; any other layout is rejected.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such image: {path}")
    try:
        with PILImage.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("RGBA", "LA"):
                im = im.convert("RGBA").convert("RGB")  # drop alpha
            elif mode == "L":
                im = im.convert("RGB")  # replicate gray
            elif mode != "RGB":
                raise ImageFormatError(f"unsupported pixel layout {mode!r} in {path}")
            arr = np.asarray(im, dtype=np.float64)
    except UnidentifiedImageError as exc:
        raise ImageFormatError(f"not a decodable image: {path}") from exc
    except (OSError, SyntaxError) as exc:
        raise ImageFormatError(f"corrupt image file: {path} ({exc})") from exc
    return arr


def save_image(img: np.ndarray, path) -> None:
    """Write a quantized image as PNG; reload reproduces samples bit-exactly.

    The image must already hold integer samples in [0, 255] (see quantize);
    rounding policy belongs to the caller, not to the encoder.
    """
    img = as_image(img)
    if img.min() < 0 or img.max() > 255:
        raise ValueError("samples outside [0, 255]; quantize before saving")
    rounded = np.rint(img)
    if not np.array_equal(rounded, img):
        raise ValueError("non-integer samples; quantize before saving")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    PILImage.fromarray(img.astype(np.uint8), mode="RGB").save(path, format="PNG")


def crop(img: np.ndarray, box: BoundingBox) -> np.ndarray:
    """Extract the box region as a new (box.h, box.w, 3) image."""
    img = as_image(img)
    h, w = img.shape[:2]
    if not box.fits(h, w):
        raise ValueError(f"box {box} outside {w}x{h} frame")
    return img[box.y : box.y + box.h, box.x : box.x + box.w].copy()


def paste(dst: np.ndarray, patch: np.ndarray, box: BoundingBox) -> np.ndarray:
    """Return a copy of dst with the box region replaced by patch."""
    dst = as_image(dst)
    patch = as_image(patch)
    h, w = dst.shape[:2]
    if not box.fits(h, w):
        raise ValueError(f"box {box} outside {w}x{h} frame")
    if patch.shape[:2] != (box.h, box.w):
        raise ValueError(
            f"patch is {patch.shape[1]}x{patch.shape[0]}, box wants {box.w}x{box.h}"
        )
    out = dst.copy()
    out[box.y : box.y + box.h, box.x : box.x + box.w] = patch
    return out


def quantize(img: np.ndarray) -> np.ndarray:
    """Clamp samples to [0, 255] and round half-away-from-zero to integers.

    floor(x + 0.5) implements half-away-from-zero for the non-negative
    clamped range (numpy's rint rounds half-to-even, which is not bit-stable
    as a golden-file convention).
    """
    img = as_image(img)
    return np.floor(np.clip(img, 0.0, 255.0) + 0.5)
