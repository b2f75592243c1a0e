"""Deterministic downscale by 1/K and bicubic upscale by K.

Both directions use the cubic convolution kernel with a = -0.5 (Catmull-Rom).
Downscaling stretches the kernel by K for antialiasing; upscaling uses the
plain interpolating kernel.  Per-output-pixel weights are normalized to sum
to one, so constant images survive both directions exactly, and boundaries
are handled by clamping source indices to the edge.

The 2-D operation is separable: a 1-D weight matrix is built per axis and
applied along rows then columns.
"""

import numpy as np
from typing import NamedTuple

__all__ = [
    "SUPPORTED_SCALES",
    "PadSpec",
    "check_scale",
    "cubic_kernel",
    "resample_matrix",
    "pad_to_multiple",
    "unpad",
    "downscale",
    "upscale_bicubic",
]

SUPPORTED_SCALES = (2, 3, 4)

# Kernel support radius in source pixels (unstretched).
_RADIUS = 2.0


class PadSpec(NamedTuple):
    """Rows/cols appended at the bottom/right edge by pad_to_multiple."""

    bottom: int
    right: int


def check_scale(k: int) -> int:
    if not isinstance(k, (int, np.integer)) or k not in SUPPORTED_SCALES:
        raise ValueError(f"scale factor must be one of {SUPPORTED_SCALES}, got {k!r}")
    return int(k)


def cubic_kernel(x: np.ndarray) -> np.ndarray:
    """Cubic convolution weight, a = -0.5 (Keys / Catmull-Rom)."""
    ax = np.abs(np.asarray(x, dtype=np.float64))
    ax2 = ax * ax
    ax3 = ax2 * ax
    near = 1.5 * ax3 - 2.5 * ax2 + 1.0
    far = -0.5 * ax3 + 2.5 * ax2 - 4.0 * ax + 2.0
    return np.where(ax <= 1.0, near, np.where(ax < 2.0, far, 0.0))


def resample_matrix(n_in: int, n_out: int, antialias_stretch: float = 1.0) -> np.ndarray:
    """Dense (n_out, n_in) weight matrix for one axis.

    Output pixel centers map to source coordinate (j + 0.5) * n_in / n_out - 0.5.
    With antialias_stretch = s >= 1 the kernel is widened by s and weights take
    the value W((i - center) / s).  Out-of-range taps are clamped to the edge;
    each row is normalized to sum to exactly one.
    """
    scale = n_in / n_out
    stretch = max(1.0, float(antialias_stretch))
    support = _RADIUS * stretch
    mat = np.zeros((n_out, n_in), dtype=np.float64)
    for j in range(n_out):
        center = (j + 0.5) * scale - 0.5
        lo = int(np.ceil(center - support))
        hi = int(np.floor(center + support))
        taps = np.arange(lo, hi + 1)
        weights = cubic_kernel((taps - center) / stretch)
        np.add.at(mat[j], np.clip(taps, 0, n_in - 1), weights)
        total = mat[j].sum()
        assert abs(total) > 1e-12, "degenerate resampling row"
        mat[j] /= total
    # partition of unity after normalization
    assert np.allclose(mat.sum(axis=1), 1.0, atol=1e-12)
    return mat


def _apply_separable(img: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    # (out_h, in_h) @ (in_h, in_w, c) along rows, then along columns.
    out = np.tensordot(rows, img, axes=(1, 0))
    out = np.tensordot(cols, out, axes=(1, 1)).transpose(1, 0, 2)
    return np.ascontiguousarray(out)


def pad_to_multiple(img: np.ndarray, k: int) -> tuple[np.ndarray, PadSpec]:
    """Reflect-pad bottom/right so both dimensions are multiples of k."""
    k = check_scale(k)
    h, w = img.shape[:2]
    pad_b = (-h) % k
    pad_r = (-w) % k
    if pad_b == 0 and pad_r == 0:
        return img.copy(), PadSpec(0, 0)
    padded = np.pad(img, ((0, pad_b), (0, pad_r), (0, 0)), mode="symmetric")
    return padded, PadSpec(pad_b, pad_r)


def unpad(img: np.ndarray, spec: PadSpec) -> np.ndarray:
    """Strip the rows/cols recorded in spec; inverse of pad_to_multiple."""
    bottom, right = spec
    h, w = img.shape[:2]
    if bottom < 0 or right < 0 or bottom >= h or right >= w:
        raise ValueError(f"pad spec {spec} inconsistent with {w}x{h} image")
    return img[: h - bottom, : w - right].copy()


def downscale(img: np.ndarray, k: int) -> np.ndarray:
    """Shrink by 1/k with an antialiased (k-stretched) cubic kernel."""
    k = check_scale(k)
    h, w = img.shape[:2]
    if h % k or w % k:
        raise ValueError(f"dimensions {w}x{h} not divisible by {k}")
    rows = resample_matrix(h, h // k, antialias_stretch=k)
    cols = resample_matrix(w, w // k, antialias_stretch=k)
    return _apply_separable(np.asarray(img, dtype=np.float64), rows, cols)


def upscale_bicubic(img: np.ndarray, k: int) -> np.ndarray:
    """Enlarge by k with plain (non-antialiased) cubic interpolation.

    Output samples may overshoot [0, 255]; quantization is the caller's job.
    """
    k = check_scale(k)
    h, w = img.shape[:2]
    rows = resample_matrix(h, h * k)
    cols = resample_matrix(w, w * k)
    return _apply_separable(np.asarray(img, dtype=np.float64), rows, cols)
