"""Image similarity metrics: MSE, PSNR, global-statistics SSIM, Pearson correlation.

SSIM here is the single global-statistics variant: one mean, one variance and
one covariance over all samples of the image (channels pooled), population
(1/N) statistics, stability constants C1 = (0.01*255)^2 and C2 = (0.03*255)^2.
There is no sliding window.  PSNR uses MAX = 255; identical images yield the
distinguished infinite value (math.inf, rendered "inf" in CSV output).

Batch aggregation uses math.fsum, so group means are independent of
accumulation order.
"""

import csv
import math
from collections import defaultdict
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .image import load_image

__all__ = [
    "C1",
    "C2",
    "MAX_VALUE",
    "SsimComponents",
    "GroupSimilarity",
    "mse",
    "psnr",
    "ssim",
    "ssim_components",
    "pearson_corr",
    "similarity_report",
    "write_similarity_csv",
]

MAX_VALUE = 255.0
C1 = (0.01 * MAX_VALUE) ** 2
C2 = (0.03 * MAX_VALUE) ** 2


class SsimComponents(NamedTuple):
    """Pooled statistics feeding the SSIM formula."""

    mu_x: float
    mu_y: float
    sigma_x: float
    sigma_y: float
    sigma_xy: float
    c1: float
    c2: float


def _check_same_dims(x: np.ndarray, y: np.ndarray):
    if x.shape != y.shape:
        raise ValueError(f"image dimensions differ: {x.shape} vs {y.shape}")


def mse(x: np.ndarray, y: np.ndarray) -> float:
    """Mean squared error over all samples."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_same_dims(x, y)
    d = x - y
    return float(np.mean(d * d))


def psnr(x: np.ndarray, y: np.ndarray) -> float:
    """10 * log10(255^2 / MSE) in dB; inf when the images are identical."""
    err = mse(x, y)
    if err == 0.0:
        return math.inf
    return 10.0 * math.log10(MAX_VALUE * MAX_VALUE / err)


def ssim_components(x: np.ndarray, y: np.ndarray) -> SsimComponents:
    x = np.asarray(x, dtype=np.float64).ravel()
    y = np.asarray(y, dtype=np.float64).ravel()
    mu_x = float(np.mean(x))
    mu_y = float(np.mean(y))
    dx = x - mu_x
    dy = y - mu_y
    var_x = float(np.mean(dx * dx))
    var_y = float(np.mean(dy * dy))
    cov = float(np.mean(dx * dy))
    return SsimComponents(mu_x, mu_y, math.sqrt(var_x), math.sqrt(var_y), cov, C1, C2)


def ssim(x: np.ndarray, y: np.ndarray) -> float:
    """Global-statistics structural similarity in [-1, 1]; ssim(x, x) == 1 exactly.

    Variances are used directly (not round-tripped through sigma = sqrt(var))
    so that for x == y numerator and denominator are bitwise equal.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    _check_same_dims(x, y)
    x = x.ravel()
    y = y.ravel()
    mu_x = float(np.mean(x))
    mu_y = float(np.mean(y))
    dx = x - mu_x
    dy = y - mu_y
    var_x = float(np.mean(dx * dx))
    var_y = float(np.mean(dy * dy))
    cov = float(np.mean(dx * dy))
    num = (2.0 * mu_x * mu_y + C1) * (2.0 * cov + C2)
    den = (mu_x * mu_x + mu_y * mu_y + C1) * (var_x + var_y + C2)
    return num / den


def pearson_corr(a, b) -> float:
    """Population Pearson correlation of two equal-length sequences.

    Undefined (raises) when either sequence is constant; never silently 0.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValueError("need at least 2 points")
    da = a - a.mean()
    db = b - b.mean()
    sa = math.sqrt(float(np.mean(da * da)))
    sb = math.sqrt(float(np.mean(db * db)))
    if sa == 0.0 or sb == 0.0:
        raise ValueError("correlation undefined for a constant sequence")
    cov = float(np.mean(da * db))
    return cov / (sa * sb)


class GroupSimilarity(NamedTuple):
    group: str
    pair_count: int
    ssim_mean: float
    psnr_mean_db: float  # mean over finite-PSNR pairs; nan when none are finite
    infinite_psnr_count: int


def similarity_report(
    pairs: Iterable[tuple[str, str, str]],
) -> list[GroupSimilarity]:
    """Mean SSIM / PSNR per group over (original path, attacked path, group) triples.

    Pairs with infinite PSNR (bit-identical images) are excluded from the PSNR
    mean and counted separately.
    """
    ssims: dict[str, list[float]] = defaultdict(list)
    psnrs: dict[str, list[float]] = defaultdict(list)
    inf_counts: dict[str, int] = defaultdict(int)
    seen = []
    for original, attacked, group in pairs:
        x = load_image(original)
        y = load_image(attacked)
        if group not in seen:
            seen.append(group)
        ssims[group].append(ssim(x, y))
        p = psnr(x, y)
        if math.isinf(p):
            inf_counts[group] += 1
        else:
            psnrs[group].append(p)
    if not seen:
        raise ValueError("no pairs to report on")
    report = []
    for group in seen:
        s = ssims[group]
        p = psnrs[group]
        report.append(
            GroupSimilarity(
                group=group,
                pair_count=len(s),
                ssim_mean=math.fsum(s) / len(s),
                psnr_mean_db=math.fsum(p) / len(p) if p else math.nan,
                infinite_psnr_count=inf_counts[group],
            )
        )
    return report


def write_similarity_csv(report: list[GroupSimilarity], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["group", "pair_count", "ssim_mean", "psnr_mean_db", "infinite_psnr_count"])
        for row in report:
            # psnr_mean_db is nan only when every pair in the group was
            # bit-identical, i.e. all excluded PSNRs were +inf
            psnr_cell = "inf" if math.isnan(row.psnr_mean_db) else repr(row.psnr_mean_db)
            w.writerow([row.group, row.pair_count, repr(row.ssim_mean), psnr_cell, row.infinite_psnr_count])
