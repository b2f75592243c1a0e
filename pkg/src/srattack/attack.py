"""The super-resolution face attack: crop -> pad -> downscale 1/K -> SR x K
-> unpad -> quantize -> paste back.

The attack is size-preserving by construction and touches only the face box;
every sample outside the box is a bit-exact copy of the source frame.  The SR
step is either a loaded EDSR-style model or the plain bicubic upscaler, so the
whole thing stays a black-box transformation of the image.
"""

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import metrics
from .engine import SrModel, forward
from .image import BoundingBox, crop, load_image, paste, quantize, save_image
from .manifest import ManifestEntry
from .resample import check_scale, downscale, pad_to_multiple, unpad, upscale_bicubic

__all__ = ["AttackConfig", "AttackRecord", "attack_face", "attack_batch", "write_attack_log"]

log = logging.getLogger(__name__)

BACKENDS = ("bicubic", "edsr")


@dataclass
class AttackConfig:
    k: int = 2
    backend: str = "bicubic"
    out_dir: Path = field(default_factory=lambda: Path("attacked"))
    weights: Optional[Path] = None
    overwrite: str = "deny"  # "deny" | "allow"
    margin: float = 0.0  # box expansion as a fraction of w/h per side
    log_similarity: bool = False
    source_root: Path = field(default_factory=lambda: Path("."))

    def __post_init__(self):
        check_scale(self.k)
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.overwrite not in ("deny", "allow"):
            raise ValueError(f"overwrite must be 'deny' or 'allow', got {self.overwrite!r}")
        if self.margin < 0:
            raise ValueError("margin must be >= 0")
        if self.backend == "edsr" and self.weights is None:
            raise ValueError("edsr backend needs a weight file")


@dataclass
class AttackRecord:
    source: str
    output: str  # relative to the attack output directory; empty when skipped
    box: Optional[BoundingBox]
    backend: str
    k: int
    ssim: Optional[float]
    psnr: Optional[float]
    status: str  # "ok" or "skipped: <reason>"


def attack_face(
    frame: np.ndarray,
    box: BoundingBox,
    cfg: AttackConfig,
    model: Optional[SrModel] = None,
) -> np.ndarray:
    """Apply the SR round-trip to one face region; returns a frame of equal size."""
    if (model is not None) != (cfg.backend == "edsr"):
        raise ValueError(f"backend {cfg.backend!r} and model presence disagree")
    if model is not None and model.scale != cfg.k:
        raise ValueError(f"model is x{model.scale} but config wants K={cfg.k}")
    face = crop(frame, box)
    padded, spec = pad_to_multiple(face, cfg.k)
    small = downscale(padded, cfg.k)
    if cfg.backend == "edsr":
        restored = forward(model, small)
    else:
        restored = upscale_bicubic(small, cfg.k)
    patch = quantize(unpad(restored, spec))
    return paste(frame, patch, box)


def _resolve_source(cfg: AttackConfig, entry_path: str) -> Path:
    p = Path(entry_path)
    return p if p.is_absolute() else Path(cfg.source_root) / p


def _output_path(cfg: AttackConfig, entry_path: str) -> Path:
    # mirror the manifest-recorded tree under out_dir; absolute paths are
    # mirrored by their anchor-stripped tail
    rel = Path(*Path(entry_path).parts[1:]) if Path(entry_path).is_absolute() else Path(entry_path)
    return Path(cfg.out_dir) / rel


def _attack_one(entry: ManifestEntry, cfg: AttackConfig, model: Optional[SrModel]) -> AttackRecord:
    if entry.box is None:
        log.warning("skipping %s: no face box", entry.path)
        return AttackRecord(entry.path, "", None, cfg.backend, cfg.k, None, None,
                            "skipped: no face box")
    source = _resolve_source(cfg, entry.path)
    frame = load_image(source)
    h, w = frame.shape[:2]
    box = entry.box.clamped(h, w).expanded(cfg.margin, h, w)
    attacked = attack_face(frame, box, cfg, model)
    out_path = _output_path(cfg, entry.path)
    if cfg.overwrite == "deny" and out_path.exists():
        raise FileExistsError(f"output exists and overwrite=deny: {out_path}")
    save_image(attacked, out_path)
    sim = psnr_db = None
    if cfg.log_similarity:
        sim = metrics.ssim(frame, attacked)
        psnr_db = metrics.psnr(frame, attacked)
    rel_out = out_path.relative_to(cfg.out_dir).as_posix()
    return AttackRecord(entry.path, rel_out, box, cfg.backend, cfg.k, sim, psnr_db, "ok")


def attack_batch(
    entries: list[ManifestEntry],
    cfg: AttackConfig,
    model: Optional[SrModel] = None,
    jobs: int = 1,
) -> list[AttackRecord]:
    """Attack every manifest entry, writing one PNG per entry under out_dir.

    Entries touch disjoint output files, so they may run in parallel; records
    come back in manifest order and file contents are independent of jobs.
    """
    if cfg.backend == "edsr" and model is None:
        from .engine import load_weights

        model = load_weights(cfg.weights)
    if jobs <= 1:
        return [_attack_one(e, cfg, model) for e in entries]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda e: _attack_one(e, cfg, model), entries))


def write_attack_log(records: list[AttackRecord], path) -> None:
    """Attack-log CSV: one row per manifest entry, in manifest order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["source", "output", "box_x", "box_y", "box_w", "box_h",
                    "backend", "k", "ssim", "psnr", "status"])
        for r in records:
            box_cells = [r.box.x, r.box.y, r.box.w, r.box.h] if r.box else ["", "", "", ""]
            ssim_cell = "" if r.ssim is None else repr(r.ssim)
            psnr_cell = "" if r.psnr is None else ("inf" if r.psnr == float("inf") else repr(r.psnr))
            w.writerow([r.source, r.output, *box_cells, r.backend, r.k,
                        ssim_cell, psnr_cell, r.status])
