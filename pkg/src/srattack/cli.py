"""Command-line front end.

Subcommands: manifest build | manifest validate | attack | similarity |
evaluate | model inspect.  Exit codes: 0 success, 1 validation findings,
2 usage error, 3 I/O or file-format error.

Every run that writes outputs also drops a run-manifest JSON next to them
recording the resolved configuration, toolkit version, weight-file digest and
timestamp, so experiments are self-describing.
"""

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional

from . import __version__
from .attack import AttackConfig, attack_batch, write_attack_log
from .detection import (
    auc,
    evaluate_setup,
    read_scores,
    roc_curve,
    setup_records,
    write_report_csv,
    write_roc_csv,
)
from .engine import WeightFormatError, load_weights
from .image import ImageFormatError
from .manifest import (
    attach_boxes,
    build_manifest,
    read_boxes,
    read_manifest,
    read_split,
    validate_manifest,
    write_manifest,
)
from .metrics import similarity_report, write_similarity_csv

__all__ = ["main", "dispatch", "RunManifest"]

log = logging.getLogger(__name__)


class UsageError(Exception):
    """Semantically invalid invocation (exit code 2)."""


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    version: str = __version__
    timestamp: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds")
    )

    def write(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(
                {
                    "subcommand": self.subcommand,
                    "config": self.config,
                    "version": self.version,
                    "timestamp": self.timestamp,
                },
                f,
                indent=2,
                sort_keys=True,
            )
            f.write("\n")


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _run_manifest_for_file(out_file: Path) -> Path:
    return out_file.with_name(out_file.stem + ".run.json")


def _filter_split(entries, split: str):
    if split == "all":
        return entries
    picked = [e for e in entries if e.split == split]
    if not picked:
        raise UsageError(f"manifest has no {split!r} entries")
    return picked


def _cmd_manifest_build(args) -> int:
    split = read_split(args.split)
    entries = build_manifest(
        args.root, split, args.method, frames_per_video=args.frames_per_video, seed=args.seed
    )
    if args.boxes:
        entries = attach_boxes(entries, read_boxes(args.boxes))
    out = Path(args.out)
    write_manifest(entries, out)
    RunManifest(
        "manifest build",
        {
            "root": str(args.root),
            "split": str(args.split),
            "method": args.method,
            "frames_per_video": args.frames_per_video,
            "seed": args.seed,
            "boxes": str(args.boxes) if args.boxes else None,
            "out": str(out),
        },
    ).write(_run_manifest_for_file(out))
    print(f"wrote {len(entries)} entries to {out}")
    return 0


def _cmd_manifest_validate(args) -> int:
    entries = read_manifest(args.manifest)
    report = validate_manifest(entries, root=args.root)
    print(f"{report.entry_count} entries checked")
    for v in report.violations:
        print(f"violation: {v}")
    if report.ok:
        print("manifest OK")
        return 0
    print(f"{len(report.violations)} violation(s)")
    return 1


def _cmd_attack(args) -> int:
    if args.backend == "edsr" and not args.weights:
        raise UsageError("--backend edsr requires --weights")
    if args.backend != "edsr" and args.weights:
        raise UsageError("--weights only makes sense with --backend edsr")
    entries = _filter_split(read_manifest(args.manifest), args.split)
    if args.boxes:
        entries = attach_boxes(entries, read_boxes(args.boxes))
    cfg = AttackConfig(
        k=args.k,
        backend=args.backend,
        out_dir=Path(args.out),
        weights=Path(args.weights) if args.weights else None,
        overwrite=args.overwrite,
        margin=args.margin,
        log_similarity=args.log_similarity,
        source_root=Path(args.root),
    )
    records = attack_batch(entries, cfg, jobs=args.jobs)
    log_path = Path(args.out) / "attack_log.csv"
    write_attack_log(records, log_path)
    RunManifest(
        "attack",
        {
            "manifest": str(args.manifest),
            "split": args.split,
            "k": args.k,
            "backend": args.backend,
            "weights": str(args.weights) if args.weights else None,
            "weights_sha256": _sha256(args.weights) if args.weights else None,
            "downscale_filter": "bicubic a=-0.5, antialiased, edge-clamped",
            "margin": args.margin,
            "overwrite": args.overwrite,
            "root": str(args.root),
            "out": str(args.out),
            "jobs": args.jobs,
        },
    ).write(Path(args.out) / "run_manifest.json")
    done = sum(1 for r in records if r.status == "ok")
    skipped = len(records) - done
    print(f"attacked {done} frame(s), skipped {skipped}; log at {log_path}")
    return 0


def _read_pairs(path) -> list[tuple[str, str, str]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such pairs file: {path}")
    pairs = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [c.strip().lower() for c in header[:3]] != ["original", "attacked", "group"]:
            raise ValueError(f"{path}: expected header 'original,attacked,group'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 3:
                raise ValueError(f"{path}:{lineno}: malformed pair row {row!r}")
            pairs.append((row[0], row[1], row[2]))
    return pairs


def _cmd_similarity(args) -> int:
    pairs = _read_pairs(args.pairs)
    report = similarity_report(pairs)
    out = Path(args.out)
    write_similarity_csv(report, out)
    RunManifest(
        "similarity", {"pairs": str(args.pairs), "out": str(out)}
    ).write(_run_manifest_for_file(out))
    for row in report:
        psnr_txt = "inf" if row.psnr_mean_db != row.psnr_mean_db else f"{row.psnr_mean_db:.1f}"
        print(
            f"{row.group}: n={row.pair_count} ssim={row.ssim_mean:.3f} "
            f"psnr={psnr_txt} dB (identical pairs: {row.infinite_psnr_count})"
        )
    return 0


def _fmt(value) -> str:
    return "n/a" if value is None else f"{value:5.1f}"


def _cmd_evaluate(args) -> int:
    entries = _filter_split(read_manifest(args.manifest), args.split)
    scores_plain = read_scores(args.scores_plain)
    scores_attacked = read_scores(args.scores_attacked)
    setup = {"both": "attack_both", "fake-only": "attack_fake_only"}[args.setup]
    rows = evaluate_setup(
        entries, scores_plain, scores_attacked, setup,
        threshold=args.threshold, model_tag=args.tag,
    )
    out_dir = Path(args.out)
    write_report_csv(rows, out_dir / "report.csv")
    for row in rows:
        records = setup_records(
            entries, scores_plain, scores_attacked, setup, row.method, row.sr
        )
        curve = roc_curve(records)
        sr_tag = "sr" if row.sr else "nosr"
        write_roc_csv(curve, out_dir / f"roc_{row.model}_{row.method}_{sr_tag}.csv")
    RunManifest(
        "evaluate",
        {
            "manifest": str(args.manifest),
            "split": args.split,
            "scores_plain": str(args.scores_plain),
            "scores_attacked": str(args.scores_attacked),
            "setup": setup,
            "threshold": args.threshold,
            "tag": args.tag,
            "out": str(args.out),
        },
    ).write(out_dir / "run_manifest.json")
    print("model      method          SR  FNR    FPR    Recall Prec   AUC    Acc")
    for r in rows:
        print(
            f"{r.model:10s} {r.method:15s} {'y' if r.sr else 'n'}  "
            f"{_fmt(r.fnr)} {_fmt(r.fpr)} {_fmt(r.recall)} {_fmt(r.precision)} "
            f"{_fmt(r.auc)} {_fmt(r.accuracy)}"
        )
    print(f"report written to {out_dir / 'report.csv'}")
    return 0


def _cmd_model_inspect(args) -> int:
    model = load_weights(args.weights)
    mean = ", ".join(f"{v:.2f}" for v in model.rgb_mean)
    print(f"scale:       x{model.scale}")
    print(f"n_feats:     {model.n_feats}")
    print(f"n_resblocks: {model.n_resblocks}")
    print(f"res_scale:   {model.res_scale}")
    print(f"rgb_mean:    [{mean}]")
    print(f"layers:      {len(model.layers)}")
    print(f"sha256:      {_sha256(args.weights)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srattack",
        description="Super-resolution face attack toolkit: batch SR round-trip "
        "on face regions plus detector-score evaluation.",
    )
    parser.add_argument("--seed", type=int, default=0, help="sampling seed (recorded in outputs)")
    parser.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                        help="parallel workers (results independent of N)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_manifest = sub.add_parser("manifest", help="build or validate experiment manifests")
    msub = p_manifest.add_subparsers(dest="manifest_command", required=True)

    p_build = msub.add_parser("build", help="sample a balanced manifest from a frame tree")
    p_build.add_argument("--root", required=True, help="frame root (original/ + <method>/ trees)")
    p_build.add_argument("--split", required=True, help="split JSON with train/test video ids")
    p_build.add_argument("--method", required=True, help="forgery method tree to pair with pristine")
    p_build.add_argument("--frames-per-video", type=int, default=10)
    p_build.add_argument("--boxes", default=None, help="optional face-box CSV to merge")
    p_build.add_argument("--out", required=True)
    p_build.set_defaults(func=_cmd_manifest_build)

    p_val = msub.add_parser("validate", help="check balance, paths and box coverage")
    p_val.add_argument("--manifest", required=True)
    p_val.add_argument("--root", default=None, help="resolve and check paths under this root")
    p_val.set_defaults(func=_cmd_manifest_validate)

    p_attack = sub.add_parser("attack", help="apply the SR round-trip to manifest face regions")
    p_attack.add_argument("--manifest", required=True)
    p_attack.add_argument("--k", type=int, default=2, help="scale factor (2, 3 or 4)")
    p_attack.add_argument("--backend", choices=["bicubic", "edsr"], default="bicubic")
    p_attack.add_argument("--weights", default=None, help="SRW1 weight file (edsr backend)")
    p_attack.add_argument("--out", required=True, help="output directory (mirrors source tree)")
    p_attack.add_argument("--boxes", default=None, help="face-box CSV overriding manifest boxes")
    p_attack.add_argument("--margin", type=float, default=0.0,
                          help="box expansion fraction per side before cropping")
    p_attack.add_argument("--overwrite", choices=["deny", "allow"], default="deny")
    p_attack.add_argument("--log-similarity", action="store_true",
                          help="record SSIM/PSNR of each (source, attacked) pair")
    p_attack.add_argument("--root", default=".", help="base for relative manifest paths")
    p_attack.add_argument("--split", choices=["train", "test", "all"], default="all")
    p_attack.set_defaults(func=_cmd_attack)

    p_sim = sub.add_parser("similarity", help="per-group mean SSIM/PSNR over image pairs")
    p_sim.add_argument("--pairs", required=True, help="CSV 'original,attacked,group'")
    p_sim.add_argument("--out", required=True)
    p_sim.set_defaults(func=_cmd_similarity)

    p_eval = sub.add_parser("evaluate", help="detector-score evaluation tables and ROC points")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--scores-plain", required=True, help="scores on unattacked images")
    p_eval.add_argument("--scores-attacked", required=True, help="scores on attacked images")
    p_eval.add_argument("--setup", choices=["both", "fake-only"], required=True)
    p_eval.add_argument("--threshold", type=float, default=0.5)
    p_eval.add_argument("--tag", default="detector", help="model tag for report rows")
    p_eval.add_argument("--split", choices=["train", "test", "all"], default="all")
    p_eval.add_argument("--out", required=True, help="output directory")
    p_eval.set_defaults(func=_cmd_evaluate)

    p_model = sub.add_parser("model", help="weight-file tools")
    model_sub = p_model.add_subparsers(dest="model_command", required=True)
    p_inspect = model_sub.add_parser("inspect", help="print architecture fields of an SRW1 file")
    p_inspect.add_argument("--weights", required=True)
    p_inspect.set_defaults(func=_cmd_model_inspect)

    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, FileExistsError, ImageFormatError, WeightFormatError,
            OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main(argv=None) -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()
