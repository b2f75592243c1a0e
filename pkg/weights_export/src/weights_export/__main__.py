"""CLI: `export` writes an SRW1 file from a checkpoint, `verify` re-reads it
and compares tensor-for-tensor.  Both print a JSON summary on stdout.

Exit codes: 0 success / verification pass, 1 verification fail, 2 usage
error, 3 I/O or format error.
"""

import argparse
import json
import sys

from .convert import ConversionError, export_checkpoint, verify_export


def build_parser():
    parser = argparse.ArgumentParser(
        prog="edsr-srw1-export",
        description="Convert pretrained EDSR checkpoints to SRW1 weight files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_exp = sub.add_parser("export", help="write the SRW1 rendition of a checkpoint")
    p_exp.add_argument("--src", required=True, help="EDSR checkpoint (.pt state dict)")
    p_exp.add_argument("--dst", required=True, help="SRW1 output path")
    p_exp.add_argument("--res-scale", type=float, default=None,
                       help="override the inferred residual scaling factor")

    p_ver = sub.add_parser("verify", help="compare an SRW1 file against its checkpoint")
    p_ver.add_argument("--src", required=True)
    p_ver.add_argument("--dst", required=True)
    p_ver.add_argument("--res-scale", type=float, default=None)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "export":
            summary = export_checkpoint(args.src, args.dst, res_scale=args.res_scale)
            print(json.dumps(summary, indent=2))
            return 0
        report = verify_export(args.src, args.dst, res_scale=args.res_scale)
        print(json.dumps(report, indent=2))
        return 0 if report["status"] == "pass" else 1
    except (FileNotFoundError, ConversionError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
