"""Command line for the exporter: checkpoint in, W2VFE + manifest out."""

from __future__ import annotations

import argparse
import sys

from .export import ExportError, export, load_checkpoint
from .reference import dump_reference


def _tristate(value: str) -> bool | None:
    lowered = value.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    if lowered == "auto":
        return None
    raise argparse.ArgumentTypeError(f"expected true/false/auto, got {value!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="w2vfe-export",
        description="Export wav2vec2-style feature encoders to W2VFE files.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="convert one checkpoint")
    p.add_argument("--model-id", required=True,
                   help="hub id (e.g. facebook/wav2vec2-base) or local checkpoint dir")
    p.add_argument("--out", required=True, help="output .w2vfe path")
    p.add_argument("--revision", help="pin a checkpoint revision")
    p.add_argument("--dump-reference", metavar="DIR",
                   help="also dump reference encoder outputs for the probe set")
    p.add_argument("--input-normalize", type=_tristate, default=None, metavar="true|false|auto",
                   help="override waveform z-normalization (auto: processor config / norm-mode)")
    p.add_argument("--model-name", help="name stored in the W2VFE header")
    p.add_argument("--manifest", help="manifest path (default: <out>.manifest.json)")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        model = load_checkpoint(args.model_id, args.revision)
        manifest = export(
            args.model_id,
            args.out,
            revision=args.revision,
            input_normalize=args.input_normalize,
            model_name=args.model_name,
            model=model,
        )
        if args.dump_reference:
            manifest.reference_outputs = dump_reference(
                model, args.dump_reference, manifest.input_normalize
            )
        manifest_path = args.manifest or args.out + ".manifest.json"
        manifest.save(manifest_path)
        print(f"wrote {args.out} ({len(manifest.layers)} layers, "
              f"window {manifest.window} / stride {manifest.stride}) and {manifest_path}")
        return 0
    except ExportError as exc:
        print(f"{exc.code}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"file_not_found: {exc}", file=sys.stderr)
        return 1


def cli_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    cli_entry()
