"""Command-line entry point, mirroring the core toolkit's conventions:
--config JSON plus flag overrides, one JSON error line to stderr on failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .extract import ExtractionSpec, extract, load_clip_listing, verify_roundtrip
from .model import CheckpointConfig, init_checkpoint


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part.strip())


def _cmd_run(args: argparse.Namespace) -> int:
    doc: dict = {}
    if args.config:
        doc.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    for key, value in (
        ("audio_root", args.audio_root),
        ("checkpoint", args.checkpoint),
        ("output_root", args.out),
        ("clips", args.clips),
    ):
        if value is not None:
            doc[key] = str(value)
    if args.layers is not None:
        doc["layers"] = list(args.layers)
    clips_path = doc.pop("clips", None)
    if clips_path is None:
        raise ValueError("a clip listing is required (--clips or config clips)")
    spec = ExtractionSpec(
        audio_root=doc["audio_root"],
        checkpoint=doc["checkpoint"],
        output_root=doc["output_root"],
        layers=tuple(doc.get("layers", (1,))),
    )
    result = extract(spec, load_clip_listing(clips_path))
    print(
        json.dumps(
            {
                "written": result.written,
                "skipped": list(result.skipped),
                "dims": list(result.dims),
                "layers": list(result.layers),
            },
            sort_keys=True,
        )
    )
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    report = verify_roundtrip(args.root)
    print(json.dumps({"checked": report.checked, "problems": len(report.problems)}))
    for problem in report.problems:
        print(f"problem: {problem}")
    return 0 if report.ok else 1


def _cmd_init_checkpoint(args: argparse.Namespace) -> int:
    config = CheckpointConfig(
        embed_dim=args.embed_dim,
        num_layers=args.num_layers,
        num_heads=args.num_heads,
        clip_seconds=args.clip_seconds,
        mel_bins=args.mel_bins,
        fbank_mean=args.fbank_mean,
        fbank_std=args.fbank_std,
    )
    path = init_checkpoint(args.out, config, seed=args.seed)
    print(f"checkpoint written to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embank-extract",
        description="dump frozen audio-transformer activations to EMB1 datasets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="extract embeddings for every clip in a listing")
    p.add_argument("--config", type=Path)
    p.add_argument("--audio-root", dest="audio_root")
    p.add_argument("--checkpoint")
    p.add_argument("--clips", help="JSON clip listing (manifest-style)")
    p.add_argument("--out")
    p.add_argument("--layers", type=_int_list)
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("verify", help="re-read an extracted dataset and cross-check it")
    p.add_argument("--root", required=True)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("init-checkpoint", help="write a seeded random frozen checkpoint")
    p.add_argument("--out", required=True)
    p.add_argument("--embed-dim", type=int, default=32, dest="embed_dim")
    p.add_argument("--num-layers", type=int, default=2, dest="num_layers")
    p.add_argument("--num-heads", type=int, default=4, dest="num_heads")
    p.add_argument("--clip-seconds", type=float, default=10.0, dest="clip_seconds")
    p.add_argument("--mel-bins", type=int, default=128, dest="mel_bins")
    p.add_argument("--fbank-mean", type=float, default=0.0, dest="fbank_mean")
    p.add_argument("--fbank-std", type=float, default=1.0, dest="fbank_std")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_init_checkpoint)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
