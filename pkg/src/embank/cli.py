"""Command-line entry point.

Subcommands: validate, eval, ablation, layer-sweep, lowshot, gen-synthetic.
Each accepts --config <file> (JSON with ExperimentConfig fields) plus flag
overrides; flags win. On failure the process exits nonzero after printing a
single machine-readable JSON error line to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import EmbankError
from .experiments import (
    ExperimentConfig,
    LowShotPlan,
    config_from_dict,
    run_ablation,
    run_eval,
    run_layer_sweep,
    run_lowshot,
)
from .manifest import load_manifest, validate_dataset
from .synthetic import SyntheticSpec, generate_dataset


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(part) for part in text.split(",") if part.strip())


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields")
    parser.add_argument("--root", help="dataset root directory")
    parser.add_argument("--out", help="output directory for reports")
    parser.add_argument("--layers", type=_int_list, help="comma-separated layer numbers")
    parser.add_argument("--pooling", choices=["temporal", "spectral", "spatial"])
    parser.add_argument("--kn", type=int, dest="kn", help="neighbors averaged into a raw score")
    parser.add_argument(
        "--ks", dest="ks", help="mixup neighbors per target row: an integer, 'full', or 'off'"
    )
    parser.add_argument(
        "--lambda", type=float, dest="mixup_weight", help="mixup interpolation weight"
    )
    parser.add_argument("--dn", choices=["off", "transductive", "train-loo"])
    parser.add_argument("--pauc-p", type=float, dest="pauc_p")
    parser.add_argument(
        "--seed",
        type=int,
        action="append",
        dest="seeds",
        help="may be given multiple times; drives low-shot subsampling",
    )
    parser.add_argument(
        "--dn-group-by-section",
        action="store_true",
        default=None,
        help="experimental: fit transductive normalization per section",
    )


def _build_config(args: argparse.Namespace) -> ExperimentConfig:
    doc: dict = {}
    if args.config:
        doc.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    if args.root is not None:
        doc["dataset_root"] = args.root
    if getattr(args, "out", None) is not None:
        doc["output_dir"] = args.out
    if args.layers is not None:
        doc["layers"] = list(args.layers)
    if args.pooling is not None:
        doc["pooling"] = args.pooling
    if args.kn is not None:
        doc["n_neighbors"] = args.kn
    if args.ks is not None:
        doc["mixup_neighbors"] = None if args.ks == "off" else (
            "full" if args.ks == "full" else int(args.ks)
        )
    if args.mixup_weight is not None:
        doc["mixup_weight"] = args.mixup_weight
    if args.dn is not None:
        doc["domain_norm"] = args.dn.replace("-", "_")
    if args.pauc_p is not None:
        doc["pauc_p"] = args.pauc_p
    if args.seeds:
        doc["seeds"] = list(args.seeds)
    if args.dn_group_by_section is not None:
        doc["group_norm_by_section"] = args.dn_group_by_section
    if "dataset_root" not in doc:
        raise ValueError("a dataset root is required (--root or config dataset_root)")
    doc.setdefault("output_dir", str(Path(doc["dataset_root"]) / "reports"))
    return config_from_dict(doc)


def _cmd_validate(args: argparse.Namespace) -> int:
    config = _build_config(args)
    manifest = load_manifest(config.dataset_root)
    report = validate_dataset(manifest, config.dataset_root)
    counts = {
        f"{machine}/{domain}/{split}": n
        for (machine, domain, split), n in sorted(report.counts.items())
    }
    print(json.dumps({"ok": report.ok, "problems": len(report.problems), "counts": counts},
                     indent=2, sort_keys=True))
    for problem in report.problems:
        print(f"problem: {problem.kind} clip={problem.clip_id} layer={problem.layer}: "
              f"{problem.message}")
    return 0 if report.ok else 1


def _cmd_eval(args: argparse.Namespace) -> int:
    config = _build_config(args)
    result = run_eval(config)
    for layer, report in result.per_layer.items():
        print(f"layer {layer}: official={_fmt(report.official)}")
    print(f"composite (oracle layers {result.selected_layers}): "
          f"official={_fmt(result.composite.official)}")
    print(f"reports written to {config.output_dir}")
    return 0


def _cmd_ablation(args: argparse.Namespace) -> int:
    config = _build_config(args)
    result = run_ablation(config)
    print(result.to_csv_text(), end="")
    print(f"ablation table written to {config.output_dir}")
    return 0


def _cmd_layer_sweep(args: argparse.Namespace) -> int:
    config = _build_config(args)
    result = run_layer_sweep(config)
    print(result.to_plot_csv_text(), end="")
    print(f"sweep written to {config.output_dir}")
    return 0


def _cmd_lowshot(args: argparse.Namespace) -> int:
    config = _build_config(args)
    plan_kwargs = {}
    if args.shots is not None:
        plan_kwargs["shot_counts"] = args.shots
    if args.plan_seeds is not None:
        plan_kwargs["seeds"] = tuple(args.plan_seeds)
    elif args.seeds:
        plan_kwargs["seeds"] = tuple(args.seeds)
    if args.no_half:
        plan_kwargs["include_half"] = False
    if args.no_full:
        plan_kwargs["include_full"] = False
    result = run_lowshot(LowShotPlan(**plan_kwargs), config)
    print(result.to_csv_text(), end="")
    print(f"low-shot report written to {config.output_dir}")
    return 0


def _cmd_gen_synthetic(args: argparse.Namespace) -> int:
    spec = SyntheticSpec(
        machines=args.machines,
        source_n=args.source_n,
        target_n=args.target_n,
        anomaly_offset=args.anomaly_offset,
        dim=args.dim,
        seed=args.seed,
        target_shift=args.target_shift,
        test_normal_n=args.test_normal_n,
        test_anomaly_n=args.test_anomaly_n,
        layers=args.layers or (1,),
    )
    manifest = generate_dataset(spec, args.out)
    print(f"wrote {len(manifest.clips)} clips x {len(manifest.layers_available)} layers "
          f"to {args.out}")
    return 0


def _fmt(value: float | None) -> str:
    return "n/a" if value is None else f"{100.0 * value:.2f}"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embank",
        description="kNN memory-bank anomaly scoring over embedding datasets",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check dataset files and dims against the manifest")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("eval", help="per-layer evaluation plus oracle best-layer composite")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("ablation", help="2x2 domain-normalization x mixup grid")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_ablation)

    p = sub.add_parser("layer-sweep", help="official score per layer, mixup disabled")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_layer_sweep)

    p = sub.add_parser("lowshot", help="subsampled-training runs, single-domain")
    _add_common_flags(p)
    p.add_argument("--shots", type=_int_list, help="comma-separated shot counts")
    p.add_argument(
        "--plan-seed", type=int, action="append", dest="plan_seeds",
        help="subsampling seed; may be given multiple times",
    )
    p.add_argument("--no-half", action="store_true")
    p.add_argument("--no-full", action="store_true")
    p.set_defaults(func=_cmd_lowshot)

    p = sub.add_parser("gen-synthetic", help="write a seeded synthetic embedding dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--machines", type=int, default=2)
    p.add_argument("--source-n", type=int, default=990)
    p.add_argument("--target-n", type=int, default=10)
    p.add_argument("--anomaly-offset", type=float, default=3.0)
    p.add_argument("--dim", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target-shift", type=float, default=6.0)
    p.add_argument("--test-normal-n", type=int, default=20)
    p.add_argument("--test-anomaly-n", type=int, default=20)
    p.add_argument("--layers", type=_int_list)
    p.set_defaults(func=_cmd_gen_synthetic)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (EmbankError, ValueError, OSError) as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 1


if __name__ == "__main__":
    sys.exit(main())
