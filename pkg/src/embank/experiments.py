"""Experiment orchestration: evaluation runs, ablations, sweeps, low-shot.

Every run starts from an ExperimentConfig (JSON-serializable, echoed
verbatim into each output file) and a dataset directory holding EMB1
embeddings plus manifest.json. Banks are built per machine type; domain
normalization statistics are likewise fit per machine. All randomness goes
through numpy's PCG64 generator seeded from the config, so identical
configs produce byte-identical outputs.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .bank import MemoryBank, build_bank, mixup_augment
from .manifest import ClipMeta, Manifest, load_manifest, validate_dataset
from .metrics import (
    DEFAULT_PAUC_P,
    MachineMetrics,
    MetricsReport,
    auc,
    build_report,
    format_percent,
    harmonic_mean,
    official_score,
    pauc,
)
from .pooling import POOLING_MODES, TEMPORAL, pool
from .formats import embedding_path, read_embedding
from .scoring import (
    NORM_MODES,
    NORM_OFF,
    NORM_TRANSDUCTIVE,
    ScoreTable,
    anomaly_distances,
    score_dataset,
)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_root: str
    output_dir: str
    layers: tuple[int, ...] | None = None  # None = every layer in the manifest
    pooling: str = TEMPORAL
    n_neighbors: int = 1  # K_n
    mixup_neighbors: int | str | None = None  # K_s; "full" = whole source bank
    mixup_weight: float = 0.9
    domain_norm: str = NORM_TRANSDUCTIVE
    pauc_p: float = DEFAULT_PAUC_P
    seeds: tuple[int, ...] = (0,)
    group_norm_by_section: bool = False

    def __post_init__(self) -> None:
        if self.pooling not in POOLING_MODES:
            raise ValueError(f"pooling must be one of {POOLING_MODES}, got {self.pooling!r}")
        if self.domain_norm not in NORM_MODES:
            raise ValueError(f"domain_norm must be one of {NORM_MODES}, got {self.domain_norm!r}")
        if self.n_neighbors < 1:
            raise ValueError("n_neighbors must be >= 1")
        if not 0.0 <= self.mixup_weight <= 1.0:
            raise ValueError("mixup_weight must be in [0, 1]")

    def snapshot(self, **extra) -> dict:
        doc = {
            "toolkit_version": __version__,
            "dataset_root": self.dataset_root,
            "output_dir": self.output_dir,
            "layers": list(self.layers) if self.layers is not None else None,
            "pooling": self.pooling,
            "n_neighbors": self.n_neighbors,
            "mixup_neighbors": self.mixup_neighbors,
            "mixup_weight": self.mixup_weight,
            "domain_norm": self.domain_norm,
            "pauc_p": self.pauc_p,
            "seeds": list(self.seeds),
            "group_norm_by_section": self.group_norm_by_section,
        }
        doc.update(extra)
        return doc


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Build a config from parsed JSON, ignoring unknown keys."""
    known = {f.name for f in fields(ExperimentConfig)}
    kwargs = {k: v for k, v in doc.items() if k in known}
    for key in ("layers", "seeds"):
        if kwargs.get(key) is not None:
            kwargs[key] = tuple(int(x) for x in kwargs[key])
    return ExperimentConfig(**kwargs)


@dataclass(frozen=True)
class LowShotPlan:
    shot_counts: tuple[int, ...] = (4, 8, 16, 32, 64, 128, 200)
    include_half: bool = True
    include_full: bool = True
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)


# --- shared plumbing -------------------------------------------------------


def load_dataset(config: ExperimentConfig) -> Manifest:
    """Load the manifest and refuse to run on an inconsistent dataset."""
    manifest = load_manifest(config.dataset_root)
    report = validate_dataset(manifest, config.dataset_root)
    if not report.ok:
        first = report.problems[0]
        raise ValueError(
            f"dataset failed validation with {len(report.problems)} problem(s); "
            f"first: {first.message}"
        )
    return manifest


def resolve_layers(config: ExperimentConfig, manifest: Manifest) -> tuple[int, ...]:
    layers = config.layers if config.layers else manifest.layers_available
    missing = sorted(set(layers) - set(manifest.layers_available))
    if missing:
        raise ValueError(f"requested layers not present in dataset: {missing}")
    return tuple(layers)


def load_layer_features(manifest: Manifest, root: Path | str, layer: int, pooling_mode: str):
    """Pool every clip's embedding for one layer; keyed by clip_id."""
    features = {}
    for clip in manifest.clips:
        tensor = read_embedding(embedding_path(root, clip.clip_id, layer))
        features[clip.clip_id] = pool(tensor, pooling_mode)
    return features


def _resolve_mixup(setting, n_source: int) -> int:
    if setting == "full":
        return n_source
    k_s = int(setting)
    if not 1 <= k_s <= n_source:
        raise ValueError(f"mixup_neighbors={k_s} must be in [1, {n_source}]")
    return k_s


def _machine_clips(manifest: Manifest, machine: str) -> tuple[list, list, list]:
    src = manifest.select(machine_type=machine, split="train", domain="source")
    tgt = manifest.select(machine_type=machine, split="train", domain="target")
    test = manifest.select(machine_type=machine, split="test")
    return src, tgt, test


def _machine_banks(
    manifest: Manifest, features, machine: str, config: ExperimentConfig, *, mixup
) -> tuple[MemoryBank, MemoryBank, list[ClipMeta]]:
    src, tgt, test = _machine_clips(manifest, machine)
    if not src or not tgt:
        raise ValueError(f"machine {machine!r} lacks source or target training clips")
    if not test:
        raise ValueError(f"machine {machine!r} has no test clips")
    source_bank = build_bank([features[c.clip_id] for c in src], "source")
    target_bank = build_bank([features[c.clip_id] for c in tgt], "target")
    if mixup is not None:
        k_s = _resolve_mixup(mixup, source_bank.n_rows)
        target_bank = mixup_augment(source_bank, target_bank, k_s, config.mixup_weight)
    return source_bank, target_bank, test


def score_layer(
    manifest: Manifest,
    features,
    config: ExperimentConfig,
    layer: int,
    *,
    norm_mode: str | None = None,
    mixup="__config__",
) -> ScoreTable:
    """One ScoreTable covering every machine's test clips for one layer.

    norm_mode / mixup default to the config values; the ablation grid
    overrides them cell by cell. Record order follows the manifest.
    """
    if mixup == "__config__":
        mixup = config.mixup_neighbors
    mode = config.domain_norm if norm_mode is None else norm_mode
    snapshot = config.snapshot(layer=layer, effective_domain_norm=mode, effective_mixup=mixup)
    by_id = {}
    for machine in manifest.machine_types():
        source_bank, target_bank, test = _machine_banks(
            manifest, features, machine, config, mixup=mixup
        )
        groups = [c.section for c in test] if config.group_norm_by_section else None
        table = score_dataset(
            source_bank,
            target_bank,
            [features[c.clip_id] for c in test],
            n_neighbors=config.n_neighbors,
            norm_mode=mode,
            groups=groups,
            config=snapshot,
        )
        by_id.update({r.clip_id: r for r in table.records})
    ordered = tuple(by_id[c.clip_id] for c in manifest.clips if c.clip_id in by_id)
    return ScoreTable(records=ordered, config=snapshot)


# --- eval ------------------------------------------------------------------


@dataclass(frozen=True)
class EvalResult:
    per_layer: dict[int, MetricsReport]
    composite: MetricsReport
    selected_layers: dict[str, int]


def _machine_quality(m: MachineMetrics) -> float:
    """Per-machine selection metric: harmonic mean of its three headline values."""
    if m.auc_source is None or m.auc_target is None:
        raise ValueError(f"machine {m.machine_type!r} lacks a domain slice")
    return harmonic_mean([m.auc_source, m.auc_target, m.pauc_mixed])


def _compose_best_layers(
    per_layer: dict[int, MetricsReport], config_snapshot: dict
) -> tuple[MetricsReport, dict[str, int]]:
    machines_order = [m.machine_type for m in next(iter(per_layer.values())).machines]
    chosen: list[MachineMetrics] = []
    selected: dict[str, int] = {}
    for machine in machines_order:
        best_layer = None
        best_metrics = None
        best_quality = -np.inf
        for layer, report in per_layer.items():
            metrics = next(m for m in report.machines if m.machine_type == machine)
            quality = _machine_quality(metrics)
            if quality > best_quality:
                best_quality = quality
                best_layer = layer
                best_metrics = metrics
        chosen.append(best_metrics)
        selected[machine] = best_layer
    composite = MetricsReport(
        machines=tuple(chosen),
        official=official_score(chosen),
        official_raw_pauc=harmonic_mean(
            [v for m in chosen for v in (m.auc_source, m.auc_target, m.pauc_mixed_raw)]
        ),
        arithmetic_mean_auc=float(np.mean([m.auc_mixed for m in chosen])),
        arithmetic_mean_pauc=float(np.mean([m.pauc_mixed for m in chosen])),
        config={**config_snapshot, "layer_selection": "oracle_per_machine",
                "selected_layers": {k: selected[k] for k in sorted(selected)}},
    )
    return composite, selected


def run_eval(config: ExperimentConfig) -> EvalResult:
    """Full evaluation: per-layer reports plus the oracle best-layer composite.

    Layer selection mirrors the usual reporting rule of picking, per machine
    type, the layer with the best test metrics; because that peeks at test
    labels the composite is explicitly tagged "oracle_per_machine".
    """
    manifest = load_dataset(config)
    layers = resolve_layers(config, manifest)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    per_layer: dict[int, MetricsReport] = {}
    for layer in layers:
        features = load_layer_features(manifest, config.dataset_root, layer, config.pooling)
        table = score_layer(manifest, features, config, layer)
        # flush scores as soon as this layer is done, before metrics can fail
        table.write_csv(out / f"scores_layer{layer:02d}.csv")
        table.write_json(out / f"scores_layer{layer:02d}.json")
        report = build_report(table, manifest, config.pauc_p)
        per_layer[layer] = report
        report.write_csv(out / f"report_layer{layer:02d}.csv")
        report.write_json(out / f"report_layer{layer:02d}.json")

    composite, selected = _compose_best_layers(per_layer, config.snapshot(layers=list(layers)))
    composite.write_csv(out / "composite_report.csv")
    composite.write_json(out / "composite_report.json")
    return EvalResult(per_layer=per_layer, composite=composite, selected_layers=selected)


# --- ablation --------------------------------------------------------------


@dataclass(frozen=True)
class AblationCell:
    domain_norm: bool
    mixup: bool
    auc_source: float
    auc_target: float
    official: float


@dataclass(frozen=True)
class AblationResult:
    cells: tuple[AblationCell, ...]  # fixed order: (--, -M, D-, DM)
    layer: int
    config: dict = field(default_factory=dict)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["domain_norm", "mixup", "auc_source", "auc_target", "official_score"])
        for cell in self.cells:
            writer.writerow(
                [
                    "yes" if cell.domain_norm else "no",
                    "yes" if cell.mixup else "no",
                    format_percent(cell.auc_source),
                    format_percent(cell.auc_target),
                    format_percent(cell.official),
                ]
            )
        return buf.getvalue()

    def to_json_text(self) -> str:
        doc = {
            "config": self.config,
            "layer": self.layer,
            "cells": [
                {
                    "domain_norm": c.domain_norm,
                    "mixup": c.mixup,
                    "auc_source": c.auc_source,
                    "auc_target": c.auc_target,
                    "official_score": c.official,
                }
                for c in self.cells
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _single_layer(config: ExperimentConfig, manifest: Manifest, what: str) -> int:
    layers = resolve_layers(config, manifest)
    if len(layers) != 1:
        raise ValueError(f"{what} runs on exactly one layer; got {list(layers)}")
    return layers[0]


def _aggregate_cell(report: MetricsReport) -> tuple[float, float]:
    src = harmonic_mean([m.auc_source for m in report.machines])
    tgt = harmonic_mean([m.auc_target for m in report.machines])
    return src, tgt


def run_ablation(config: ExperimentConfig, *, write: bool = True) -> AblationResult:
    """The 2x2 normalization-by-mixup grid on shared features and banks."""
    manifest = load_dataset(config)
    layer = _single_layer(config, manifest, "ablation")
    features = load_layer_features(manifest, config.dataset_root, layer, config.pooling)

    norm_on = config.domain_norm if config.domain_norm != NORM_OFF else NORM_TRANSDUCTIVE
    mixup_on = config.mixup_neighbors if config.mixup_neighbors is not None else "full"

    cells = []
    for dn_flag, mix_flag in ((False, False), (False, True), (True, False), (True, True)):
        table = score_layer(
            manifest,
            features,
            config,
            layer,
            norm_mode=norm_on if dn_flag else NORM_OFF,
            mixup=mixup_on if mix_flag else None,
        )
        report = build_report(table, manifest, config.pauc_p)
        src, tgt = _aggregate_cell(report)
        cells.append(
            AblationCell(
                domain_norm=dn_flag,
                mixup=mix_flag,
                auc_source=src,
                auc_target=tgt,
                official=report.official,
            )
        )

    result = AblationResult(
        cells=tuple(cells),
        layer=layer,
        config=config.snapshot(layer=layer, dn_on_mode=norm_on, mixup_on_setting=mixup_on),
    )
    if write:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "ablation.csv").write_text(result.to_csv_text(), encoding="utf-8")
        (out / "ablation.json").write_text(result.to_json_text(), encoding="utf-8")
    return result


# --- layer sweep -----------------------------------------------------------


@dataclass(frozen=True)
class LayerSweepResult:
    rows: tuple[tuple[int, MetricsReport], ...]
    config: dict = field(default_factory=dict)

    def to_csv_text(self) -> str:
        machines = [m.machine_type for m in self.rows[0][1].machines]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["layer", "official_score"]
        for machine in machines:
            header += [f"{machine}_auc_source", f"{machine}_auc_target", f"{machine}_pauc"]
        writer.writerow(header)
        for layer, report in self.rows:
            row = [str(layer), format_percent(report.official)]
            for m in report.machines:
                row += [
                    format_percent(m.auc_source),
                    format_percent(m.auc_target),
                    format_percent(m.pauc_mixed),
                ]
            writer.writerow(row)
        return buf.getvalue()

    def to_plot_csv_text(self) -> str:
        """Two numeric columns (layer, official score) for external plotting."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["layer", "official_score"])
        for layer, report in self.rows:
            writer.writerow([str(layer), format_percent(report.official)])
        return buf.getvalue()


def run_layer_sweep(config: ExperimentConfig, *, write: bool = True) -> LayerSweepResult:
    """Per-layer official scores with mixup disabled, mirroring the usual
    layer-comparison protocol."""
    manifest = load_dataset(config)
    layers = resolve_layers(config, manifest)
    rows = []
    for layer in layers:
        features = load_layer_features(manifest, config.dataset_root, layer, config.pooling)
        table = score_layer(manifest, features, config, layer, mixup=None)
        rows.append((layer, build_report(table, manifest, config.pauc_p)))
    result = LayerSweepResult(
        rows=tuple(rows), config=config.snapshot(layers=list(layers), effective_mixup=None)
    )
    if write:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "layer_sweep.csv").write_text(result.to_csv_text(), encoding="utf-8")
        (out / "layer_sweep_plot.csv").write_text(result.to_plot_csv_text(), encoding="utf-8")
    return result


# --- low-shot --------------------------------------------------------------


@dataclass(frozen=True)
class LowShotRun:
    shot_label: str
    seed: int | None
    mean_auc: float
    mean_pauc: float
    per_machine: dict[str, dict[str, float]]


@dataclass(frozen=True)
class LowShotResult:
    runs: tuple[LowShotRun, ...]
    config: dict = field(default_factory=dict)

    def per_shot_means(self) -> dict[str, dict[str, float]]:
        out: dict[str, dict[str, float]] = {}
        for label in dict.fromkeys(r.shot_label for r in self.runs):
            rows = [r for r in self.runs if r.shot_label == label]
            out[label] = {
                "runs": len(rows),
                "mean_auc": float(np.mean([r.mean_auc for r in rows])),
                "mean_pauc": float(np.mean([r.mean_pauc for r in rows])),
            }
        return out

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["shot", "runs", "mean_auc", "mean_pauc"])
        for label, row in self.per_shot_means().items():
            writer.writerow(
                [
                    label,
                    str(row["runs"]),
                    format_percent(row["mean_auc"]),
                    format_percent(row["mean_pauc"]),
                ]
            )
        return buf.getvalue()

    def to_json_text(self) -> str:
        doc = {
            "config": self.config,
            "per_shot": self.per_shot_means(),
            "runs": [
                {
                    "shot": r.shot_label,
                    "seed": r.seed,
                    "mean_auc": r.mean_auc,
                    "mean_pauc": r.mean_pauc,
                    "per_machine": r.per_machine,
                }
                for r in self.runs
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _lowshot_single_run(
    manifest: Manifest,
    features,
    config: ExperimentConfig,
    shot: int | None,
    seed: int | None,
) -> tuple[float, float, dict]:
    """One subsampled run, single-domain: one bank per machine, raw distances."""
    per_machine = {}
    aucs, paucs = [], []
    for machine_index, machine in enumerate(manifest.machine_types()):
        train = manifest.select(machine_type=machine, split="train")
        test = manifest.select(machine_type=machine, split="test")
        if not train or not test:
            raise ValueError(f"machine {machine!r} lacks train or test clips")
        if shot is not None:
            if shot > len(train):
                raise ValueError(
                    f"shot count {shot} exceeds the {len(train)} training clips of {machine!r}"
                )
            rng = np.random.default_rng([seed, shot, machine_index])
            idx = np.sort(rng.choice(len(train), size=shot, replace=False))
            train = [train[i] for i in idx]
        bank = build_bank([features[c.clip_id] for c in train], "source")
        queries = np.vstack([features[c.clip_id].values for c in test]).astype(np.float64)
        scores = anomaly_distances(bank, queries, config.n_neighbors)
        labels = np.array([1 if c.label == "anomalous" else 0 for c in test])
        machine_auc = auc(scores, labels)
        machine_pauc = pauc(scores, labels, config.pauc_p)
        per_machine[machine] = {"auc": machine_auc, "pauc": machine_pauc}
        aucs.append(machine_auc)
        paucs.append(machine_pauc)
    return float(np.mean(aucs)), float(np.mean(paucs)), per_machine


def run_lowshot(
    plan: LowShotPlan, config: ExperimentConfig, *, write: bool = True
) -> LowShotResult:
    """Subsampled-training evaluation, treated single-domain, no mixup.

    Numeric shot counts run once per plan seed; "half" resolves to half the
    smallest training pool, "full" runs once with no sampling. Subsampling
    draws without replacement and is reproducible from (seed, shot count).
    """
    manifest = load_dataset(config)
    layer = _single_layer(config, manifest, "lowshot")
    features = load_layer_features(manifest, config.dataset_root, layer, config.pooling)

    min_train = min(
        len(manifest.select(machine_type=m, split="train")) for m in manifest.machine_types()
    )
    for shot in plan.shot_counts:
        if shot < 1:
            raise ValueError(f"shot counts must be >= 1, got {shot}")
        if shot > min_train:
            raise ValueError(
                f"shot count {shot} exceeds the smallest training pool ({min_train})"
            )

    runs = []
    for shot in plan.shot_counts:
        for seed in plan.seeds:
            mean_auc, mean_pauc, per_machine = _lowshot_single_run(
                manifest, features, config, shot, seed
            )
            runs.append(LowShotRun(str(shot), seed, mean_auc, mean_pauc, per_machine))
    if plan.include_half:
        for seed in plan.seeds:
            mean_auc, mean_pauc, per_machine = _lowshot_single_run(
                manifest, features, config, max(1, min_train // 2), seed
            )
            runs.append(LowShotRun("half", seed, mean_auc, mean_pauc, per_machine))
    if plan.include_full:
        mean_auc, mean_pauc, per_machine = _lowshot_single_run(
            manifest, features, config, None, None
        )
        runs.append(LowShotRun("full", None, mean_auc, mean_pauc, per_machine))

    result = LowShotResult(
        runs=tuple(runs),
        config=config.snapshot(
            layer=layer,
            shot_counts=list(plan.shot_counts),
            include_half=plan.include_half,
            include_full=plan.include_full,
            plan_seeds=list(plan.seeds),
            effective_mixup=None,
        ),
    )
    if write:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "lowshot.csv").write_text(result.to_csv_text(), encoding="utf-8")
        (out / "lowshot.json").write_text(result.to_json_text(), encoding="utf-8")
    return result
