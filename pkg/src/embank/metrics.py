"""Evaluation metrics: AUC, partial AUC, harmonic aggregates, report tables.

AUC is the Mann-Whitney statistic normalized by the number of
positive/negative pairs, with ties worth half credit. Partial AUC restricts
the ROC curve to false-positive rates in [0, p] (trapezoidal integration,
linear interpolation at p) and is standardized to [0, 1] with
0.5 * (1 + (raw - min_area) / (max_area - min_area)) where min_area = p^2/2
and max_area = p; the raw value is kept alongside.

The headline aggregate is the harmonic mean of source AUC, target AUC, and
mixed pAUC across all machine types. Arithmetic means are included too for
single-domain, low-shot style reporting.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .manifest import Manifest
from .scoring import ScoreTable

DEFAULT_PAUC_P = 0.1


def _check_labels(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1 or scores.size == 0:
        raise ValueError("scores and labels must be matching non-empty 1-D arrays")
    if not np.isfinite(scores).all():
        raise ValueError("scores contain NaN or Inf")
    if set(np.unique(labels)) - {0, 1}:
        raise ValueError("labels must be 0 (normal) or 1 (anomalous)")
    if labels.min() == labels.max():
        raise ValueError("both classes must be present to compute a ranking metric")
    return scores, labels


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability a random anomalous clip outranks a random normal one.

    Higher scores mean more anomalous; ties count 0.5.
    """
    scores, labels = _check_labels(np.asarray(scores), np.asarray(labels))
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    ranks = rankdata(scores, method="average")
    u = ranks[labels == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def roc_points(scores: np.ndarray, labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """ROC polyline vertices (fpr, tpr), starting at (0, 0), ties grouped."""
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    # last index of each tie group of equal scores
    distinct = np.nonzero(np.diff(sorted_scores))[0]
    bounds = np.concatenate([distinct, [scores.size - 1]])
    tp = np.cumsum(sorted_labels)[bounds]
    fp = (bounds + 1) - tp
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    fpr = np.concatenate([[0.0], fp / n_neg])
    tpr = np.concatenate([[0.0], tp / n_pos])
    return fpr, tpr


def pauc(
    scores: Sequence[float],
    labels: Sequence[int],
    p: float = DEFAULT_PAUC_P,
    *,
    standardize: bool = True,
) -> float:
    """Partial AUC over false-positive rates in [0, p].

    Standardized to [0, 1] by default so 0.5 always means chance level;
    standardize=False returns the raw trapezoid area.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must be in (0, 1], got {p}")
    scores, labels = _check_labels(np.asarray(scores), np.asarray(labels))
    fpr, tpr = roc_points(scores, labels)

    area = 0.0
    for i in range(1, fpr.size):
        x0, x1 = fpr[i - 1], fpr[i]
        y0, y1 = tpr[i - 1], tpr[i]
        if x0 >= p:
            break
        if x1 > p:
            # cut the segment at fpr = p
            y1 = y0 + (y1 - y0) * (p - x0) / (x1 - x0)
            x1 = p
        area += 0.5 * (y0 + y1) * (x1 - x0)
    if not standardize:
        return float(area)
    min_area = 0.5 * p * p
    max_area = p
    return float(0.5 * (1.0 + (area - min_area) / (max_area - min_area)))


def harmonic_mean(values: Sequence[float]) -> float:
    """n / sum(1/v); every value must be strictly positive."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("harmonic mean of an empty sequence is undefined")
    if not (arr > 0).all():
        raise ValueError("harmonic mean requires strictly positive values")
    return float(arr.size / np.sum(1.0 / arr))


@dataclass(frozen=True)
class MachineMetrics:
    machine_type: str
    auc_source: float | None
    auc_target: float | None
    pauc_mixed: float
    pauc_mixed_raw: float
    auc_mixed: float


def official_score(per_machine: Sequence[MachineMetrics]) -> float:
    """Harmonic mean of the flattened source/target AUCs and mixed pAUCs."""
    if not per_machine:
        raise ValueError("official score needs at least one machine")
    values = []
    for m in per_machine:
        if m.auc_source is None or m.auc_target is None:
            raise ValueError(
                f"machine {m.machine_type!r} lacks a domain slice; official score undefined"
            )
        values.extend([m.auc_source, m.auc_target, m.pauc_mixed])
    return harmonic_mean(values)


@dataclass(frozen=True)
class MetricsReport:
    machines: tuple[MachineMetrics, ...]
    official: float | None
    official_raw_pauc: float | None
    arithmetic_mean_auc: float
    arithmetic_mean_pauc: float
    config: dict = field(default_factory=dict)

    def to_json_text(self) -> str:
        doc = {
            "config": self.config,
            "machines": [
                {
                    "machine_type": m.machine_type,
                    "auc_source": m.auc_source,
                    "auc_target": m.auc_target,
                    "pauc_mixed": m.pauc_mixed,
                    "pauc_mixed_raw": m.pauc_mixed_raw,
                    "auc_mixed": m.auc_mixed,
                }
                for m in self.machines
            ],
            "official_score": self.official,
            "official_score_raw_pauc": self.official_raw_pauc,
            "arithmetic_mean_auc": self.arithmetic_mean_auc,
            "arithmetic_mean_pauc": self.arithmetic_mean_pauc,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def to_csv_text(self) -> str:
        """One row per machine plus a harmonic-mean aggregate row.

        Values are percentages with two decimals, matching the usual
        challenge-table formatting.
        """
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            [
                "machine_type",
                "auc_source",
                "auc_target",
                "pauc",
                "pauc_raw",
                "auc_mixed",
                "official_score",
            ]
        )
        for m in self.machines:
            writer.writerow(
                [
                    m.machine_type,
                    format_percent(m.auc_source),
                    format_percent(m.auc_target),
                    format_percent(m.pauc_mixed),
                    format_percent(m.pauc_mixed_raw),
                    format_percent(m.auc_mixed),
                    "",
                ]
            )
        agg_src = _maybe_harmonic([m.auc_source for m in self.machines])
        agg_tgt = _maybe_harmonic([m.auc_target for m in self.machines])
        agg_pauc = _maybe_harmonic([m.pauc_mixed for m in self.machines])
        writer.writerow(
            [
                "aggregate",
                format_percent(agg_src),
                format_percent(agg_tgt),
                format_percent(agg_pauc),
                "",
                format_percent(_maybe_harmonic([m.auc_mixed for m in self.machines])),
                format_percent(self.official),
            ]
        )
        return buf.getvalue()

    def write_json(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json_text(), encoding="utf-8")
        return path

    def write_csv(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv_text(), encoding="utf-8")
        return path


def format_percent(value: float | None) -> str:
    return "" if value is None else f"{100.0 * value:.2f}"


def _maybe_harmonic(values: list[float | None]) -> float | None:
    if any(v is None for v in values):
        return None
    try:
        return harmonic_mean([v for v in values if v is not None])
    except ValueError:
        return None


_LABEL_CODE = {"normal": 0, "anomalous": 1}


def build_report(
    table: ScoreTable, manifest: Manifest, p: float = DEFAULT_PAUC_P
) -> MetricsReport:
    """Slice scored clips per machine type and domain and aggregate.

    Source/target AUC use only that domain's test clips; the mixed pAUC (and
    auc_mixed) use all test clips of the machine. Every scored clip must
    carry a known label. A missing domain leaves that AUC as None; a present
    but single-class slice is an error.
    """
    scores_by_machine: dict[str, dict[str, list]] = {}
    for record in table.records:
        clip = manifest.clip(record.clip_id)
        if clip.label not in _LABEL_CODE:
            raise ValueError(
                f"clip {record.clip_id!r} has label {clip.label!r}; metrics need known labels"
            )
        slot = scores_by_machine.setdefault(
            clip.machine_type, {"scores": [], "labels": [], "domains": []}
        )
        slot["scores"].append(record.final_score)
        slot["labels"].append(_LABEL_CODE[clip.label])
        slot["domains"].append(clip.domain)

    machines = []
    for machine in manifest.machine_types():
        if machine not in scores_by_machine:
            continue
        slot = scores_by_machine[machine]
        scores = np.asarray(slot["scores"], dtype=np.float64)
        labels = np.asarray(slot["labels"], dtype=np.int64)
        domains = np.asarray(slot["domains"], dtype=object)
        per_domain: dict[str, float | None] = {}
        for domain in ("source", "target"):
            sel = domains == domain
            if not sel.any():
                per_domain[domain] = None
                continue
            if labels[sel].min() == labels[sel].max():
                raise ValueError(
                    f"machine {machine!r}, domain {domain}: only one class present"
                )
            per_domain[domain] = auc(scores[sel], labels[sel])
        machines.append(
            MachineMetrics(
                machine_type=machine,
                auc_source=per_domain["source"],
                auc_target=per_domain["target"],
                pauc_mixed=pauc(scores, labels, p),
                pauc_mixed_raw=pauc(scores, labels, p, standardize=False),
                auc_mixed=auc(scores, labels),
            )
        )
    if not machines:
        raise ValueError("no scored clips matched the manifest")

    try:
        official = official_score(machines)
    except ValueError:
        official = None
    official_raw = None
    if official is not None:
        try:
            official_raw = harmonic_mean(
                [v for m in machines for v in (m.auc_source, m.auc_target, m.pauc_mixed_raw)]
            )
        except ValueError:
            pass  # a raw pAUC of zero leaves the raw aggregate undefined

    return MetricsReport(
        machines=tuple(machines),
        official=official,
        official_raw_pauc=official_raw,
        arithmetic_mean_auc=float(np.mean([m.auc_mixed for m in machines])),
        arithmetic_mean_pauc=float(np.mean([m.pauc_mixed for m in machines])),
        config=dict(table.config),
    )
