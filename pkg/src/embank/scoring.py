"""Anomaly scores: per-domain kNN distances, Z-score normalization, fusion.

A test clip's raw score against a bank is the mean of its n_neighbors
smallest squared distances to the bank rows (n_neighbors=1 reduces to the
nearest-neighbor distance). With domain normalization on, the raw source
and target scores are Z-scored per domain and fused by taking the minimum;
the argmin is kept as a domain attribution, ties going to source. With
normalization off the raw scores are fused directly.

Normalization statistics can be fit transductively (on the test batch's raw
scores per domain bank) or on training-side leave-one-out distances; both
the choice and the rest of the configuration are recorded in every
ScoreTable so results remain auditable.

Scoring is read-only over immutable banks and vectorized across clips;
transductive fitting is a barrier step that needs all raw scores first.
Output order always follows the input feature order.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .bank import MemoryBank, knn_distances, pairwise_sqdist
from .errors import DegenerateScoresError
from .pooling import FeatureVector

NORM_OFF = "off"
NORM_TRANSDUCTIVE = "transductive"
NORM_TRAIN_LOO = "train_loo"
NORM_MODES = (NORM_OFF, NORM_TRANSDUCTIVE, NORM_TRAIN_LOO)

FIT_MODES = (NORM_TRANSDUCTIVE, NORM_TRAIN_LOO)


@dataclass(frozen=True)
class DomainNormParams:
    """Mean / population-std pairs for the source and target raw scores."""

    mu_source: float
    sigma_source: float
    mu_target: float
    sigma_target: float
    fit_mode: str

    def __post_init__(self) -> None:
        if self.fit_mode not in FIT_MODES:
            raise ValueError(f"fit_mode must be one of {FIT_MODES}, got {self.fit_mode!r}")
        if not (self.sigma_source > 0 and self.sigma_target > 0):
            raise DegenerateScoresError("sigma must be strictly positive in both domains")


@dataclass(frozen=True)
class ScoreRecord:
    clip_id: str
    raw_d_source: float
    raw_d_target: float
    z_source: float
    z_target: float
    final_score: float
    attributed_domain: str


@dataclass(frozen=True)
class ScoreTable:
    records: tuple[ScoreRecord, ...]
    config: dict = field(default_factory=dict)

    def final_scores(self) -> np.ndarray:
        return np.array([r.final_score for r in self.records], dtype=np.float64)

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            [
                "clip_id",
                "raw_d_source",
                "raw_d_target",
                "z_source",
                "z_target",
                "final_score",
                "attributed_domain",
            ]
        )
        for r in self.records:
            writer.writerow(
                [
                    r.clip_id,
                    repr(r.raw_d_source),
                    repr(r.raw_d_target),
                    repr(r.z_source),
                    repr(r.z_target),
                    repr(r.final_score),
                    r.attributed_domain,
                ]
            )
        return buf.getvalue()

    def to_json_text(self) -> str:
        doc = {
            "config": self.config,
            "records": [
                {
                    "clip_id": r.clip_id,
                    "raw_d_source": r.raw_d_source,
                    "raw_d_target": r.raw_d_target,
                    "z_source": r.z_source,
                    "z_target": r.z_target,
                    "final_score": r.final_score,
                    "attributed_domain": r.attributed_domain,
                }
                for r in self.records
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def write_csv(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv_text(), encoding="utf-8")
        return path

    def write_json(self, path: Path | str) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json_text(), encoding="utf-8")
        return path


def anomaly_distance(bank: MemoryBank, query, n_neighbors: int = 1) -> float:
    """Mean of the n_neighbors smallest squared distances from query to bank."""
    dists, _ = knn_distances(bank, query, n_neighbors)
    return float(dists[0].mean())


def anomaly_distances(bank: MemoryBank, queries, n_neighbors: int = 1) -> np.ndarray:
    """Vectorized anomaly_distance over many queries; returns shape (Q,)."""
    dists, _ = knn_distances(bank, queries, n_neighbors)
    return dists.mean(axis=1)


def _population_stats(values: Sequence[float], what: str) -> tuple[float, float]:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise DegenerateScoresError(f"need at least 2 {what} scores to fit, got {arr.size}")
    mu = float(arr.mean())
    sigma = float(arr.std())  # population (1/N) standard deviation
    if sigma == 0.0:
        raise DegenerateScoresError(f"{what} scores are constant; Z-score undefined")
    return mu, sigma


def fit_domain_norm(
    scores_source: Sequence[float],
    scores_target: Sequence[float],
    mode: str = NORM_TRANSDUCTIVE,
) -> DomainNormParams:
    """Fit per-domain Z-score parameters from raw score populations.

    The caller chooses the populations; `mode` records whether they came from
    the test batch (transductive) or from training leave-one-out distances.
    """
    mu_s, sigma_s = _population_stats(scores_source, "source")
    mu_t, sigma_t = _population_stats(scores_target, "target")
    return DomainNormParams(
        mu_source=mu_s,
        sigma_source=sigma_s,
        mu_target=mu_t,
        sigma_target=sigma_t,
        fit_mode=mode,
    )


def fuse(raw_d_source: float, raw_d_target: float, params: DomainNormParams) -> tuple[float, str]:
    """Z-score both raw distances and take the minimum; ties go to source."""
    z_s = (raw_d_source - params.mu_source) / params.sigma_source
    z_t = (raw_d_target - params.mu_target) / params.sigma_target
    if z_s <= z_t:
        return float(z_s), "source"
    return float(z_t), "target"


def loo_distances(bank: MemoryBank, n_neighbors: int = 1) -> np.ndarray:
    """Leave-one-out score for each original bank row against its own bank.

    A row's own entry is excluded before taking the n_neighbors nearest;
    mixup rows stay in the candidate pool but are never used as queries.
    """
    orig = bank.original_indices()
    if orig.size == 0:
        raise DegenerateScoresError("bank has no original rows to fit on")
    if n_neighbors > bank.n_rows - 1:
        raise ValueError(
            f"n_neighbors={n_neighbors} needs at least {n_neighbors + 1} bank rows for leave-one-out"
        )
    dists = pairwise_sqdist(bank.features[orig], bank.features)
    dists[np.arange(orig.size), orig] = np.inf
    order = np.argsort(dists, axis=1, kind="stable")[:, :n_neighbors]
    return np.take_along_axis(dists, order, axis=1).mean(axis=1)


def _feature_rows(test_features: Sequence[FeatureVector]) -> tuple[list[str], np.ndarray]:
    ids = []
    rows = []
    for fv in test_features:
        ids.append(fv.clip_id)
        rows.append(fv.values.astype(np.float64, copy=False))
    if not rows:
        raise ValueError("no test features to score")
    return ids, np.vstack(rows)


def score_dataset(
    source_bank: MemoryBank,
    target_bank: MemoryBank,
    test_features: Sequence[FeatureVector],
    *,
    n_neighbors: int = 1,
    norm_mode: str = NORM_TRANSDUCTIVE,
    groups: Sequence[str] | None = None,
    config: dict | None = None,
) -> ScoreTable:
    """Score every test clip against both banks and fuse per configuration.

    groups (experimental) fits transductive normalization separately per
    group key, e.g. a section label, instead of over the whole batch.
    """
    if norm_mode not in NORM_MODES:
        raise ValueError(f"norm_mode must be one of {NORM_MODES}, got {norm_mode!r}")
    if groups is not None and norm_mode != NORM_TRANSDUCTIVE:
        raise ValueError("grouped normalization requires transductive mode")
    clip_ids, queries = _feature_rows(test_features)
    if groups is not None and len(groups) != len(clip_ids):
        raise ValueError("groups must parallel test_features")

    raw_s = anomaly_distances(source_bank, queries, n_neighbors)
    raw_t = anomaly_distances(target_bank, queries, n_neighbors)

    if norm_mode == NORM_OFF:
        z_s, z_t = raw_s, raw_t
    elif norm_mode == NORM_TRAIN_LOO:
        params = fit_domain_norm(
            loo_distances(source_bank, n_neighbors),
            loo_distances(target_bank, n_neighbors),
            mode=NORM_TRAIN_LOO,
        )
        z_s = (raw_s - params.mu_source) / params.sigma_source
        z_t = (raw_t - params.mu_target) / params.sigma_target
    elif groups is None:
        params = fit_domain_norm(raw_s, raw_t, mode=NORM_TRANSDUCTIVE)
        z_s = (raw_s - params.mu_source) / params.sigma_source
        z_t = (raw_t - params.mu_target) / params.sigma_target
    else:
        z_s = np.empty_like(raw_s)
        z_t = np.empty_like(raw_t)
        group_arr = np.asarray(groups, dtype=object)
        for g in dict.fromkeys(groups):  # first-appearance order
            sel = group_arr == g
            params = fit_domain_norm(raw_s[sel], raw_t[sel], mode=NORM_TRANSDUCTIVE)
            z_s[sel] = (raw_s[sel] - params.mu_source) / params.sigma_source
            z_t[sel] = (raw_t[sel] - params.mu_target) / params.sigma_target

    final = np.minimum(z_s, z_t)
    attributed = np.where(z_s <= z_t, "source", "target")

    snapshot = {
        "n_neighbors": n_neighbors,
        "norm_mode": norm_mode,
        "grouped_normalization": groups is not None,
    }
    if config:
        snapshot.update(config)

    records = tuple(
        ScoreRecord(
            clip_id=clip_ids[i],
            raw_d_source=float(raw_s[i]),
            raw_d_target=float(raw_t[i]),
            z_source=float(z_s[i]),
            z_target=float(z_t[i]),
            final_score=float(final[i]),
            attributed_domain=str(attributed[i]),
        )
        for i in range(len(clip_ids))
    )
    return ScoreTable(records=records, config=snapshot)
