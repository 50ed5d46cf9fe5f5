"""scikit-learn style front end over the memory-bank scoring core.

The estimator fits per-domain banks from normal training features and scores
test batches with the same machinery the CLI uses, so it drops into sklearn
pipelines and utilities (get_params / set_params / clone all work).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .bank import MemoryBank, mixup_augment
from .pooling import FeatureVector
from .scoring import NORM_MODES, ScoreTable, score_dataset
from .validation import check_domain_labels, check_feature_matrix


class MemoryBankDetector(BaseEstimator):
    """Anomaly scorer backed by source/target kNN memory banks.

    Parameters
    ----------
    n_neighbors : int, default 1
        How many nearest bank rows are averaged into a raw score.
    mixup_neighbors : int or "full" or None, default None
        When set, the target bank is augmented with interpolations toward
        this many nearest source rows per target row ("full" uses every
        source row). None disables augmentation.
    mixup_weight : float, default 0.9
        Interpolation weight toward the target row.
    normalization : {"off", "transductive", "train_loo"}, default "transductive"
        How per-domain Z-score statistics are obtained before min-fusion.

    Notes
    -----
    score_samples returns *anomaly* scores: higher means more anomalous,
    which is the orientation the AUC metrics expect (the opposite of most
    sklearn outlier detectors).
    """

    def __init__(
        self,
        n_neighbors: int = 1,
        mixup_neighbors: int | str | None = None,
        mixup_weight: float = 0.9,
        normalization: str = "transductive",
    ):
        self.n_neighbors = n_neighbors
        self.mixup_neighbors = mixup_neighbors
        self.mixup_weight = mixup_weight
        self.normalization = normalization

    def fit(self, X, y):
        """Build the per-domain banks from normal training features.

        X is an (n_clips, dim) matrix; y gives each row's domain, "source"
        or "target".
        """
        if self.normalization not in NORM_MODES:
            raise ValueError(
                f"normalization must be one of {NORM_MODES}, got {self.normalization!r}"
            )
        X = check_feature_matrix(X)
        y = check_domain_labels(y, X.shape[0])
        source = MemoryBank("source", X[y == "source"])
        target = MemoryBank("target", X[y == "target"])
        if self.mixup_neighbors is not None:
            k_s = self._resolve_mixup_neighbors(source.n_rows)
            target = mixup_augment(source, target, k_s, self.mixup_weight)
        self.source_bank_ = source
        self.target_bank_ = target
        self.n_features_in_ = X.shape[1]
        return self

    def _resolve_mixup_neighbors(self, n_source: int) -> int:
        if self.mixup_neighbors == "full":
            return n_source
        k_s = int(self.mixup_neighbors)
        if not 1 <= k_s <= n_source:
            raise ValueError(
                f"mixup_neighbors={k_s} must be in [1, {n_source}] for this source bank"
            )
        return k_s

    def _check_fitted(self) -> None:
        if not hasattr(self, "source_bank_"):
            raise RuntimeError("detector is not fitted; call fit(X, y) first")

    def score_table(self, X, clip_ids=None, groups=None) -> ScoreTable:
        """Full per-clip score breakdown for a test batch."""
        self._check_fitted()
        X = check_feature_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features but the detector was fitted with {self.n_features_in_}"
            )
        if clip_ids is None:
            clip_ids = [f"clip{i:05d}" for i in range(X.shape[0])]
        feats = [
            FeatureVector(clip_id=str(cid), layer=0, values=row)
            for cid, row in zip(clip_ids, X)
        ]
        return score_dataset(
            self.source_bank_,
            self.target_bank_,
            feats,
            n_neighbors=self.n_neighbors,
            norm_mode=self.normalization,
            groups=groups,
        )

    def score_samples(self, X) -> np.ndarray:
        """Fused anomaly score per row; higher = more anomalous."""
        return self.score_table(X).final_scores()

    def decision_function(self, X) -> np.ndarray:
        return self.score_samples(X)

    def predict_domain(self, X) -> np.ndarray:
        """Which domain bank each test row is attributed to."""
        table = self.score_table(X)
        return np.array([r.attributed_domain for r in table.records], dtype=object)
