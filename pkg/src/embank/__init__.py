"""embank: kNN memory-bank anomaly scoring for machine-sound embeddings.

Pools pretrained-transformer activations into per-clip feature vectors,
stores normal clips in per-domain memory banks, optionally enriches the
sparse target bank by interpolating toward nearby source features, fuses
per-domain Z-scored nearest-neighbor distances into anomaly scores, and
evaluates with AUC / partial-AUC / harmonic-mean aggregates.
"""

__version__ = "0.1.0"

from .bank import (
    MemoryBank,
    Neighbor,
    RowProvenance,
    build_bank,
    knn_query,
    load_bank,
    mixup_augment,
    save_bank,
)
from .detector import MemoryBankDetector
from .errors import (
    BadMagicError,
    DegenerateScoresError,
    DuplicateClipIdError,
    EmbankError,
    FormatError,
    ManifestError,
    PayloadSizeError,
    TrainLabelError,
    UnsupportedDtypeError,
    UnsupportedVersionError,
)
from .formats import EmbeddingTensor, embedding_path, read_embedding, write_embedding
from .manifest import (
    ClipMeta,
    Manifest,
    ValidationReport,
    load_manifest,
    save_manifest,
    validate_dataset,
)
from .metrics import (
    MachineMetrics,
    MetricsReport,
    auc,
    build_report,
    harmonic_mean,
    official_score,
    pauc,
)
from .pooling import FeatureVector, POOLING_MODES, pool
from .scoring import (
    DomainNormParams,
    ScoreRecord,
    ScoreTable,
    anomaly_distance,
    fit_domain_norm,
    fuse,
    score_dataset,
)
from .synthetic import SyntheticSpec, generate_dataset

__all__ = [
    "__version__",
    "BadMagicError",
    "ClipMeta",
    "DegenerateScoresError",
    "DomainNormParams",
    "DuplicateClipIdError",
    "EmbankError",
    "EmbeddingTensor",
    "FeatureVector",
    "FormatError",
    "MachineMetrics",
    "Manifest",
    "ManifestError",
    "MemoryBank",
    "MemoryBankDetector",
    "MetricsReport",
    "Neighbor",
    "PayloadSizeError",
    "POOLING_MODES",
    "RowProvenance",
    "ScoreRecord",
    "ScoreTable",
    "SyntheticSpec",
    "TrainLabelError",
    "UnsupportedDtypeError",
    "UnsupportedVersionError",
    "ValidationReport",
    "anomaly_distance",
    "auc",
    "build_bank",
    "build_report",
    "embedding_path",
    "fit_domain_norm",
    "fuse",
    "generate_dataset",
    "harmonic_mean",
    "knn_query",
    "load_bank",
    "load_manifest",
    "mixup_augment",
    "official_score",
    "pauc",
    "pool",
    "read_embedding",
    "save_bank",
    "save_manifest",
    "score_dataset",
    "validate_dataset",
    "write_embedding",
]
