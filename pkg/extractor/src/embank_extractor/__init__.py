"""WAV-to-EMB1 embedding extraction with a frozen audio patch transformer."""

__version__ = "0.1.0"

from .audio import AudioReadError, load_clip, read_wav, write_wav
from .emb1 import Emb1Error, embedding_path, read_emb1, write_emb1
from .extract import (
    ExtractionResult,
    ExtractionSpec,
    VerifyReport,
    extract,
    load_clip_listing,
    verify_roundtrip,
)
from .fbank import log_mel_spectrogram, num_frames, povey_window
from .model import (
    AudioPatchTransformer,
    CheckpointConfig,
    init_checkpoint,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "__version__",
    "AudioPatchTransformer",
    "AudioReadError",
    "CheckpointConfig",
    "Emb1Error",
    "ExtractionResult",
    "ExtractionSpec",
    "VerifyReport",
    "embedding_path",
    "extract",
    "init_checkpoint",
    "load_checkpoint",
    "load_clip",
    "load_clip_listing",
    "log_mel_spectrogram",
    "num_frames",
    "povey_window",
    "read_emb1",
    "read_wav",
    "save_checkpoint",
    "verify_roundtrip",
    "write_emb1",
    "write_wav",
]
