"""Exception types shared across the package.

File-format problems get their own hierarchy so callers can distinguish a
corrupt file from an ordinary argument error; everything else raises plain
ValueError subclasses.
"""


class EmbankError(Exception):
    """Base class for all package-specific errors."""


class FormatError(EmbankError, ValueError):
    """A binary embedding or bank file violates the on-disk layout."""


class BadMagicError(FormatError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersionError(FormatError):
    """File declares a format version this reader does not understand."""


class UnsupportedDtypeError(FormatError):
    """File declares an element dtype code this reader does not understand."""


class PayloadSizeError(FormatError):
    """Payload length disagrees with the dimensions in the header."""


class ManifestError(EmbankError, ValueError):
    """Dataset manifest is unreadable or violates an invariant."""


class DuplicateClipIdError(ManifestError):
    """Two manifest entries share the same clip_id."""


class TrainLabelError(ManifestError):
    """A train-split clip carries a label other than normal."""


class DegenerateScoresError(EmbankError, ValueError):
    """Score population too small or constant; Z-score parameters undefined."""
