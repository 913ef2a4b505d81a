"""Per-token transformer hidden-state extraction into probing bundles."""

from .errors import AlignmentViolation, EncoderLoadError, ExtractError, TokenizationMismatch
from .extract import (
    MODES,
    AlignmentReport,
    ExtractionJob,
    extract,
    load_encoder,
    verify_alignment,
    word_intervals,
)

__all__ = [
    "MODES",
    "AlignmentReport",
    "AlignmentViolation",
    "EncoderLoadError",
    "ExtractError",
    "ExtractionJob",
    "TokenizationMismatch",
    "extract",
    "load_encoder",
    "verify_alignment",
    "word_intervals",
]
