"""Exception types for the extraction pipeline."""

from __future__ import annotations


class ExtractError(Exception):
    """Base class for all extractor-specific errors."""


class EncoderLoadError(ExtractError):
    """The encoder or its tokenizer could not be loaded or is unusable."""


class TokenizationMismatch(ExtractError):
    """The tokenizer's word assignment cannot form a valid alignment.

    A word tokenizing to zero pieces is not a mismatch (it is recorded as an
    empty interval); non-contiguous or out-of-order word ownership is.
    """


class AlignmentViolation(ExtractError):
    """A written bundle's alignment contradicts its corpus or is corrupt."""
