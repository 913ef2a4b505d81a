"""Exception types shared across the package.

Recoverable conditions (insufficient negatives, no multi-template documents,
empty strata) are reported through warnings and dataset/report fields rather
than raised; the classes here are hard failures.
"""

from __future__ import annotations


class DocprobeError(Exception):
    """Base class for all package-specific errors."""


class MalformedInput(DocprobeError):
    """Input file violates the documented schema; message names the offending field."""


class OffsetResolutionError(DocprobeError):
    """A gold mention string could not be located in its document's words."""

    def __init__(self, doc_id: str, mention: str):
        super().__init__(f"mention {mention!r} not locatable in document {doc_id!r}")
        self.doc_id = doc_id
        self.mention = mention


class EmptyCorpus(DocprobeError):
    """An operation that needs documents received a corpus without any."""


class DimensionMismatch(DocprobeError):
    """Tensor shapes or layer sets disagree with the bundle manifest."""


class CorruptFile(DocprobeError):
    """A tensor file failed magic, size, finiteness, or alignment validation."""


class UnknownDoc(DocprobeError):
    """A document id is absent from the bundle's doc index."""


class LayerNotInBundle(DocprobeError):
    """A requested layer id is not stored for this document or bundle."""


class DegenerateDistribution(DocprobeError):
    """Too few distinct count values to form even two quantile buckets."""

    def __init__(self, distinct: int):
        super().__init__(
            f"cannot bucket a distribution with {distinct} distinct value(s); need at least 2"
        )
        self.k_prime = distinct


class ShapeMismatch(DocprobeError):
    """Probe inputs disagree with the model's expected dimensions."""


class EmptyInput(DocprobeError):
    """A probe forward pass received an input with zero token rows."""


class NonFiniteLoss(DocprobeError):
    """Training produced a NaN or infinite loss."""


class EmptySplit(DocprobeError):
    """A dataset split required for training or evaluation has no usable examples."""


class KeyMismatch(DocprobeError):
    """Two result tables being compared do not cover the same cells."""
