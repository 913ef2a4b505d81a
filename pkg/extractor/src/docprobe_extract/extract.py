"""Dump per-token transformer hidden states into docprobe embedding bundles.

Two encoding modes: FullText tokenizes the whole document, truncates to the
token budget, and runs one forward pass; SentCat encodes each sentence
independently (no cross-sentence context by construction) and concatenates
the token matrices in sentence order. Word alignment travels with the
tensors: each word owns the contiguous token interval the tokenizer produced
for it, special tokens are kept in the tensor but owned by no word, and a
word tokenized to zero pieces gets an empty interval (its examples drop
downstream).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from docprobe import (
    AlignmentMap,
    BundleManifest,
    Corpus,
    CorruptFile,
    DimensionMismatch,
    DocEmbedding,
    concat_doc_embeddings,
    read_bundle,
    write_bundle,
)

from .errors import AlignmentViolation, EncoderLoadError, TokenizationMismatch

MODES = ("FullText", "SentCat")


@dataclass(frozen=True)
class ExtractionJob:
    """One extraction run; mode and max_tokens are recorded verbatim in the manifest."""

    corpus_path: str
    encoder: str
    mode: str
    layers: tuple[int, ...] | str = "all"
    max_tokens: int = 512
    out_dir: str = "bundle"
    corpus_format: str = "muc-json"
    device: str = "cpu"

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if self.layers != "all":
            if not self.layers or any(l < 0 for l in self.layers):
                raise ValueError(f"bad layer list {self.layers!r}")


def load_encoder(name_or_path: str, device: str = "cpu"):
    """Load a pretrained encoder and its fast tokenizer for inference.

    Returns (encoder module, tokenizer, n_layers, hidden_dim) where n_layers
    counts hidden-state outputs: encoder depth + 1, index 0 the embedding
    layer. Encoder-decoder models contribute their encoder stack only.
    """
    from transformers import AutoModel, AutoTokenizer

    try:
        tokenizer = AutoTokenizer.from_pretrained(name_or_path)
        model = AutoModel.from_pretrained(name_or_path)
    except Exception as exc:
        raise EncoderLoadError(f"cannot load encoder {name_or_path!r}: {exc}") from exc
    if not getattr(tokenizer, "is_fast", False):
        raise EncoderLoadError(
            f"{name_or_path!r} has no fast tokenizer; word alignment needs one"
        )
    if getattr(model.config, "is_encoder_decoder", False):
        model = model.get_encoder()
    model.eval()
    model.to(device)
    config = model.config
    depth = getattr(config, "num_hidden_layers", None)
    if depth is None:
        depth = getattr(config, "num_layers", None)
    hidden = getattr(config, "hidden_size", None)
    if hidden is None:
        hidden = getattr(config, "d_model", None)
    if depth is None or hidden is None:
        raise EncoderLoadError(f"{name_or_path!r}: cannot determine encoder depth or width")
    return model, tokenizer, int(depth) + 1, int(hidden)


def word_intervals(word_ids: list[int | None], n_words: int) -> tuple[tuple[int, int], ...]:
    """Token intervals per word from a fast tokenizer's word_ids sequence.

    Special tokens (None entries) belong to no word. Words absent from the
    sequence get an empty interval at the previous word's end. A word owning
    non-contiguous tokens, appearing out of order, or indexing outside the
    word range raises TokenizationMismatch.
    """
    first: dict[int, int] = {}
    last: dict[int, int] = {}
    prev = -1
    for t, w in enumerate(word_ids):
        if w is None:
            continue
        if not (0 <= w < n_words):
            raise TokenizationMismatch(f"token {t} assigned to word {w}, outside [0, {n_words})")
        if w not in first:
            if w < prev:
                raise TokenizationMismatch(f"word ids regress at token {t}: {prev} then {w}")
            first[w] = t
        elif w != prev:
            raise TokenizationMismatch(f"word {w} owns non-contiguous token rows")
        last[w] = t
        prev = w
    intervals = []
    prev_end = 0
    for w in range(n_words):
        if w in first:
            s, e = first[w], last[w] + 1
        else:
            s = e = prev_end
        intervals.append((s, e))
        prev_end = max(prev_end, e)
    return tuple(intervals)


def _clip_alignment(
    intervals: tuple[tuple[int, int], ...], max_tokens: int
) -> tuple[tuple[tuple[int, int], ...], int | None]:
    """Clip intervals to a token budget; mark the first fully-cut word."""
    clipped = tuple((min(s, max_tokens), min(e, max_tokens)) for s, e in intervals)
    cut = next((w for w, (s, _) in enumerate(intervals) if s >= max_tokens), None)
    return clipped, cut


class _Encoder:
    """Tokenize-and-forward wrapper shared by both extraction modes."""

    def __init__(self, model, tokenizer, layer_ids: tuple[int, ...], max_tokens: int, device: str):
        self.model = model
        self.tokenizer = tokenizer
        self.layer_ids = layer_ids
        self.max_tokens = max_tokens
        self.device = device

    def encode_words(self, words: list[str], piece_id: str) -> DocEmbedding:
        enc = self.tokenizer(
            words, is_split_into_words=True, add_special_tokens=True, truncation=False
        )
        intervals = word_intervals(enc.word_ids(), len(words))
        input_ids = enc["input_ids"]
        if len(input_ids) > self.max_tokens:
            input_ids = input_ids[: self.max_tokens]
            intervals, truncated_from = _clip_alignment(intervals, self.max_tokens)
        else:
            truncated_from = None
        ids = torch.tensor([input_ids], dtype=torch.long, device=self.device)
        mask = torch.ones_like(ids)
        with torch.no_grad():
            out = self.model(input_ids=ids, attention_mask=mask, output_hidden_states=True)
        tensors = {
            layer: np.asarray(
                out.hidden_states[layer][0].cpu().numpy(), dtype=np.float32
            ).copy()
            for layer in self.layer_ids
        }
        return DocEmbedding(piece_id, tensors, AlignmentMap(intervals, truncated_from))


def _fulltext(enc: _Encoder, doc) -> DocEmbedding:
    return enc.encode_words(list(doc.words), doc.doc_id)


def _sentcat(enc: _Encoder, doc) -> DocEmbedding:
    parts = [
        enc.encode_words(list(doc.words[s:e]), f"{doc.doc_id}#s{i}")
        for i, (s, e) in enumerate(doc.sentence_bounds)
    ]
    return concat_doc_embeddings(parts, doc.doc_id)


def extract(job: ExtractionJob) -> Path:
    """Run one extraction job; returns the written bundle directory.

    Deterministic given fixed encoder weights: eval mode, no dropout, no
    gradient state, one document (or sentence) per forward pass.
    """
    from docprobe import parse_corpus

    job.validate()
    corpus = parse_corpus(job.corpus_path, job.corpus_format)
    model, tokenizer, n_layers, hidden = load_encoder(job.encoder, job.device)
    if job.layers == "all":
        layer_ids = tuple(range(n_layers))
    else:
        layer_ids = tuple(sorted(set(job.layers)))
        bad = [l for l in layer_ids if l >= n_layers]
        if bad:
            raise EncoderLoadError(
                f"layers {bad} out of range; encoder exposes layers 0..{n_layers - 1}"
            )
    manifest = BundleManifest(
        encoder_name=job.encoder,
        mode=job.mode,
        hidden_dim=hidden,
        layer_ids=layer_ids,
        max_tokens=job.max_tokens,
    )
    encoder = _Encoder(model, tokenizer, layer_ids, job.max_tokens, job.device)
    per_doc = _fulltext if job.mode == "FullText" else _sentcat
    write_bundle(manifest, (per_doc(encoder, doc) for doc in corpus.documents), job.out_dir)
    return Path(job.out_dir)


@dataclass(frozen=True)
class AlignmentReport:
    """Outcome of checking a bundle's alignment against its corpus."""

    n_docs: int
    n_words: int
    violations: tuple[str, ...] = ()
    lost_to_truncation: dict[str, int] = field(default_factory=dict)

    @property
    def total_lost(self) -> int:
        return sum(self.lost_to_truncation.values())

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_alignment(bundle_dir: str | Path, corpus: Corpus) -> AlignmentReport:
    """Check every document's word-token alignment in a written bundle.

    Structural corruption (unreadable file, missing document, word count
    mismatch, overlapping or non-monotone intervals) raises
    AlignmentViolation. A word before the truncation point with an empty
    interval is counted as a violation in the report; words at or past the
    truncation point count as lost to truncation.
    """
    try:
        _, reader = read_bundle(bundle_dir)
    except (CorruptFile, ValueError) as exc:
        raise AlignmentViolation(f"{bundle_dir}: unreadable bundle: {exc}") from exc
    violations: list[str] = []
    lost: dict[str, int] = {}
    n_words = 0
    for doc in corpus.documents:
        if doc.doc_id not in reader:
            raise AlignmentViolation(f"{doc.doc_id}: missing from bundle")
        try:
            emb = reader[doc.doc_id]
        except (CorruptFile, DimensionMismatch, ValueError) as exc:
            raise AlignmentViolation(f"{doc.doc_id}: {exc}") from exc
        align = emb.alignment
        if align.n_words != len(doc.words):
            raise AlignmentViolation(
                f"{doc.doc_id}: {align.n_words} alignment entries for {len(doc.words)} words"
            )
        prev_end = 0
        for w, (s, e) in enumerate(align.word_to_tokens):
            if not (0 <= s <= e <= emb.n_tokens) or s < prev_end:
                raise AlignmentViolation(
                    f"{doc.doc_id}: word {w} interval [{s}, {e}) overlaps or leaves bounds"
                )
            prev_end = max(prev_end, e)
        point = align.truncated_from_word
        if point is None:
            point = align.n_words
        elif point < align.n_words:
            lost[doc.doc_id] = align.n_words - point
        for w in range(point):
            s, e = align.word_to_tokens[w]
            if e <= s:
                violations.append(f"{doc.doc_id}: word {w} empty before truncation point")
        n_words += align.n_words
    return AlignmentReport(
        n_docs=len(corpus.documents),
        n_words=n_words,
        violations=tuple(violations),
        lost_to_truncation=lost,
    )
