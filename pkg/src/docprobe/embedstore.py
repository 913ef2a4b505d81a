"""On-disk bundles of frozen per-token encoder embeddings.

A bundle directory holds ``manifest.json`` plus one binary tensor file per
document. All integers are little-endian u32, all floats little-endian
float32. Tensor file layout:

    magic           4 bytes, ASCII "DPE1"
    n_layers        u32
    n_tokens        u32
    hidden_dim      u32
    layer_ids       n_layers x u32, strictly increasing
    n_words         u32
    truncated_from  u32, word index; 0xFFFFFFFF means "not truncated"
    word_to_tokens  n_words x (u32 start, u32 end), half-open token intervals,
                    non-overlapping, non-decreasing; empty (start == end) means
                    the word owns no token rows
    payload         n_layers blocks, manifest layer order, each block
                    n_tokens x hidden_dim float32, token-major (C order)

Tokens not covered by any word interval (special tokens such as [CLS]/[SEP])
are stored but unaddressable via word lookup. ``manifest.json`` carries
encoder_name, mode ("FullText" or "SentCat"), hidden_dim, layer_ids,
max_tokens, and doc_index (doc_id -> relative tensor path); it is written
last so a crashed writer never leaves a readable-looking bundle.
"""

from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import (
    CorruptFile,
    DimensionMismatch,
    LayerNotInBundle,
    UnknownDoc,
)

MAGIC = b"DPE1"
MODES = ("FullText", "SentCat")
_TRUNC_NONE = 0xFFFFFFFF


class _Dropped:
    """Singleton marker for words with no surviving token rows."""

    __slots__ = ()

    def __repr__(self) -> str:
        return "DROPPED"

    def __bool__(self) -> bool:
        return False


DROPPED = _Dropped()


@dataclass(frozen=True)
class AlignmentMap:
    """Word -> token interval map, plus the first word cut by truncation (if any)."""

    word_to_tokens: tuple[tuple[int, int], ...]
    truncated_from_word: int | None = None

    @property
    def n_words(self) -> int:
        return len(self.word_to_tokens)

    def validate(self, n_tokens: int) -> None:
        prev_end = 0
        for w, (s, e) in enumerate(self.word_to_tokens):
            if not (0 <= s <= e <= n_tokens):
                raise ValueError(f"word {w}: interval [{s}, {e}) outside [0, {n_tokens})")
            if s < prev_end:
                raise ValueError(f"word {w}: interval [{s}, {e}) overlaps previous end {prev_end}")
            prev_end = max(prev_end, e)
        t = self.truncated_from_word
        if t is not None and not (0 <= t <= self.n_words):
            raise ValueError(f"truncated_from_word {t} outside [0, {self.n_words}]")


@dataclass
class DocEmbedding:
    """Per-layer token matrices for one document, with word alignment."""

    doc_id: str
    tensors: dict[int, np.ndarray]
    alignment: AlignmentMap

    @property
    def layer_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self.tensors))

    @property
    def n_tokens(self) -> int:
        first = next(iter(self.tensors.values()))
        return int(first.shape[0])

    @property
    def hidden_dim(self) -> int:
        first = next(iter(self.tensors.values()))
        return int(first.shape[1])

    def validate(self) -> None:
        if not self.tensors:
            raise ValueError(f"{self.doc_id}: no layers")
        shape = None
        for layer, arr in self.tensors.items():
            if arr.ndim != 2:
                raise ValueError(f"{self.doc_id}: layer {layer} tensor is not 2-D")
            if shape is None:
                shape = arr.shape
            elif arr.shape != shape:
                raise DimensionMismatch(
                    f"{self.doc_id}: layer {layer} shape {arr.shape} != {shape}"
                )
        self.alignment.validate(self.n_tokens)


@dataclass(frozen=True)
class BundleManifest:
    encoder_name: str
    mode: str
    hidden_dim: int
    layer_ids: tuple[int, ...]
    max_tokens: int
    doc_index: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be positive")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if not self.layer_ids:
            raise ValueError("layer_ids must be non-empty")
        if any(b <= a for a, b in zip(self.layer_ids, self.layer_ids[1:])):
            raise ValueError(f"layer_ids must be strictly increasing, got {self.layer_ids}")

    def to_json_text(self) -> str:
        obj = {
            "encoder_name": self.encoder_name,
            "mode": self.mode,
            "hidden_dim": self.hidden_dim,
            "layer_ids": list(self.layer_ids),
            "max_tokens": self.max_tokens,
            "doc_index": dict(sorted(self.doc_index.items())),
        }
        return json.dumps(obj, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json_obj(cls, obj: dict) -> "BundleManifest":
        try:
            manifest = cls(
                encoder_name=obj["encoder_name"],
                mode=obj["mode"],
                hidden_dim=int(obj["hidden_dim"]),
                layer_ids=tuple(int(x) for x in obj["layer_ids"]),
                max_tokens=int(obj["max_tokens"]),
                doc_index=dict(obj["doc_index"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptFile(f"malformed manifest: {exc}") from exc
        manifest.validate()
        return manifest


def _doc_file_bytes(doc: DocEmbedding, layer_ids: tuple[int, ...]) -> bytes:
    align = doc.alignment
    trunc = _TRUNC_NONE if align.truncated_from_word is None else align.truncated_from_word
    parts = [
        MAGIC,
        struct.pack("<III", len(layer_ids), doc.n_tokens, doc.hidden_dim),
        struct.pack(f"<{len(layer_ids)}I", *layer_ids),
        struct.pack("<II", align.n_words, trunc),
    ]
    for s, e in align.word_to_tokens:
        parts.append(struct.pack("<II", s, e))
    for layer in layer_ids:
        parts.append(np.ascontiguousarray(doc.tensors[layer], dtype="<f4").tobytes())
    return b"".join(parts)


def _parse_doc_file(data: bytes, path: str) -> DocEmbedding:
    def fail(why: str):
        raise CorruptFile(f"{path}: {why}")

    if len(data) < 16 or data[:4] != MAGIC:
        fail("bad magic")
    n_layers, n_tokens, hidden = struct.unpack_from("<III", data, 4)
    if n_layers == 0:
        fail("no layers")
    offset = 16
    if len(data) < offset + 4 * n_layers + 8:
        fail("truncated header")
    layer_ids = struct.unpack_from(f"<{n_layers}I", data, offset)
    offset += 4 * n_layers
    n_words, trunc = struct.unpack_from("<II", data, offset)
    offset += 8
    if len(data) < offset + 8 * n_words:
        fail("truncated alignment table")
    flat = struct.unpack_from(f"<{2 * n_words}I", data, offset)
    offset += 8 * n_words
    word_to_tokens = tuple((flat[2 * i], flat[2 * i + 1]) for i in range(n_words))

    expected = offset + 4 * n_layers * n_tokens * hidden
    if len(data) != expected:
        fail(f"size {len(data)} != expected {expected}")

    tensors: dict[int, np.ndarray] = {}
    block = 4 * n_tokens * hidden
    for layer in layer_ids:
        arr = np.frombuffer(data, dtype="<f4", count=n_tokens * hidden, offset=offset)
        tensors[layer] = arr.reshape(n_tokens, hidden).copy()
        offset += block
    for layer, arr in tensors.items():
        if not np.isfinite(arr).all():
            fail(f"layer {layer} contains NaN or Inf")

    alignment = AlignmentMap(word_to_tokens, None if trunc == _TRUNC_NONE else trunc)
    try:
        alignment.validate(n_tokens)
    except ValueError as exc:
        fail(str(exc))
    if len(set(layer_ids)) != n_layers:
        fail("duplicate layer ids")
    return DocEmbedding("", tensors, alignment)


def _safe_name(doc_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", doc_id) or "doc"


def write_bundle(manifest: BundleManifest, docs, out_dir: str | Path) -> None:
    """Write tensor files then the manifest (manifest last).

    ``docs`` is an iterable of DocEmbedding. When ``manifest.doc_index`` is
    empty, paths are auto-assigned under ``tensors/``; otherwise every streamed
    document must already have an index entry, and every entry must be written.
    """
    manifest.validate()
    out = Path(out_dir)
    (out / "tensors").mkdir(parents=True, exist_ok=True)
    preassigned = dict(manifest.doc_index)
    auto = not preassigned
    written: dict[str, str] = {}
    for doc in docs:
        doc.validate()
        if doc.doc_id in written:
            raise DimensionMismatch(f"duplicate document {doc.doc_id!r} in bundle stream")
        if set(doc.tensors) != set(manifest.layer_ids):
            raise DimensionMismatch(
                f"{doc.doc_id}: layers {sorted(doc.tensors)} != manifest {list(manifest.layer_ids)}"
            )
        if doc.hidden_dim != manifest.hidden_dim:
            raise DimensionMismatch(
                f"{doc.doc_id}: hidden_dim {doc.hidden_dim} != manifest {manifest.hidden_dim}"
            )
        if auto:
            rel = f"tensors/{_safe_name(doc.doc_id)}.dpe"
            if rel in written.values():
                rel = f"tensors/{_safe_name(doc.doc_id)}-{len(written)}.dpe"
        else:
            if doc.doc_id not in preassigned:
                raise UnknownDoc(f"{doc.doc_id!r} missing from manifest doc_index")
            rel = preassigned[doc.doc_id]
        target = out / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(_doc_file_bytes(doc, manifest.layer_ids))
        written[doc.doc_id] = rel
    if not auto and set(written) != set(preassigned):
        missing = sorted(set(preassigned) - set(written))
        raise UnknownDoc(f"doc_index entries never written: {missing}")
    final = replace(manifest, doc_index=written)
    (out / "manifest.json").write_text(final.to_json_text(), encoding="utf-8")


class BundleReader:
    """Lazy per-document access to a written bundle. Stateless reads, thread-safe."""

    def __init__(self, root: Path, manifest: BundleManifest):
        self._root = root
        self.manifest = manifest

    @property
    def doc_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.manifest.doc_index))

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.manifest.doc_index

    def __getitem__(self, doc_id: str) -> DocEmbedding:
        rel = self.manifest.doc_index.get(doc_id)
        if rel is None:
            raise UnknownDoc(f"{doc_id!r} not in bundle {self._root}")
        path = self._root / rel
        try:
            data = path.read_bytes()
        except FileNotFoundError as exc:
            raise CorruptFile(f"{path}: tensor file missing") from exc
        doc = _parse_doc_file(data, str(path))
        if tuple(sorted(doc.tensors)) != self.manifest.layer_ids:
            raise CorruptFile(f"{path}: layer ids disagree with manifest")
        if doc.hidden_dim != self.manifest.hidden_dim:
            raise CorruptFile(f"{path}: hidden_dim disagrees with manifest")
        doc.doc_id = doc_id
        return doc

    def get(self, doc_id: str) -> DocEmbedding | None:
        return self[doc_id] if doc_id in self else None


def read_bundle(bundle_dir: str | Path) -> tuple[BundleManifest, BundleReader]:
    root = Path(bundle_dir)
    manifest_path = root / "manifest.json"
    try:
        obj = json.loads(manifest_path.read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise CorruptFile(f"{manifest_path}: missing manifest") from exc
    except json.JSONDecodeError as exc:
        raise CorruptFile(f"{manifest_path}: invalid JSON: {exc}") from exc
    manifest = BundleManifest.from_json_obj(obj)
    return manifest, BundleReader(root, manifest)


def word_has_vector(doc: DocEmbedding, word_idx: int) -> bool:
    """True when the word still owns at least one token row."""
    align = doc.alignment
    if not (0 <= word_idx < align.n_words):
        raise IndexError(f"word {word_idx} outside [0, {align.n_words})")
    t = align.truncated_from_word
    if t is not None and word_idx >= t:
        return False
    s, e = align.word_to_tokens[word_idx]
    return e > s


def first_token_vector(doc: DocEmbedding, layer: int, word_idx: int):
    """Row of the word's first wordpiece at the given layer, or DROPPED.

    DROPPED covers words beyond the truncation point and words whose token
    interval is empty (tokenizer produced no pieces, or truncation emptied it).
    """
    if layer not in doc.tensors:
        raise LayerNotInBundle(f"{doc.doc_id}: layer {layer} not stored")
    if not word_has_vector(doc, word_idx):
        return DROPPED
    start = doc.alignment.word_to_tokens[word_idx][0]
    return doc.tensors[layer][start]


def truncate(doc: DocEmbedding, max_tokens: int) -> DocEmbedding:
    """Clip to the first max_tokens token rows, marking the first fully-cut word.

    Idempotent; identity when the document already fits. Words partially or
    fully cut get clipped intervals (empty when nothing survives), and
    ``truncated_from_word`` becomes the first word whose interval started at or
    beyond the budget (kept if an earlier marker already exists).
    """
    if max_tokens < 1:
        raise ValueError("max_tokens must be positive")
    if doc.n_tokens <= max_tokens:
        return doc
    new_tensors = {layer: arr[:max_tokens].copy() for layer, arr in doc.tensors.items()}
    old = doc.alignment
    clipped = tuple((min(s, max_tokens), min(e, max_tokens)) for s, e in old.word_to_tokens)
    cut = next((w for w, (s, _) in enumerate(old.word_to_tokens) if s >= max_tokens), None)
    candidates = [t for t in (old.truncated_from_word, cut) if t is not None]
    trunc = min(candidates) if candidates else None
    return DocEmbedding(doc.doc_id, new_tensors, AlignmentMap(clipped, trunc))


def concat_doc_embeddings(parts: list[DocEmbedding], doc_id: str) -> DocEmbedding:
    """Concatenate per-part token rows; word offsets rebase onto the joint stream.

    A truncation marker from the final part is offset and kept (a suffix is
    representable); markers from earlier parts are dropped because the words
    they cover already carry empty intervals, which readers treat as dropped.
    """
    if not parts:
        raise ValueError("need at least one part")
    layer_ids = parts[0].layer_ids
    hidden = parts[0].hidden_dim
    for p in parts[1:]:
        if p.layer_ids != layer_ids:
            raise DimensionMismatch(f"layer sets differ: {p.layer_ids} != {layer_ids}")
        if p.hidden_dim != hidden:
            raise DimensionMismatch(f"hidden dims differ: {p.hidden_dim} != {hidden}")
    tensors = {
        layer: np.concatenate([p.tensors[layer] for p in parts], axis=0) for layer in layer_ids
    }
    intervals: list[tuple[int, int]] = []
    token_offset = 0
    word_offset = 0
    trunc: int | None = None
    for i, p in enumerate(parts):
        intervals.extend((s + token_offset, e + token_offset) for s, e in p.alignment.word_to_tokens)
        t = p.alignment.truncated_from_word
        if t is not None and i == len(parts) - 1:
            trunc = word_offset + t
        token_offset += p.n_tokens
        word_offset += p.alignment.n_words
    return DocEmbedding(doc_id, tensors, AlignmentMap(tuple(intervals), trunc))
