"""Probing-task dataset builders over a corpus plus an embedding bundle.

Eight tasks, each a classification over frozen embedding references:

  wordct     document word count, 10 quantile buckets       (doc input)
  sentct     document sentence count, 10 quantile buckets   (doc input)
  coref      two role fillers corefer?                      (token pair)
  isarg      is this word a role filler?                    (single token)
  argtyp     which role does this filler play?              (single token)
  coevnt     do two fillers belong to the same template?    (token pair)
  evnttyp<n> incident type from n fillers, e.g. evnttyp2    (token n-tuple)
  evntct     document template count, 3 quantile buckets    (doc input)

Token inputs are first-token references: the embedding row of the first
wordpiece of the span's first word. Examples whose referenced word lost all
token rows to truncation are dropped and counted. Bucket boundaries always
come from the train split only. All sampling is seeded and deterministic;
binary tasks are balanced to an exact 50/50 per split.

Datasets serialize to one JSONL file per split plus a sidecar manifest:

    {"inputs": [{"doc": "d1", "kind": "token", "word": 4}, ...],
     "label": 3, "meta": {...}}
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Corpus, Document, INCIDENT_TYPES, ROLE_NAMES, SPLITS, coref_chains, enumerate_role_fillers
from .embedstore import word_has_vector
from .errors import DegenerateDistribution, UnknownDoc

logger = logging.getLogger(__name__)

DEFAULT_STRATA = (209, 420, 431)
N_COUNT_BUCKETS = 10
N_EVENT_COUNT_BUCKETS = 3

# Report ordering and the three task families.
TASK_ORDER = ("wordct", "sentct", "coref", "isarg", "argtyp", "coevnt", "evnttyp", "evntct")
TASK_FAMILIES = (
    ("surface", ("wordct", "sentct")),
    ("semantic", ("coref", "isarg", "argtyp")),
    ("event", ("coevnt", "evnttyp", "evntct")),
)
_DISPLAY = {
    "wordct": "WordCt",
    "sentct": "SentCt",
    "coref": "Coref",
    "isarg": "IsArg",
    "argtyp": "ArgTyp",
    "coevnt": "CoEvnt",
    "evntct": "EvntCt",
}


def task_base(task: str) -> str:
    """'evnttyp2' -> 'evnttyp'; other names unchanged."""
    return "evnttyp" if task.startswith("evnttyp") else task


def evnttyp_n(task: str) -> int:
    suffix = task[len("evnttyp") :]
    if not suffix.isdigit() or int(suffix) < 1:
        raise ValueError(f"malformed event-type task name {task!r}; expected evnttyp<n>")
    return int(suffix)


def display_name(task: str) -> str:
    if task_base(task) == "evnttyp":
        return f"EvntTyp_{evnttyp_n(task)}"
    return _DISPLAY[task]


def derive_seed(*parts) -> int:
    """Stable 64-bit seed from string parts (sha256, never Python's salted hash)."""
    payload = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "big")


@dataclass(frozen=True)
class VectorRef:
    """Reference into a bundle: a whole document or one word's first token."""

    doc: str
    kind: str  # "token" or "doc"
    word: int | None = None

    def __post_init__(self):
        if self.kind not in ("token", "doc"):
            raise ValueError(f"kind must be 'token' or 'doc', got {self.kind!r}")
        if (self.kind == "token") != (self.word is not None):
            raise ValueError("token refs need a word index; doc refs must not have one")

    def to_json_obj(self) -> dict:
        obj = {"doc": self.doc, "kind": self.kind}
        if self.kind == "token":
            obj["word"] = self.word
        return obj

    @classmethod
    def from_json_obj(cls, obj: dict) -> "VectorRef":
        return cls(obj["doc"], obj["kind"], obj.get("word"))


@dataclass(frozen=True)
class ProbingExample:
    inputs: tuple[VectorRef, ...]
    label: int
    meta: dict = field(default_factory=dict, hash=False)


@dataclass
class ProbingDataset:
    task: str
    n_classes: int
    splits: dict[str, list[ProbingExample]]
    bucket_spec: "BucketSpec | None" = None
    dropped_count: int = 0
    skipped_count: int = 0
    seed: int | None = None
    notes: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")
        for split, examples in self.splits.items():
            if split not in SPLITS:
                raise ValueError(f"unknown split {split!r}")
            for ex in examples:
                if not (0 <= ex.label < self.n_classes):
                    raise ValueError(f"label {ex.label} outside [0, {self.n_classes})")


@dataclass(frozen=True)
class BucketSpec:
    """Right-open count buckets: bucket(x) = number of boundaries <= x."""

    boundaries: tuple[int, ...]

    def __post_init__(self):
        if not self.boundaries:
            raise ValueError("need at least one boundary (two buckets)")
        if any(b <= a for a, b in zip(self.boundaries, self.boundaries[1:])):
            raise ValueError(f"boundaries must be strictly increasing: {self.boundaries}")

    @property
    def n_buckets(self) -> int:
        return len(self.boundaries) + 1

    def bucket(self, count: int) -> int:
        return bisect_right(self.boundaries, count)

    def label(self, bucket: int) -> str:
        if not (0 <= bucket < self.n_buckets):
            raise ValueError(f"bucket {bucket} outside [0, {self.n_buckets})")
        lo = "-inf" if bucket == 0 else str(self.boundaries[bucket - 1])
        hi = "inf" if bucket == self.n_buckets - 1 else str(self.boundaries[bucket])
        return f"[{lo}, {hi})"


def quantile_buckets(counts, k: int) -> BucketSpec:
    """Empirical k-quantile boundaries; ties on a boundary fall to the lower bucket.

    Fewer than 2 distinct values raises DegenerateDistribution; between 2 and
    k-1 distinct values falls back to one bucket per distinct value (warning).
    """
    counts = list(counts)
    if k < 2:
        raise ValueError("k must be at least 2")
    if not counts:
        raise ValueError("cannot bucket an empty count list")
    distinct = sorted(set(counts))
    if len(distinct) < 2:
        raise DegenerateDistribution(len(distinct))
    if len(distinct) < k:
        logger.warning(
            "only %d distinct values for %d buckets; falling back to %d buckets",
            len(distinct),
            k,
            len(distinct),
        )
        return BucketSpec(tuple(distinct[1:]))

    ordered = sorted(counts)
    n = len(ordered)
    boundaries: list[int] = []
    for j in range(1, k):
        value = ordered[(j * n) // k]
        if ordered[(j * n) // k - 1] == value:
            # The tied run straddles the cut; push it wholly into the lower bucket.
            nxt = bisect_right(distinct, value)
            if nxt >= len(distinct):
                continue
            value = distinct[nxt]
        if boundaries and value <= boundaries[-1]:
            continue
        boundaries.append(value)
    return BucketSpec(tuple(boundaries))


def word_count_stratum(word_count: int, bounds: tuple[int, int, int] = DEFAULT_STRATA) -> str | None:
    """Length stratum label, or None in the gap between the middle and upper bounds."""
    lo, mid, hi = bounds
    if not (0 < lo < mid < hi):
        raise ValueError(f"strata bounds must be increasing positives, got {bounds}")
    if word_count <= lo:
        return f"<={lo}"
    if word_count <= mid:
        return f"{lo + 1}-{mid}"
    if word_count >= hi:
        return f">={hi}"
    return None


STRATUM_ORDER = ("all", "<=209", "210-420", ">=431")


# --- builder helpers ---


def _docs_by_split(corpus: Corpus) -> dict[str, list[Document]]:
    if not corpus.split_assignment:
        raise ValueError("corpus has no split assignment; call split_documents first")
    return {split: corpus.documents_in(split) for split in SPLITS}


def _require_in_bundle(doc: Document, bundle) -> None:
    if doc.doc_id not in bundle:
        raise UnknownDoc(f"{doc.doc_id!r} missing from bundle")


def _span_available(doc_emb, span) -> bool:
    return word_has_vector(doc_emb, span.start_word)


def _token_ref(doc: Document, span) -> VectorRef:
    return VectorRef(doc.doc_id, "token", span.start_word)


def _distinct_spans(items):
    """Dedupe spans by (start, end), preserving first-seen order."""
    seen = set()
    out = []
    for span in items:
        key = (span.start_word, span.end_word)
        if key not in seen:
            seen.add(key)
            out.append(span)
    return out


def _class_counts(examples) -> dict[str, int]:
    counts: dict[str, int] = {}
    for ex in examples:
        counts[str(ex.label)] = counts.get(str(ex.label), 0) + 1
    return counts


def _finish(dataset: ProbingDataset) -> ProbingDataset:
    dataset.notes["class_counts"] = {
        split: _class_counts(examples) for split, examples in dataset.splits.items()
    }
    dataset.validate()
    return dataset


def _count_task(corpus: Corpus, bundle, task: str, k: int, count_of) -> ProbingDataset:
    by_split = _docs_by_split(corpus)
    if not by_split["train"]:
        raise ValueError(f"{task}: train split is empty")
    spec = quantile_buckets([count_of(d) for d in by_split["train"]], k)
    splits: dict[str, list[ProbingExample]] = {}
    for split in SPLITS:
        examples = []
        for doc in by_split[split]:
            _require_in_bundle(doc, bundle)
            count = count_of(doc)
            wc = len(doc.words)
            examples.append(
                ProbingExample(
                    inputs=(VectorRef(doc.doc_id, "doc"),),
                    label=spec.bucket(count),
                    meta={
                        "count": count,
                        "word_count": wc,
                        "stratum": word_count_stratum(wc),
                    },
                )
            )
        splits[split] = examples
    return _finish(
        ProbingDataset(task=task, n_classes=spec.n_buckets, splits=splits, bucket_spec=spec)
    )


def build_wordct(corpus: Corpus, bundle) -> ProbingDataset:
    """Word-count bucket prediction from the whole-document token matrix."""
    return _count_task(corpus, bundle, "wordct", N_COUNT_BUCKETS, lambda d: len(d.words))


def build_sentct(corpus: Corpus, bundle) -> ProbingDataset:
    """Sentence-count bucket prediction from the whole-document token matrix."""
    return _count_task(
        corpus, bundle, "sentct", N_COUNT_BUCKETS, lambda d: len(d.sentence_bounds)
    )


def build_evntct(corpus: Corpus, bundle) -> ProbingDataset:
    """Template-count bucket prediction (3 buckets) from the document matrix."""
    return _count_task(
        corpus, bundle, "evntct", N_EVENT_COUNT_BUCKETS, lambda d: len(d.templates)
    )


def build_isarg(corpus: Corpus, bundle, seed: int = 0) -> ProbingDataset:
    """Filler vs non-filler word classification, exactly 50/50 per split.

    Positives: distinct filler spans (first-token refs). Negatives: seeded
    sample of words outside every filler span, one per positive, drawn from
    the same document while it has unused words, then from other documents of
    the split that contain positives; positives are down-sampled only when
    negatives run out entirely (recorded in notes as insufficient_negatives).
    """
    by_split = _docs_by_split(corpus)
    dataset = ProbingDataset(task="isarg", n_classes=2, splits={}, seed=seed)
    for split in SPLITS:
        rng = random.Random(derive_seed(seed, "isarg", split))
        pos_refs: list[VectorRef] = []
        doc_pools: list[tuple[str, list[int]]] = []
        neg_refs: list[VectorRef] = []
        shortfall_pool: list[VectorRef] = []
        for doc in by_split[split]:
            _require_in_bundle(doc, bundle)
            doc_emb = bundle[doc.doc_id]
            fillers = enumerate_role_fillers(doc)
            spans = _distinct_spans(m for m, _, _ in fillers)
            covered = set()
            for m, _, _ in fillers:
                covered.update(range(m.start_word, m.end_word))
            doc_pos = []
            for span in spans:
                if _span_available(doc_emb, span):
                    doc_pos.append(_token_ref(doc, span))
                else:
                    dataset.dropped_count += 1
            pos_refs.extend(doc_pos)
            if not doc_pos:
                continue
            pool = [
                w
                for w in range(len(doc.words))
                if w not in covered and word_has_vector(doc_emb, w)
            ]
            take = min(len(doc_pos), len(pool))
            chosen = rng.sample(pool, take)
            neg_refs.extend(VectorRef(doc.doc_id, "token", w) for w in chosen)
            leftover = sorted(set(pool) - set(chosen))
            doc_pools.append((doc.doc_id, leftover))
        shortfall = len(pos_refs) - len(neg_refs)
        if shortfall > 0:
            for doc_id, leftover in doc_pools:
                shortfall_pool.extend(VectorRef(doc_id, "token", w) for w in leftover)
            take = min(shortfall, len(shortfall_pool))
            neg_refs.extend(rng.sample(shortfall_pool, take))
        if len(neg_refs) < len(pos_refs):
            missing = len(pos_refs) - len(neg_refs)
            logger.warning(
                "isarg %s: only %d negatives for %d positives; down-sampling positives",
                split,
                len(neg_refs),
                len(pos_refs),
            )
            dataset.notes.setdefault("insufficient_negatives", {})[split] = missing
            dataset.skipped_count += missing
            drop = set(rng.sample(range(len(pos_refs)), missing))
            pos_refs = [r for i, r in enumerate(pos_refs) if i not in drop]
        examples = [ProbingExample((r,), 1, {}) for r in pos_refs]
        examples += [ProbingExample((r,), 0, {}) for r in neg_refs]
        dataset.splits[split] = examples
    return _finish(dataset)


def build_argtyp(corpus: Corpus, bundle) -> ProbingDataset:
    """Role classification of filler first tokens, one example per (span, role)."""
    by_split = _docs_by_split(corpus)
    roles_seen = {
        role for doc in corpus.documents for _, role, _ in enumerate_role_fillers(doc)
    }
    if set(roles_seen) <= set(ROLE_NAMES):
        label_space = ROLE_NAMES
    else:
        label_space = tuple(sorted(roles_seen))
    index = {role: i for i, role in enumerate(label_space)}
    dataset = ProbingDataset(
        task="argtyp",
        n_classes=len(label_space),
        splits={},
        notes={"label_space": list(label_space)},
    )
    for split in SPLITS:
        examples = []
        for doc in by_split[split]:
            _require_in_bundle(doc, bundle)
            doc_emb = bundle[doc.doc_id]
            seen = set()
            for m, role, _ in enumerate_role_fillers(doc):
                key = (m.start_word, m.end_word, role)
                if key in seen:
                    continue
                seen.add(key)
                if not _span_available(doc_emb, m):
                    dataset.dropped_count += 1
                    continue
                examples.append(
                    ProbingExample(
                        (_token_ref(doc, m),),
                        index[role],
                        {"span": [m.start_word, m.end_word], "role": role},
                    )
                )
        dataset.splits[split] = examples
    return _finish(dataset)


def _pair_key(a, b) -> tuple[int, int]:
    return (min(a.start_word, b.start_word), max(a.start_word, b.start_word))


def _degenerate_pair(a, b) -> bool:
    # Same start word means both refs resolve to the identical first-token
    # vector; such a pair carries no pairwise signal and is never a candidate.
    return a.start_word == b.start_word


def _ordered_pair_refs(doc: Document, a, b) -> tuple[VectorRef, VectorRef]:
    first, second = sorted((a, b))
    return (_token_ref(doc, first), _token_ref(doc, second))


def build_coref(corpus: Corpus, bundle, seed: int = 0) -> ProbingDataset:
    """Same-chain vs cross-chain filler pairs, exactly 50/50 per split.

    Candidate positives are within-chain pairs deduplicated by their unordered
    start-word pair (the pair's input identity); negatives are a seeded sample
    of cross-chain pairs from the same document, excluding any key that is
    positive elsewhere in the document.
    """
    by_split = _docs_by_split(corpus)
    dataset = ProbingDataset(task="coref", n_classes=2, splits={}, seed=seed)
    for split in SPLITS:
        rng = random.Random(derive_seed(seed, "coref", split))
        positives: list[ProbingExample] = []
        pool: list[ProbingExample] = []
        for doc in by_split[split]:
            _require_in_bundle(doc, bundle)
            doc_emb = bundle[doc.doc_id]
            chains = coref_chains(doc)
            pos_keys: set[tuple[int, int]] = set()
            doc_pos: list[ProbingExample] = []
            for chain in chains:
                members = sorted(chain)
                for i in range(len(members)):
                    for j in range(i + 1, len(members)):
                        a, b = members[i], members[j]
                        if _degenerate_pair(a, b):
                            continue
                        key = _pair_key(a, b)
                        if key in pos_keys:
                            continue
                        pos_keys.add(key)
                        if _span_available(doc_emb, a) and _span_available(doc_emb, b):
                            doc_pos.append(
                                ProbingExample(
                                    _ordered_pair_refs(doc, a, b),
                                    1,
                                    {"spans": [[a.start_word, a.end_word], [b.start_word, b.end_word]]},
                                )
                            )
                        else:
                            dataset.dropped_count += 1
            positives.extend(doc_pos)
            neg_keys: set[tuple[int, int]] = set()
            for i in range(len(chains)):
                for j in range(i + 1, len(chains)):
                    for a in sorted(chains[i]):
                        for b in sorted(chains[j]):
                            if _degenerate_pair(a, b):
                                continue
                            key = _pair_key(a, b)
                            if key in pos_keys or key in neg_keys:
                                continue
                            neg_keys.add(key)
                            if _span_available(doc_emb, a) and _span_available(doc_emb, b):
                                pool.append(
                                    ProbingExample(
                                        _ordered_pair_refs(doc, a, b),
                                        0,
                                        {
                                            "spans": [
                                                [a.start_word, a.end_word],
                                                [b.start_word, b.end_word],
                                            ]
                                        },
                                    )
                                )
        if len(pool) < len(positives):
            missing = len(positives) - len(pool)
            logger.warning(
                "coref %s: only %d negatives for %d positives; down-sampling positives",
                split,
                len(pool),
                len(positives),
            )
            dataset.notes.setdefault("insufficient_negatives", {})[split] = missing
            dataset.skipped_count += missing
            keep = set(rng.sample(range(len(positives)), len(pool)))
            positives = [p for i, p in enumerate(positives) if i in keep]
        negatives = rng.sample(pool, len(positives)) if pool else []
        dataset.splits[split] = positives + negatives
    return _finish(dataset)


def build_coevnt(corpus: Corpus, bundle, seed: int = 0) -> ProbingDataset:
    """Same-template vs cross-template filler pairs, 50/50 per split.

    Negatives come only from documents with at least two templates and never
    pair two mentions of one entity; the larger side is down-sampled to
    balance. A corpus without any multi-template document yields empty splits
    with a warning (recorded in notes).
    """
    by_split = _docs_by_split(corpus)
    dataset = ProbingDataset(task="coevnt", n_classes=2, splits={}, seed=seed)
    if not any(len(d.templates) >= 2 for d in corpus.documents):
        logger.warning("coevnt: no document has two or more templates; dataset will be empty")
        dataset.notes["no_multi_template_docs"] = True
        dataset.splits = {split: [] for split in SPLITS}
        return _finish(dataset)
    for split in SPLITS:
        rng = random.Random(derive_seed(seed, "coevnt", split))
        positives: list[ProbingExample] = []
        pool: list[ProbingExample] = []
        for doc in by_split[split]:
            _require_in_bundle(doc, bundle)
            doc_emb = bundle[doc.doc_id]
            per_template: list[list] = []
            for t_idx, template in enumerate(doc.templates):
                spans = _distinct_spans(
                    m for m, _, t in enumerate_role_fillers(doc) if t == t_idx
                )
                per_template.append(spans)
            same_entity: set[tuple[int, int]] = set()
            for template in doc.templates:
                for role in sorted(template.roles):
                    for entity in template.roles[role]:
                        members = sorted(entity.mentions)
                        for i in range(len(members)):
                            for j in range(i + 1, len(members)):
                                same_entity.add(_pair_key(members[i], members[j]))
            pos_keys: set[tuple[int, int]] = set()
            for spans in per_template:
                for i in range(len(spans)):
                    for j in range(i + 1, len(spans)):
                        a, b = spans[i], spans[j]
                        if _degenerate_pair(a, b):
                            continue
                        key = _pair_key(a, b)
                        if key in pos_keys:
                            continue
                        pos_keys.add(key)
                        if _span_available(doc_emb, a) and _span_available(doc_emb, b):
                            positives.append(
                                ProbingExample(
                                    _ordered_pair_refs(doc, a, b),
                                    1,
                                    {"spans": [[a.start_word, a.end_word], [b.start_word, b.end_word]]},
                                )
                            )
                        else:
                            dataset.dropped_count += 1
            if len(per_template) < 2:
                continue
            neg_keys: set[tuple[int, int]] = set()
            for i in range(len(per_template)):
                for j in range(i + 1, len(per_template)):
                    for a in per_template[i]:
                        for b in per_template[j]:
                            if _degenerate_pair(a, b):
                                continue
                            key = _pair_key(a, b)
                            if key in pos_keys or key in same_entity or key in neg_keys:
                                continue
                            neg_keys.add(key)
                            if _span_available(doc_emb, a) and _span_available(doc_emb, b):
                                pool.append(
                                    ProbingExample(
                                        _ordered_pair_refs(doc, a, b),
                                        0,
                                        {
                                            "spans": [
                                                [a.start_word, a.end_word],
                                                [b.start_word, b.end_word],
                                            ]
                                        },
                                    )
                                )
        if len(pool) >= len(positives):
            negatives = rng.sample(pool, len(positives))
        else:
            missing = len(positives) - len(pool)
            dataset.notes.setdefault("insufficient_negatives", {})[split] = missing
            dataset.skipped_count += missing
            keep = set(rng.sample(range(len(positives)), len(pool)))
            positives = [p for i, p in enumerate(positives) if i in keep]
            negatives = list(pool)
        dataset.splits[split] = positives + negatives
    return _finish(dataset)


def build_evnttyp(corpus: Corpus, bundle, n: int = 2) -> ProbingDataset:
    """Incident-type classification from each template's first n distinct fillers.

    Templates with fewer than n distinct filler spans are skipped (counted);
    templates whose chosen fillers lost their token rows are dropped (counted).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    by_split = _docs_by_split(corpus)
    types_seen = {t.incident_type for d in corpus.documents for t in d.templates}
    if types_seen <= set(INCIDENT_TYPES):
        label_space = INCIDENT_TYPES
    else:
        label_space = tuple(sorted(types_seen))
    index = {t: i for i, t in enumerate(label_space)}
    dataset = ProbingDataset(
        task=f"evnttyp{n}",
        n_classes=len(label_space),
        splits={},
        notes={"label_space": list(label_space)},
    )
    for split in SPLITS:
        examples = []
        for doc in by_split[split]:
            _require_in_bundle(doc, bundle)
            doc_emb = bundle[doc.doc_id]
            fillers = enumerate_role_fillers(doc)
            for t_idx, template in enumerate(doc.templates):
                spans = _distinct_spans(m for m, _, t in fillers if t == t_idx)
                if len(spans) < n:
                    dataset.skipped_count += 1
                    continue
                chosen = spans[:n]
                if not all(_span_available(doc_emb, s) for s in chosen):
                    dataset.dropped_count += 1
                    continue
                examples.append(
                    ProbingExample(
                        tuple(_token_ref(doc, s) for s in chosen),
                        index[template.incident_type],
                        {"incident_type": template.incident_type, "template_index": t_idx},
                    )
                )
        dataset.splits[split] = examples
    return _finish(dataset)


def build_task(task: str, corpus: Corpus, bundle, seed: int = 0) -> ProbingDataset:
    """Dispatch by task name; 'evnttyp<n>' selects the n-filler variant."""
    base = task_base(task)
    if base == "evnttyp":
        return build_evnttyp(corpus, bundle, evnttyp_n(task))
    builders = {
        "wordct": lambda: build_wordct(corpus, bundle),
        "sentct": lambda: build_sentct(corpus, bundle),
        "evntct": lambda: build_evntct(corpus, bundle),
        "argtyp": lambda: build_argtyp(corpus, bundle),
        "isarg": lambda: build_isarg(corpus, bundle, seed),
        "coref": lambda: build_coref(corpus, bundle, seed),
        "coevnt": lambda: build_coevnt(corpus, bundle, seed),
    }
    if base not in builders:
        raise ValueError(f"unknown task {task!r}; expected one of {TASK_ORDER}")
    return builders[base]()


# --- serialization ---


def _example_to_json(ex: ProbingExample) -> str:
    obj = {
        "inputs": [r.to_json_obj() for r in ex.inputs],
        "label": ex.label,
        "meta": ex.meta,
    }
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def save_dataset(dataset: ProbingDataset, out_dir: str | Path) -> dict[str, Path]:
    """Write one JSONL per split plus a sidecar manifest; byte-deterministic."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    for split in SPLITS:
        examples = dataset.splits.get(split, [])
        path = out / f"{dataset.task}.{split}.jsonl"
        path.write_text(
            "".join(_example_to_json(ex) + "\n" for ex in examples), encoding="utf-8"
        )
        paths[split] = path
    manifest = {
        "task": dataset.task,
        "n_classes": dataset.n_classes,
        "bucket_boundaries": list(dataset.bucket_spec.boundaries) if dataset.bucket_spec else None,
        "seed": dataset.seed,
        "dropped_count": dataset.dropped_count,
        "skipped_count": dataset.skipped_count,
        "split_sizes": {split: len(dataset.splits.get(split, [])) for split in SPLITS},
        "notes": dataset.notes,
    }
    manifest_path = out / f"{dataset.task}.manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    paths["manifest"] = manifest_path
    return paths


def load_dataset(dir_or_manifest: str | Path, task: str | None = None) -> ProbingDataset:
    """Load a dataset written by save_dataset.

    Accepts the directory (with ``task`` given, or containing exactly one
    ``*.manifest.json``) or the manifest path itself.
    """
    path = Path(dir_or_manifest)
    if path.is_dir():
        if task is not None:
            manifest_path = path / f"{task}.manifest.json"
        else:
            candidates = sorted(path.glob("*.manifest.json"))
            if len(candidates) != 1:
                raise ValueError(
                    f"{path}: expected exactly one *.manifest.json, found {len(candidates)}; "
                    "pass the task name"
                )
            manifest_path = candidates[0]
    else:
        manifest_path = path
    obj = json.loads(manifest_path.read_text(encoding="utf-8"))
    boundaries = obj.get("bucket_boundaries")
    dataset = ProbingDataset(
        task=obj["task"],
        n_classes=int(obj["n_classes"]),
        splits={},
        bucket_spec=BucketSpec(tuple(boundaries)) if boundaries else None,
        dropped_count=int(obj.get("dropped_count", 0)),
        skipped_count=int(obj.get("skipped_count", 0)),
        seed=obj.get("seed"),
        notes=obj.get("notes", {}),
    )
    base = manifest_path.parent
    for split in SPLITS:
        split_path = base / f"{dataset.task}.{split}.jsonl"
        examples = []
        if split_path.exists():
            for line in split_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                rec = json.loads(line)
                examples.append(
                    ProbingExample(
                        tuple(VectorRef.from_json_obj(r) for r in rec["inputs"]),
                        int(rec["label"]),
                        rec.get("meta", {}),
                    )
                )
        dataset.splits[split] = examples
    dataset.validate()
    return dataset
