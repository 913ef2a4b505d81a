"""Shared test fixtures: a hand-built corpus, synthetic bundles, and datasets.

The fixture corpus below is small enough that every span offset, chain, pair
count, and bucket boundary is derived by hand in the tests; comments on each
document state what it exists to exercise.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

import numpy as np

from docprobe import (
    AlignmentMap,
    BundleManifest,
    DocEmbedding,
    ProbingDataset,
    ProbingExample,
    VectorRef,
    derive_seed,
    parse_corpus,
    read_bundle,
    write_bundle,
)
from docprobe.corpus import INCIDENT_TYPES, ROLE_NAMES
from docprobe.errors import UnknownDoc

# --- hand-built fixture corpus (10 documents) ---
#
# Split layout: train d01-d06, dev d07-d08, test d09-d10.
# Hand-derived facts the tests freeze:
#   d01  attack; entity with two mentions (coref positive in train);
#        spans THE GUERRILLAS (0,2)+(10,12), THE VILLAGE (3,5), DYNAMITE (6,7);
#        derived sentences (0,10),(10,14).
#   d02  two templates (bombing, kidnapping) sharing one PerpOrg entity
#        REBELS (0,1)+(8,9): coevnt same-entity exclusion, chain merging.
#   d03  casefold and punctuation-stripped mention tiers (3 surface
#        mismatches); explicit sentence intervals.
#   d04  singleton mentions only; longest train doc (23 words).
#   d05  two templates (arson, attack) with disjoint entities: 6 clean
#        cross-template negative pairs.
#   d06  zero templates (template count 0; no fillers).
#   d07  dev: multi-mention entity; 4 distinct filler spans.
#   d08  dev: two templates (bombing, arson).
#   d09  test: multi-mention entity.
#   d10  test: forced work stoppage + attack (covers all 6 incident types).

_FIXTURE_RECORDS = [
    {
        "docid": "d01",
        "doctext": "THE GUERRILLAS ATTACKED THE VILLAGE WITH DYNAMITE ON MONDAY . "
        "THE GUERRILLAS FLED .",
        "split": "train",
        "templates": [
            {
                "incident_type": "attack",
                "PerpInd": [["THE GUERRILLAS", "THE GUERRILLAS"]],
                "Target": [["THE VILLAGE"]],
                "Weapon": [["DYNAMITE"]],
            }
        ],
    },
    {
        "docid": "d02",
        "doctext": "REBELS BOMBED THE EMBASSY IN LIMA TODAY . REBELS ALSO KIDNAPPED "
        "THE AMBASSADOR .",
        "split": "train",
        "templates": [
            {
                "incident_type": "bombing",
                "PerpOrg": [["REBELS", "REBELS"]],
                "Target": [["THE EMBASSY"]],
            },
            {
                "incident_type": "kidnapping",
                "PerpOrg": [["REBELS", "REBELS"]],
                "Victim": [["THE AMBASSADOR"]],
            },
        ],
    },
    {
        "docid": "d03",
        "doctext": "Armed men seized Mr. Hernandez near his home . The armed men escaped .",
        "sentences": [[0, 9], [9, 14]],
        "split": "train",
        "templates": [
            {
                "incident_type": "kidnapping",
                "PerpInd": [["ARMED MEN", "the armed men"]],
                "Victim": [["MR HERNANDEZ"]],
            }
        ],
    },
    {
        "docid": "d04",
        "doctext": "FOUR MEN ROBBED THE NATIONAL BANK OF BOGOTA THIS MORNING . "
        "GUARDS SAID THE MEN TOOK MONEY AND FLED IN A TRUCK .",
        "split": "train",
        "templates": [
            {
                "incident_type": "robbery",
                "PerpInd": [["FOUR MEN"]],
                "Target": [["THE NATIONAL BANK"]],
            }
        ],
    },
    {
        "docid": "d05",
        "doctext": "PEASANTS BURNED THE TOWN HALL LAST NIGHT . SOLDIERS LATER ATTACKED "
        "THE PEASANTS WITH RIFLES .",
        "split": "train",
        "templates": [
            {
                "incident_type": "arson",
                "PerpInd": [["PEASANTS"]],
                "Target": [["THE TOWN HALL"]],
            },
            {
                "incident_type": "attack",
                "PerpInd": [["SOLDIERS"]],
                "Target": [["THE PEASANTS"]],
                "Weapon": [["RIFLES"]],
            },
        ],
    },
    {
        "docid": "d06",
        "doctext": "THE WEATHER IN THE CAPITAL WAS CALM TODAY .",
        "split": "train",
        "templates": [],
    },
    {
        "docid": "d07",
        "doctext": "GUERRILLA FIGHTERS AMBUSHED AN ARMY PATROL NEAR THE BORDER . "
        "THE FIGHTERS USED GRENADES .",
        "split": "dev",
        "templates": [
            {
                "incident_type": "attack",
                "PerpInd": [["GUERRILLA FIGHTERS", "THE FIGHTERS"]],
                "Target": [["AN ARMY PATROL"]],
                "Weapon": [["GRENADES"]],
            }
        ],
    },
    {
        "docid": "d08",
        "doctext": "A CAR BOMB EXPLODED OUTSIDE THE MINISTRY . PROTESTERS BURNED "
        "TWO BUSES DOWNTOWN .",
        "split": "dev",
        "templates": [
            {
                "incident_type": "bombing",
                "Weapon": [["A CAR BOMB"]],
                "Target": [["THE MINISTRY"]],
            },
            {
                "incident_type": "arson",
                "PerpInd": [["PROTESTERS"]],
                "Target": [["TWO BUSES"]],
            },
        ],
    },
    {
        "docid": "d09",
        "doctext": "GUNMEN KIDNAPPED A JUDGE IN MEDELLIN YESTERDAY . POLICE SAID "
        "THE GUNMEN DEMANDED RANSOM .",
        "split": "test",
        "templates": [
            {
                "incident_type": "kidnapping",
                "PerpInd": [["GUNMEN", "THE GUNMEN"]],
                "Victim": [["A JUDGE"]],
            }
        ],
    },
    {
        "docid": "d10",
        "doctext": "STRIKERS HALTED WORK AT THE PORT FOR TWO DAYS . SOLDIERS ATTACKED "
        "STRIKERS AT THE GATES WITH TEAR GAS .",
        "split": "test",
        "templates": [
            {
                "incident_type": "forced work stoppage",
                "PerpOrg": [["STRIKERS"]],
                "Target": [["THE PORT"]],
            },
            {
                "incident_type": "attack",
                "PerpInd": [["SOLDIERS"]],
                "Victim": [["STRIKERS AT THE GATES"]],
                "Weapon": [["TEAR GAS"]],
            },
        ],
    },
]


def fixture_records() -> list[dict]:
    """Fresh deep copy of the fixture corpus records."""
    return json.loads(json.dumps(_FIXTURE_RECORDS))


def write_corpus_json(records: list[dict], path: Path) -> Path:
    path.write_text(json.dumps(records, indent=1), encoding="utf-8")
    return path


def load_fixture_corpus(tmp_dir: Path):
    path = write_corpus_json(fixture_records(), tmp_dir / "corpus.json")
    return parse_corpus(path), path


# --- synthetic embedding bundles ---


def make_doc_embedding(
    doc_id: str,
    n_words: int,
    *,
    layers=(0,),
    dim: int = 8,
    seed: int = 0,
    tokens_per_word: int = 1,
    leading_specials: int = 0,
    trailing_specials: int = 0,
    empty_words=(),
    truncated_from: int | None = None,
) -> DocEmbedding:
    """Deterministic random DocEmbedding with a simple word/token layout."""
    empty = set(empty_words)
    pos = leading_specials
    intervals = []
    for w in range(n_words):
        if w in empty:
            intervals.append((pos, pos))
        else:
            intervals.append((pos, pos + tokens_per_word))
            pos += tokens_per_word
    n_tokens = pos + trailing_specials
    tensors = {}
    for layer in layers:
        rng = np.random.Generator(np.random.PCG64(derive_seed("emb", seed, doc_id, layer)))
        tensors[layer] = rng.standard_normal((n_tokens, dim)).astype(np.float32)
    return DocEmbedding(doc_id, tensors, AlignmentMap(tuple(intervals), truncated_from))


def make_bundle(
    corpus_or_docs,
    out_dir: Path,
    *,
    layers=(0,),
    dim: int = 8,
    seed: int = 0,
    mode: str = "FullText",
    max_tokens: int = 512,
    encoder_name: str = "synthetic",
    tokens_per_word: int = 1,
    leading_specials: int = 0,
    trailing_specials: int = 0,
    overrides: dict[str, dict] | None = None,
):
    """Write a synthetic bundle covering every document; returns (manifest, reader).

    ``overrides`` maps doc_id to extra make_doc_embedding kwargs (layout only;
    layers/dim stay bundle-wide).
    """
    docs = getattr(corpus_or_docs, "documents", corpus_or_docs)
    embeddings = []
    for doc in docs:
        kwargs = dict(
            layers=layers,
            dim=dim,
            seed=seed,
            tokens_per_word=tokens_per_word,
            leading_specials=leading_specials,
            trailing_specials=trailing_specials,
        )
        if overrides and doc.doc_id in overrides:
            kwargs.update(overrides[doc.doc_id])
        embeddings.append(make_doc_embedding(doc.doc_id, len(doc.words), **kwargs))
    manifest = BundleManifest(
        encoder_name=encoder_name,
        mode=mode,
        hidden_dim=dim,
        layer_ids=tuple(layers),
        max_tokens=max_tokens,
    )
    write_bundle(manifest, embeddings, out_dir)
    return read_bundle(out_dir)


class DictBundle:
    """In-memory bundle: just a doc_id -> DocEmbedding mapping."""

    def __init__(self, docs: dict[str, DocEmbedding]):
        self._docs = docs

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._docs

    def __getitem__(self, doc_id: str) -> DocEmbedding:
        if doc_id not in self._docs:
            raise UnknownDoc(doc_id)
        return self._docs[doc_id]


def token_doc(doc_id: str, vectors_by_layer: dict[int, np.ndarray]) -> DocEmbedding:
    """One token per word, every token owned by a word."""
    first = next(iter(vectors_by_layer.values()))
    intervals = tuple((t, t + 1) for t in range(first.shape[0]))
    tensors = {
        layer: np.ascontiguousarray(np.asarray(v, dtype=np.float32))
        for layer, v in vectors_by_layer.items()
    }
    return DocEmbedding(doc_id, tensors, AlignmentMap(intervals))


# --- synthetic probing datasets (in-memory bundles) ---


def gaussian_dataset(
    d: int = 768,
    sizes=(1000, 200, 200),
    distance: float = 6.0,
    seed: int = 0,
    layer: int = 0,
):
    """Two unit-variance Gaussian clusters whose centers sit ``distance`` apart."""
    rng = np.random.Generator(np.random.PCG64(derive_seed("gauss", seed)))
    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)
    docs: dict[str, DocEmbedding] = {}
    splits: dict[str, list[ProbingExample]] = {}
    for split, n in zip(("train", "dev", "test"), sizes):
        examples = []
        for i in range(n):
            label = i % 2
            center = (distance / 2.0) * direction * (1.0 if label else -1.0)
            vec = (center + rng.standard_normal(d)).astype(np.float32)
            doc_id = f"g-{split}-{i}"
            docs[doc_id] = token_doc(doc_id, {layer: vec[None, :]})
            examples.append(ProbingExample((VectorRef(doc_id, "token", 0),), label))
        splits[split] = examples
    dataset = ProbingDataset(task="synthetic", n_classes=2, splits=splits, seed=seed)
    dataset.validate()
    return dataset, DictBundle(docs)


NOISE_SHAPES = ("token", "pair", "triple", "doc")


def noise_dataset(shape: str, sizes=(200, 100, 1000), d: int = 16, seed: int = 0, layer: int = 0):
    """Label-balanced dataset whose inputs are pure noise, in one of the four
    input shapes the task builders emit: single token, token pair, token
    triple, or whole-document matrix."""
    if shape not in NOISE_SHAPES:
        raise ValueError(f"shape must be one of {NOISE_SHAPES}")
    rng = np.random.Generator(np.random.PCG64(derive_seed("noise", shape, seed)))
    docs: dict[str, DocEmbedding] = {}
    splits: dict[str, list[ProbingExample]] = {}
    for split, n in zip(("train", "dev", "test"), sizes):
        examples = []
        for i in range(n):
            label = i % 2
            doc_id = f"n-{split}-{i}"
            if shape == "doc":
                n_tokens = int(rng.integers(5, 16))
                refs = (VectorRef(doc_id, "doc"),)
            else:
                n_tokens = {"token": 1, "pair": 2, "triple": 3}[shape]
                refs = tuple(VectorRef(doc_id, "token", w) for w in range(n_tokens))
            matrix = rng.standard_normal((n_tokens, d)).astype(np.float32)
            docs[doc_id] = token_doc(doc_id, {layer: matrix})
            examples.append(ProbingExample(refs, label))
        splits[split] = examples
    dataset = ProbingDataset(task="synthetic", n_classes=2, splits=splits, seed=seed)
    dataset.validate()
    return dataset, DictBundle(docs)


# --- layer-signal corpus + bundle (on disk, for sweep tests) ---


def signal_corpus_records(n_docs: int = 30, words_per_doc: int = 21, fillers_per_doc: int = 5):
    """Synthetic corpus whose filler words are known; words unique per doc."""
    rng = random.Random(derive_seed("signal-corpus", n_docs, words_per_doc))
    records = []
    n_train = int(n_docs * 0.6)
    n_dev = int(n_docs * 0.2)
    for i in range(n_docs):
        words = [f"d{i}w{j}" for j in range(words_per_doc)]
        filler_idx = sorted(rng.sample(range(words_per_doc), fillers_per_doc))
        split = "train" if i < n_train else ("dev" if i < n_train + n_dev else "test")
        records.append(
            {
                "docid": f"sig{i:03d}",
                "doctext": " ".join(words),
                "split": split,
                "templates": [
                    {
                        "incident_type": "attack",
                        "PerpInd": [[words[j]] for j in filler_idx],
                    }
                ],
            }
        )
    return records


def signal_bundle(corpus, out_dir: Path, strengths, d: int = 16, seed: int = 0):
    """Bundle whose layer ``l`` separates filler from non-filler words with
    margin ``strengths[l]`` along a fixed direction, on unit noise."""
    rng_dir = np.random.Generator(np.random.PCG64(derive_seed("signal-dir", seed)))
    direction = rng_dir.standard_normal(d)
    direction /= np.linalg.norm(direction)
    embeddings = []
    for doc in corpus.documents:
        filler_words = set()
        for template in doc.templates:
            for entities in template.roles.values():
                for entity in entities:
                    for m in entity.mentions:
                        filler_words.update(range(m.start_word, m.end_word))
        n = len(doc.words)
        signs = np.array([1.0 if w in filler_words else -1.0 for w in range(n)])
        tensors = {}
        for layer, strength in enumerate(strengths):
            rng = np.random.Generator(
                np.random.PCG64(derive_seed("signal", seed, doc.doc_id, layer))
            )
            noise = rng.standard_normal((n, d))
            tensors[layer] = (noise + strength * signs[:, None] * direction[None, :]).astype(
                np.float32
            )
        intervals = tuple((w, w + 1) for w in range(n))
        embeddings.append(DocEmbedding(doc.doc_id, tensors, AlignmentMap(intervals)))
    manifest = BundleManifest(
        encoder_name="synthetic-signal",
        mode="FullText",
        hidden_dim=d,
        layer_ids=tuple(range(len(strengths))),
        max_tokens=512,
    )
    write_bundle(manifest, embeddings, out_dir)
    return read_bundle(out_dir)


def random_doc_embedding(rng: np.random.Generator, doc_id: str, layers=(0,), dim: int = 4):
    """Random valid DocEmbedding: gaps, empty intervals, specials, markers."""
    n_words = int(rng.integers(0, 7))
    pos = int(rng.integers(0, 3))  # leading unowned tokens
    intervals = []
    for _ in range(n_words):
        if rng.random() < 0.2:
            intervals.append((pos, pos))
        else:
            pos += int(rng.integers(0, 2))  # occasional unowned gap
            width = int(rng.integers(1, 4))
            intervals.append((pos, pos + width))
            pos += width
    n_tokens = pos + int(rng.integers(0, 3))
    truncated = None if rng.random() < 0.7 else int(rng.integers(0, n_words + 1))
    tensors = {
        layer: rng.standard_normal((n_tokens, dim)).astype(np.float32) for layer in layers
    }
    return DocEmbedding(doc_id, tensors, AlignmentMap(tuple(intervals), truncated))


# --- random corpora for fuzzing ---


def random_corpus_records(n_docs: int = 12, seed: int = 0) -> list[dict]:
    """Random but always-resolvable corpus: every word unique within its doc,
    so each mention string matches exactly one occurrence."""
    rng = random.Random(derive_seed("fuzz-corpus", seed))
    records = []
    for i in range(n_docs):
        n_words = 12 + 2 * i + rng.randrange(0, 2)
        words = [f"f{i}x{j}" for j in range(n_words)]
        n_cuts = rng.randrange(0, 4)
        cuts = sorted(rng.sample(range(1, n_words), min(n_cuts, n_words - 1)))
        bounds = []
        prev = 0
        for c in [*cuts, n_words]:
            if c > prev:
                bounds.append([prev, c])
                prev = c
        templates = []
        for _ in range(rng.randrange(0, 3)):
            pool = list(range(n_words))
            rng.shuffle(pool)
            roles: dict[str, list[list[str]]] = {}
            for _ in range(rng.randrange(1, 4)):
                n_mentions = rng.randrange(1, 3)
                if len(pool) < n_mentions:
                    break
                mentions = [words[pool.pop()] for _ in range(n_mentions)]
                roles.setdefault(rng.choice(ROLE_NAMES), []).append(mentions)
            if roles:
                templates.append({"incident_type": rng.choice(INCIDENT_TYPES), **roles})
        records.append(
            {
                "docid": f"fz{i:03d}",
                "doctext": " ".join(words),
                "sentences": bounds,
                "templates": templates,
            }
        )
    return records
