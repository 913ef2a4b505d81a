"""Template-filling corpora: parsing, validation, and split handling.

Corpus JSON schema (``muc-json``, one UTF-8 file holding a list of documents):

    [
      {
        "docid": "TST1-MUC3-0001",
        "doctext": "THE GUERRILLAS ATTACKED ...",   # whitespace-tokenizable
        "sentences": [[0, 12], [12, 30]],           # optional half-open word intervals
        "split": "train",                           # optional; all docs or none
        "templates": [
          {
            "incident_type": "attack",
            "PerpInd": [["THE GUERRILLAS", "GUERRILLAS"]],
            "Target": [["THE VILLAGE"]]
          }
        ]
      },
      ...
    ]

Each role maps to a list of entities; each entity is a list of coreferent
mention strings. Mention strings are resolved to word offsets at parse time:
a mention claims the first occurrence in the document not already claimed by
the same entity (exact match first, then casefold, then a punctuation-stripped
casefold fallback). When ``sentences`` is absent, a sentence ends at every
word whose last character is ``.``, ``!`` or ``?``, and the final word always
closes the last sentence.

A ``wikievents-json`` adapter accepts the WikiEvents-style layout (``tokens``
plus ``event_mentions`` with per-argument roles); see ``parse_corpus``.
"""

from __future__ import annotations

import json
import logging
import random
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import EmptyCorpus, MalformedInput, OffsetResolutionError

logger = logging.getLogger(__name__)

INCIDENT_TYPES = (
    "kidnapping",
    "attack",
    "bombing",
    "robbery",
    "forced work stoppage",
    "arson",
)
ROLE_NAMES = ("PerpInd", "PerpOrg", "Target", "Victim", "Weapon")
SPLITS = ("train", "dev", "test")

_SENTENCE_FINAL = frozenset(".!?")
_EDGE_PUNCT = ".,;:!?\"'`()[]{}"


@dataclass(frozen=True, order=True)
class MentionSpan:
    """Half-open word interval [start_word, end_word) with its normalized surface."""

    start_word: int
    end_word: int
    surface: str

    def __post_init__(self):
        if self.start_word < 0 or self.end_word <= self.start_word:
            raise ValueError(
                f"invalid span [{self.start_word}, {self.end_word}) for {self.surface!r}"
            )

    @property
    def n_words(self) -> int:
        return self.end_word - self.start_word


@dataclass(frozen=True)
class Entity:
    """One coreferent cluster of mentions, in corpus file order."""

    mentions: tuple[MentionSpan, ...]

    def __post_init__(self):
        if not self.mentions:
            raise ValueError("entity must have at least one mention")


@dataclass(frozen=True)
class Template:
    """One event instance: an incident type plus role -> entities."""

    incident_type: str
    roles: dict[str, tuple[Entity, ...]]


@dataclass(frozen=True)
class Document:
    doc_id: str
    words: tuple[str, ...]
    sentence_bounds: tuple[tuple[int, int], ...]
    templates: tuple[Template, ...]

    def validate(self) -> None:
        """Check sentence partition and span containment; raise MalformedInput."""
        n = len(self.words)
        expect = 0
        for s, e in self.sentence_bounds:
            if s != expect or e <= s or e > n:
                raise MalformedInput(
                    f"{self.doc_id}: sentence bounds {list(self.sentence_bounds)} "
                    f"do not partition [0, {n})"
                )
            expect = e
        if expect != n:
            raise MalformedInput(
                f"{self.doc_id}: sentence bounds cover [0, {expect}) but document has {n} words"
            )
        for t_idx, template in enumerate(self.templates):
            for role, entities in template.roles.items():
                for entity in entities:
                    for m in entity.mentions:
                        if m.end_word > n:
                            raise MalformedInput(
                                f"{self.doc_id}: template {t_idx} role {role} span "
                                f"[{m.start_word}, {m.end_word}) exceeds {n} words"
                            )


@dataclass
class ParseReport:
    """Counters for recoverable parse anomalies."""

    empty_templates_dropped: int = 0
    duplicate_templates_dropped: int = 0
    duplicate_mentions_dropped: int = 0
    surface_mismatches: int = 0


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]
    split_assignment: dict[str, str]
    parse_report: ParseReport | None = field(default=None, compare=False, repr=False)

    def doc_ids(self) -> tuple[str, ...]:
        return tuple(d.doc_id for d in self.documents)

    def get(self, doc_id: str) -> Document:
        for d in self.documents:
            if d.doc_id == doc_id:
                return d
        raise KeyError(doc_id)

    def documents_in(self, split: str) -> list[Document]:
        if split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        return [d for d in self.documents if self.split_assignment.get(d.doc_id) == split]

    def validate(self) -> None:
        ids = self.doc_ids()
        if len(set(ids)) != len(ids):
            raise MalformedInput("duplicate document ids in corpus")
        known = set(ids)
        for doc_id, split in self.split_assignment.items():
            if doc_id not in known:
                raise MalformedInput(f"split assignment references unknown doc {doc_id!r}")
            if split not in SPLITS:
                raise MalformedInput(f"unknown split {split!r} for doc {doc_id!r}")
        for d in self.documents:
            d.validate()


def parse_corpus(path: str | Path, format: str = "muc-json") -> Corpus:
    """Parse a corpus file into validated, offset-resolved documents.

    ``format`` is ``muc-json`` (schema in the module docstring) or
    ``wikievents-json`` (JSON array or JSONL of WikiEvents-style records).
    """
    path = Path(path)
    if format == "muc-json":
        records = _load_records(path, allow_jsonl=False)
        parse_one = _parse_muc_doc
    elif format == "wikievents-json":
        records = _load_records(path, allow_jsonl=True)
        parse_one = _parse_wikievents_doc
    else:
        raise ValueError(f"unknown corpus format {format!r}")

    report = ParseReport()
    documents: list[Document] = []
    split_assignment: dict[str, str] = {}
    with_split = 0
    for idx, record in enumerate(records):
        if not isinstance(record, dict):
            raise MalformedInput(f"[{idx}]: document record must be an object")
        doc, split = parse_one(record, idx, report)
        documents.append(doc)
        if split is not None:
            if split not in SPLITS:
                raise MalformedInput(f"[{idx}].split: unknown split {split!r}")
            split_assignment[doc.doc_id] = split
            with_split += 1
    if with_split not in (0, len(documents)):
        raise MalformedInput(
            f"'split' present on {with_split} of {len(documents)} documents; must be all or none"
        )
    corpus = Corpus(tuple(documents), split_assignment, report)
    corpus.validate()
    return corpus


def corpus_to_json(corpus: Corpus) -> list[dict]:
    """Serialize to the muc-json schema; parse(serialize(c)) is structurally identical."""
    out = []
    for doc in corpus.documents:
        rec: dict = {
            "docid": doc.doc_id,
            "doctext": " ".join(doc.words),
            "sentences": [[s, e] for s, e in doc.sentence_bounds],
            "templates": [
                {
                    "incident_type": t.incident_type,
                    **{
                        role: [[m.surface for m in ent.mentions] for ent in entities]
                        for role, entities in t.roles.items()
                    },
                }
                for t in doc.templates
            ],
        }
        split = corpus.split_assignment.get(doc.doc_id)
        if split is not None:
            rec["split"] = split
        out.append(rec)
    return out


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(corpus_to_json(corpus), indent=1, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )


def enumerate_role_fillers(doc: Document) -> list[tuple[MentionSpan, str, int]]:
    """All (mention, role, template_index) occurrences, deterministically ordered.

    Order: template index, then role name, then span position within the role.
    """
    out: list[tuple[MentionSpan, str, int]] = []
    for t_idx, template in enumerate(doc.templates):
        per_template: list[tuple[MentionSpan, str, int]] = []
        for role in sorted(template.roles):
            for entity in template.roles[role]:
                for mention in entity.mentions:
                    per_template.append((mention, role, t_idx))
        per_template.sort(key=lambda item: (item[1], item[0]))
        out.extend(per_template)
    return out


def coref_chains(doc: Document) -> list[set[MentionSpan]]:
    """Entity mention sets of the document, merged across templates when identical.

    Entities that appear in several templates with exactly the same mention set
    collapse to one chain; overlapping but different sets stay separate chains.
    Order is deterministic: by sorted span list.
    """
    seen: set[frozenset[MentionSpan]] = set()
    chains: list[set[MentionSpan]] = []
    for template in doc.templates:
        for role in sorted(template.roles):
            for entity in template.roles[role]:
                key = frozenset(entity.mentions)
                if key not in seen:
                    seen.add(key)
                    chains.append(set(entity.mentions))
    chains.sort(key=lambda chain: tuple(sorted(chain)))
    return chains


def split_documents(
    corpus: Corpus, ratios: tuple[float, float, float], seed: int
) -> Corpus:
    """Assign documents to train/dev/test by seeded shuffle + largest-remainder quotas.

    Intended for corpora whose format carries no predefined split; any existing
    assignment is replaced.
    """
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError(f"ratios must be three positive numbers, got {ratios!r}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {sum(ratios)!r}")
    if not corpus.documents:
        raise EmptyCorpus("cannot split a corpus with no documents")

    n = len(corpus.documents)
    quotas = [r * n for r in ratios]
    base = [int(q) for q in quotas]
    remainder = n - sum(base)
    # Largest fractional parts get the leftover docs; ties resolve in split order.
    by_frac = sorted(range(3), key=lambda i: (-(quotas[i] - base[i]), i))
    for i in by_frac[:remainder]:
        base[i] += 1

    ids = sorted(corpus.doc_ids())
    random.Random(seed).shuffle(ids)
    assignment: dict[str, str] = {}
    cursor = 0
    for split, count in zip(SPLITS, base):
        for doc_id in ids[cursor : cursor + count]:
            assignment[doc_id] = split
        cursor += count
    out = replace(corpus, split_assignment=assignment)
    out.validate()
    return out


# --- parsing internals ---


def _load_records(path: Path, allow_jsonl: bool) -> list:
    text = path.read_text(encoding="utf-8")
    stripped = text.lstrip()
    if not stripped:
        raise MalformedInput(f"{path}: empty corpus file")
    if stripped.startswith("["):
        data = json.loads(text)
        if not isinstance(data, list):
            raise MalformedInput(f"{path}: top-level JSON value must be a list")
        return data
    if allow_jsonl:
        return [json.loads(line) for line in text.splitlines() if line.strip()]
    raise MalformedInput(f"{path}: expected a JSON list of documents")


def _require(record: dict, key: str, kind: type, where: str):
    value = record.get(key)
    if not isinstance(value, kind):
        raise MalformedInput(f"{where}.{key}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def _parse_sentence_bounds(raw, where: str) -> tuple[tuple[int, int], ...]:
    if not isinstance(raw, list):
        raise MalformedInput(f"{where}.sentences: expected a list of [start, end) pairs")
    bounds = []
    for item in raw:
        if (
            not isinstance(item, (list, tuple))
            or len(item) != 2
            or not all(isinstance(x, int) for x in item)
        ):
            raise MalformedInput(f"{where}.sentences: malformed interval {item!r}")
        bounds.append((item[0], item[1]))
    return tuple(bounds)


def _derive_sentence_bounds(words: tuple[str, ...]) -> tuple[tuple[int, int], ...]:
    bounds = []
    start = 0
    for i, word in enumerate(words):
        if word[-1] in _SENTENCE_FINAL:
            bounds.append((start, i + 1))
            start = i + 1
    if start < len(words):
        bounds.append((start, len(words)))
    return tuple(bounds)


def _strip_edges(word: str) -> str:
    return word.strip(_EDGE_PUNCT)


def _occurrences(words: tuple[str, ...], mention_words: list[str]) -> list[int]:
    """Start offsets of the mention in the document, first non-empty match tier."""
    m = len(mention_words)
    if m == 0 or m > len(words):
        return []

    def scan(doc_key, mention_key) -> list[int]:
        target = [mention_key(w) for w in mention_words]
        keyed = [doc_key(w) for w in words]
        return [i for i in range(len(words) - m + 1) if keyed[i : i + m] == target]

    for doc_key, mention_key in (
        (str, str),
        (str.casefold, str.casefold),
        (lambda w: _strip_edges(w).casefold(), lambda w: _strip_edges(w).casefold()),
    ):
        found = scan(doc_key, mention_key)
        if found:
            return found
    return []


def _resolve_entity(
    words: tuple[str, ...], strings: list, doc_id: str, where: str, report: ParseReport
) -> Entity | None:
    claimed: set[int] = set()
    mentions: list[MentionSpan] = []
    for raw in strings:
        if not isinstance(raw, str) or not raw.split():
            raise MalformedInput(f"{where}: mention must be a non-empty string, got {raw!r}")
        mention_words = raw.split()
        surface = " ".join(mention_words)
        occurrences = _occurrences(words, mention_words)
        start = next((o for o in occurrences if o not in claimed), None)
        if start is None:
            if occurrences:
                # The same entity listed this string more times than it occurs.
                report.duplicate_mentions_dropped += 1
                logger.warning("%s: dropping unresolvable duplicate mention %r", doc_id, raw)
                continue
            raise OffsetResolutionError(doc_id, raw)
        claimed.add(start)
        end = start + len(mention_words)
        matched = " ".join(words[start:end])
        if matched != surface:
            report.surface_mismatches += 1
            logger.debug("%s: surface %r matched document words %r", doc_id, surface, matched)
        mentions.append(MentionSpan(start, end, surface))
    if not mentions:
        return None
    return Entity(tuple(mentions))


def _template_key(template: Template):
    return (
        template.incident_type,
        frozenset(
            (role, frozenset(frozenset(m.surface for m in e.mentions) for e in entities))
            for role, entities in template.roles.items()
        ),
    )


def _dedupe_templates(
    templates: list[Template], doc_id: str, report: ParseReport
) -> tuple[Template, ...]:
    seen = set()
    out = []
    for t in templates:
        key = _template_key(t)
        if key in seen:
            report.duplicate_templates_dropped += 1
            logger.warning("%s: dropping duplicate template (%s)", doc_id, t.incident_type)
            continue
        seen.add(key)
        out.append(t)
    return tuple(out)


def _parse_muc_doc(record: dict, idx: int, report: ParseReport) -> tuple[Document, str | None]:
    where = f"[{idx}]"
    doc_id = _require(record, "docid", str, where)
    where = f"[{idx}] {doc_id}"
    doctext = _require(record, "doctext", str, where)
    words = tuple(doctext.split())
    if "sentences" in record:
        sentence_bounds = _parse_sentence_bounds(record["sentences"], where)
    else:
        sentence_bounds = _derive_sentence_bounds(words)

    raw_templates = record.get("templates", [])
    if not isinstance(raw_templates, list):
        raise MalformedInput(f"{where}.templates: expected a list")
    templates: list[Template] = []
    for t_idx, raw in enumerate(raw_templates):
        t_where = f"{where}.templates[{t_idx}]"
        if not isinstance(raw, dict):
            raise MalformedInput(f"{t_where}: expected an object")
        incident = _require(raw, "incident_type", str, t_where)
        incident = incident.strip().lower().replace("-", " ")
        incident = " ".join(incident.split())
        if incident not in INCIDENT_TYPES:
            raise MalformedInput(f"{t_where}.incident_type: unknown type {incident!r}")
        roles: dict[str, tuple[Entity, ...]] = {}
        for key, value in raw.items():
            if key == "incident_type":
                continue
            if key not in ROLE_NAMES:
                raise MalformedInput(f"{t_where}: unknown role {key!r}")
            if not isinstance(value, list):
                raise MalformedInput(f"{t_where}.{key}: expected a list of entities")
            entities = []
            for e_idx, strings in enumerate(value):
                if not isinstance(strings, list):
                    raise MalformedInput(
                        f"{t_where}.{key}[{e_idx}]: expected a list of mention strings"
                    )
                entity = _resolve_entity(words, strings, doc_id, f"{t_where}.{key}[{e_idx}]", report)
                if entity is not None:
                    entities.append(entity)
            if entities:
                roles[key] = tuple(entities)
        if not roles:
            report.empty_templates_dropped += 1
            logger.warning("%s: dropping template %d with no role fillers", doc_id, t_idx)
            continue
        templates.append(Template(incident, roles))

    doc = Document(doc_id, words, sentence_bounds, _dedupe_templates(templates, doc_id, report))
    split = record.get("split")
    return doc, split


def _parse_wikievents_doc(
    record: dict, idx: int, report: ParseReport
) -> tuple[Document, str | None]:
    where = f"[{idx}]"
    doc_id = record.get("doc_id", record.get("docid"))
    if not isinstance(doc_id, str):
        raise MalformedInput(f"{where}.doc_id: expected str")
    where = f"[{idx}] {doc_id}"

    if isinstance(record.get("tokens"), list):
        words = tuple(str(w) for w in record["tokens"])
    elif isinstance(record.get("doctext"), str):
        words = tuple(record["doctext"].split())
    else:
        raise MalformedInput(f"{where}: need 'tokens' or 'doctext'")

    raw_sentences = record.get("sentences")
    if raw_sentences is None:
        sentence_bounds = _derive_sentence_bounds(words)
    elif raw_sentences and all(
        isinstance(s, list) and s and all(isinstance(w, str) for w in s) for s in raw_sentences
    ):
        # Sentences given as token lists; convert lengths to intervals.
        bounds = []
        start = 0
        for sent in raw_sentences:
            bounds.append((start, start + len(sent)))
            start += len(sent)
        sentence_bounds = tuple(bounds)
    else:
        sentence_bounds = _parse_sentence_bounds(raw_sentences, where)

    events = record.get("event_mentions", [])
    if not isinstance(events, list):
        raise MalformedInput(f"{where}.event_mentions: expected a list")
    templates: list[Template] = []
    for e_idx, event in enumerate(events):
        e_where = f"{where}.event_mentions[{e_idx}]"
        if not isinstance(event, dict):
            raise MalformedInput(f"{e_where}: expected an object")
        event_type = event.get("event_type")
        if not isinstance(event_type, str):
            raise MalformedInput(f"{e_where}.event_type: expected str")
        # Group arguments into entities: shared entity_id merges; else singletons.
        grouped: dict[str, dict] = {}
        order: list[str] = []
        for a_idx, arg in enumerate(event.get("arguments", [])):
            a_where = f"{e_where}.arguments[{a_idx}]"
            if not isinstance(arg, dict):
                raise MalformedInput(f"{a_where}: expected an object")
            role = arg.get("role", arg.get("arg_role"))
            if not isinstance(role, str):
                raise MalformedInput(f"{a_where}.role: expected str")
            key = arg.get("entity_id")
            key = f"{role}\x1f{key}" if isinstance(key, str) else f"{role}\x1f#{a_idx}"
            if key not in grouped:
                grouped[key] = {"role": role, "args": []}
                order.append(key)
            grouped[key]["args"].append((arg, a_where))
        roles: dict[str, list[Entity]] = {}
        for key in order:
            role = grouped[key]["role"]
            claimed: set[int] = set()
            mentions: list[MentionSpan] = []
            strings_to_resolve: list[str] = []
            for arg, a_where in grouped[key]["args"]:
                text = arg.get("text", arg.get("mention"))
                if not isinstance(text, str) or not text.split():
                    raise MalformedInput(f"{a_where}.text: expected a non-empty string")
                surface = " ".join(text.split())
                if isinstance(arg.get("start"), int) and isinstance(arg.get("end"), int):
                    start, end = arg["start"], arg["end"]
                    if not (0 <= start < end <= len(words)):
                        raise MalformedInput(f"{a_where}: span [{start}, {end}) out of range")
                    matched = " ".join(words[start:end])
                    if matched != surface:
                        report.surface_mismatches += 1
                        logger.debug(
                            "%s: argument text %r differs from span words %r",
                            doc_id,
                            surface,
                            matched,
                        )
                    claimed.add(start)
                    mentions.append(MentionSpan(start, end, surface))
                else:
                    strings_to_resolve.append(text)
            for text in strings_to_resolve:
                mention_words = text.split()
                surface = " ".join(mention_words)
                occurrences = _occurrences(words, mention_words)
                start = next((o for o in occurrences if o not in claimed), None)
                if start is None:
                    if occurrences:
                        report.duplicate_mentions_dropped += 1
                        continue
                    raise OffsetResolutionError(doc_id, text)
                claimed.add(start)
                end = start + len(mention_words)
                matched = " ".join(words[start:end])
                if matched != surface:
                    report.surface_mismatches += 1
                mentions.append(MentionSpan(start, end, surface))
            if mentions:
                roles.setdefault(role, []).append(Entity(tuple(mentions)))
        if not roles:
            report.empty_templates_dropped += 1
            logger.warning("%s: dropping event %d with no arguments", doc_id, e_idx)
            continue
        templates.append(Template(event_type, {r: tuple(es) for r, es in roles.items()}))

    doc = Document(doc_id, words, sentence_bounds, _dedupe_templates(templates, doc_id, report))
    return doc, record.get("split")
