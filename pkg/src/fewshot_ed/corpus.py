"""Corpus ingestion and label-disjoint train/dev/test splitting.

Corpus files are JSON Lines, one sentence per line::

    {"docId": ..., "sentId": ..., "tokens": [...], "depHeads": [...],
     "depLabels": [...], "events": [{"anchor": 3, "type": "Attack",
     "parentType": "Conflict"}]}

``depHeads`` uses -1 for the root.  Only positive triggers are stored;
NULL instances are drawn later by the episode sampler.
"""
from __future__ import annotations

import json
import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

NULL_LABEL = "NULL"
SCHEMA_VERSION = "1"
DEFAULT_MAX_SENTENCE_LENGTH = 80

# ACE-2005 coarse types used for training in the original experiments.
ACE_TRAIN_PARENT_TYPES = ("Business", "Contact", "Conflict", "Justice")
ACE_EVAL_PARENT_TYPES = ("Life", "Movement", "Personnel", "Transaction")


class CorpusError(ValueError):
    """Raised for malformed or invalid corpus content."""


class SplitError(ValueError):
    """Raised when a split cannot satisfy the requested few-shot setting."""


@dataclass(frozen=True)
class Token:
    text: str
    dep_head: int = -1
    dep_label: str = ""


@dataclass(frozen=True)
class EventType:
    name: str
    parent_type: str = ""
    is_null: bool = False

    def __post_init__(self):
        if self.is_null != (self.name == NULL_LABEL):
            raise CorpusError(f"the reserved label {NULL_LABEL!r} must be the only NULL type, got {self.name!r}")


NULL_TYPE = EventType(NULL_LABEL, "", True)


@dataclass(frozen=True, eq=False)
class Sentence:
    """A tokenized, pre-parsed sentence.

    ``trigger_anchors`` holds the positions of every annotated trigger in the
    sentence, whatever its type, so negatives are never drawn from them.
    """

    doc_id: str
    sent_id: str
    tokens: tuple[Token, ...]
    trigger_anchors: frozenset[int] = frozenset()

    def __len__(self):
        return len(self.tokens)

    @property
    def key(self) -> tuple[str, str]:
        return self.doc_id, self.sent_id

    @property
    def words(self) -> list[str]:
        return [t.text for t in self.tokens]

    @property
    def heads(self) -> list[int]:
        return [t.dep_head for t in self.tokens]


@dataclass(frozen=True, eq=False)
class EventMention:
    sentence: Sentence
    anchor: int
    label: EventType

    @property
    def key(self) -> tuple[str, str, int]:
        return self.sentence.doc_id, self.sentence.sent_id, self.anchor

    def __eq__(self, other):
        if not isinstance(other, EventMention):
            return NotImplemented
        return self.key == other.key and self.label == other.label

    def __hash__(self):
        return hash((self.key, self.label))

    def __repr__(self):
        return f"EventMention({self.key}, {self.label.name!r}, {self.sentence.tokens[self.anchor].text!r})"

    def to_json(self) -> dict:
        return {
            "docId": self.sentence.doc_id,
            "sentId": self.sentence.sent_id,
            "anchor": self.anchor,
            "type": self.label.name,
            "parentType": self.label.parent_type,
            "tokens": self.sentence.words,
        }


@dataclass
class Corpus:
    mentions: list[EventMention]
    sentences: list[Sentence]
    stats: dict[str, int]

    @property
    def event_free_sentences(self) -> list[Sentence]:
        return [s for s in self.sentences if not s.trigger_anchors]


@dataclass
class CorpusSplit:
    train: list[EventMention]
    dev: list[EventMention]
    test: list[EventMention]
    train_types: frozenset[str]
    dev_test_types: frozenset[str]
    # Sentence pools for NULL synthesis, one per side.
    train_sentences: list[Sentence] = field(default_factory=list)
    dev_sentences: list[Sentence] = field(default_factory=list)
    test_sentences: list[Sentence] = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def side(self, name: str) -> "SplitSide":
        if name not in ("train", "dev", "test"):
            raise ValueError(f"unknown split side {name!r}")
        return SplitSide(name, getattr(self, name), getattr(self, f"{name}_sentences"))

    def manifest(self) -> dict:
        rows = []
        for name in ("train", "dev", "test"):
            for m in getattr(self, name):
                doc_id, sent_id, anchor = m.key
                rows.append({"docId": doc_id, "sentId": sent_id, "anchor": anchor,
                             "type": m.label.name, "split": name})
        return {"schemaVersion": SCHEMA_VERSION, "params": self.params, "rows": rows}


@dataclass
class SplitSide:
    """One side of a split: its positive mentions and its NULL sentence pool."""

    name: str
    mentions: list[EventMention]
    sentences: list[Sentence]

    def by_type(self) -> dict[str, list[EventMention]]:
        groups = defaultdict(list)
        for m in self.mentions:
            groups[m.label.name].append(m)
        return dict(groups)

    @property
    def types(self) -> list[str]:
        return sorted({m.label.name for m in self.mentions})


def validate_heads(heads: Sequence[int], where: str = "") -> None:
    """Check that ``heads`` encodes a single-rooted tree."""
    n = len(heads)
    roots = [i for i, h in enumerate(heads) if h == -1]
    for i, h in enumerate(heads):
        if not -1 <= h < n:
            raise CorpusError(f"{where}: depHead {h} of token {i} out of range")
        if h == i:
            raise CorpusError(f"{where}: token {i} is its own head")
    if n and len(roots) != 1:
        raise CorpusError(f"{where}: dependency heads have {len(roots)} roots, expected 1")
    for start in range(n):
        seen = set()
        node = start
        while node != -1:
            if node in seen:
                raise CorpusError(f"{where}: dependency heads contain a cycle through token {node}")
            seen.add(node)
            node = heads[node]


def _parse_line(obj: dict, lineno: int) -> tuple[Sentence, list[tuple[int, str, str]]]:
    try:
        doc_id = str(obj["docId"])
        sent_id = str(obj["sentId"])
        words = obj["tokens"]
        heads = obj.get("depHeads")
        labels = obj.get("depLabels") or [""] * len(words)
        events = obj.get("events", [])
    except (KeyError, TypeError) as exc:
        raise CorpusError(f"line {lineno}: missing field {exc}") from exc
    where = f"line {lineno} (docId={doc_id}, sentId={sent_id})"
    if not isinstance(words, list) or not words:
        raise CorpusError(f"{where}: tokens must be a non-empty list")
    if heads is None:
        raise CorpusError(f"{where}: missing depHeads")
    if len(heads) != len(words) or len(labels) != len(words):
        raise CorpusError(f"{where}: depHeads/depLabels length does not match tokens")
    validate_heads(heads, where)
    triggers = []
    for ev in events:
        try:
            anchor, name, parent = int(ev["anchor"]), str(ev["type"]), str(ev.get("parentType", ""))
        except (KeyError, TypeError, ValueError) as exc:
            raise CorpusError(f"{where}: malformed event {ev!r}") from exc
        if not 0 <= anchor < len(words):
            raise CorpusError(f"{where}: anchor {anchor} out of range for {len(words)} tokens")
        if name == NULL_LABEL:
            raise CorpusError(f"{where}: {NULL_LABEL} is reserved and cannot be annotated")
        triggers.append((anchor, name, parent))
    tokens = tuple(Token(str(w), int(h), str(l)) for w, h, l in zip(words, heads, labels))
    sentence = Sentence(doc_id, sent_id, tokens, frozenset(a for a, _, _ in triggers))
    return sentence, triggers


def load_corpus(path, schema_version: str = SCHEMA_VERSION) -> Corpus:
    """Read and validate a JSON-Lines corpus file."""
    if schema_version != SCHEMA_VERSION:
        raise CorpusError(f"unsupported schema version {schema_version!r}")
    sentences, mentions = [], []
    types: dict[str, EventType] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
            sentence, triggers = _parse_line(obj, lineno)
            sentences.append(sentence)
            for anchor, name, parent in triggers:
                etype = types.setdefault(name, EventType(name, parent))
                if etype.parent_type != parent:
                    raise CorpusError(f"line {lineno}: type {name!r} has conflicting parent types "
                                      f"{etype.parent_type!r} and {parent!r}")
                mentions.append(EventMention(sentence, anchor, etype))
    stats = dict(sorted(Counter(m.label.name for m in mentions).items()))
    logger.info("loaded %d sentences, %d mentions, %d types from %s",
                len(sentences), len(mentions), len(stats), path)
    return Corpus(mentions, sentences, stats)


def _halve(items: list, rng: np.random.Generator) -> tuple[list, list]:
    order = rng.permutation(len(items))
    shuffled = [items[i] for i in order]
    cut = math.ceil(len(shuffled) / 2)
    return shuffled[:cut], shuffled[cut:]


def _halve_by_document(items: list[EventMention], rng: np.random.Generator) -> tuple[list, list]:
    docs = defaultdict(list)
    for m in items:
        docs[m.sentence.doc_id].append(m)
    names = sorted(docs)
    order = rng.permutation(len(names))
    target = math.ceil(len(items) / 2)
    dev, test = [], []
    for i in order:
        bucket = docs[names[i]]
        (dev if len(dev) < target else test).extend(bucket)
    return dev, test


def make_split(
    mentions: Iterable[EventMention],
    train_parent_types: Iterable[str],
    min_per_type: int = 15,
    seed: int = 0,
    *,
    event_free_sentences: Sequence[Sentence] = (),
    n_way: int | None = None,
    unit: str = "mention",
) -> CorpusSplit:
    """Split mentions into label-disjoint train and dev/test sides.

    Types (subtypes) with fewer than ``min_per_type`` mentions are dropped
    everywhere.  Types whose parent is in ``train_parent_types`` go to train;
    the rest are divided per type between dev and test, dev taking the extra
    mention on odd counts.  ``unit="document"`` keeps documents whole within
    each type at the cost of exact balance.
    """
    train_parents = frozenset(train_parent_types)
    if not train_parents:
        raise SplitError("train_parent_types must be non-empty")
    if unit not in ("mention", "document"):
        raise SplitError(f"unknown split unit {unit!r}")
    mentions = list(mentions)
    for m in mentions:
        if not m.label.parent_type:
            raise SplitError(f"type {m.label.name!r} has no parentType")

    groups: dict[str, list[EventMention]] = defaultdict(list)
    for m in mentions:
        groups[m.label.name].append(m)
    # canonical order so the split does not depend on input order
    for name in groups:
        groups[name].sort(key=lambda m: m.key)
    kept = {name: ms for name, ms in groups.items() if len(ms) >= min_per_type}
    dropped = sorted(set(groups) - set(kept))
    if dropped:
        logger.info("dropping %d types with fewer than %d mentions: %s", len(dropped), min_per_type, dropped)

    train_types = sorted(n for n, ms in kept.items() if ms[0].label.parent_type in train_parents)
    eval_types = sorted(n for n, ms in kept.items() if ms[0].label.parent_type not in train_parents)
    if n_way is not None:
        short = [f"the {side} side has only {len(found)} usable types {found}"
                 for side, found in (("train", train_types), ("dev/test", eval_types)) if len(found) < n_way]
        if short:
            raise SplitError(f"{n_way}+1-way episodes are unsatisfiable: " + "; ".join(short))

    rng = np.random.default_rng(seed)
    train = [m for n in train_types for m in kept[n]]
    dev, test = [], []
    for name in eval_types:
        halve = _halve if unit == "mention" else _halve_by_document
        d, t = halve(kept[name], rng)
        dev.extend(d)
        test.extend(t)

    train_sents = _unique_sentences(train)
    dev_sents = _unique_sentences(dev)
    test_sents = _unique_sentences(test)
    free = sorted(event_free_sentences, key=lambda s: s.key)
    # event-free sentences are dealt 2:1:1 to train/dev/test
    for pos, i in enumerate(rng.permutation(len(free))):
        [train_sents, train_sents, dev_sents, test_sents][pos % 4].append(free[i])

    params = {"trainParentTypes": sorted(train_parents), "minPerType": min_per_type, "seed": seed,
              "unit": unit, "droppedTypes": dropped}
    return CorpusSplit(train, dev, test, frozenset(train_types), frozenset(eval_types),
                       train_sents, dev_sents, test_sents, params)


def _unique_sentences(mentions: Iterable[EventMention]) -> list[Sentence]:
    seen, out = set(), []
    for m in mentions:
        if m.sentence.key not in seen:
            seen.add(m.sentence.key)
            out.append(m.sentence)
    return out


def split_corpus(corpus: Corpus, train_parent_types: Iterable[str], min_per_type: int = 15,
                 seed: int = 0, **kwargs) -> CorpusSplit:
    return make_split(corpus.mentions, train_parent_types, min_per_type, seed,
                      event_free_sentences=corpus.event_free_sentences, **kwargs)


def write_manifest(split: CorpusSplit, path) -> None:
    Path(path).write_text(json.dumps(split.manifest(), indent=1) + "\n", encoding="utf-8")
