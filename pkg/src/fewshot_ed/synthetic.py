"""Synthetic corpora with separable event types, for desk-scale runs without licensed data.

Every event subtype owns a small set of trigger words whose embeddings share
one random direction; all other tokens are fillers with small random vectors.
Each annotated sentence carries exactly one trigger, and extra event-free
sentences add NULL material.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np


@dataclass
class SyntheticSpec:
    num_types: int = 12
    subtypes_per_type: int = 2
    # mentions per parent type, spread evenly over its subtypes
    mentions_per_type: int = 60
    vocab_per_type: int = 5
    min_length: int = 8
    max_length: int = 20
    trigger_placement: str = "uniform"
    embedding_dim: int = 300
    filler_vocab: int = 400
    distractor_ratio: float = 0.25
    sentences_per_doc: int = 5
    parent_names: tuple[str, ...] | None = None
    seed: int = 0

    def __post_init__(self):
        if self.parent_names is not None:
            self.parent_names = tuple(self.parent_names)
            if len(self.parent_names) != self.num_types:
                raise ValueError("parent_names must have num_types entries")
        if min(self.num_types, self.subtypes_per_type, self.vocab_per_type, self.min_length,
               self.embedding_dim, self.filler_vocab, self.sentences_per_doc) < 1:
            raise ValueError(f"synthetic spec sizes must be positive: {self}")
        if self.mentions_per_type < self.subtypes_per_type:
            raise ValueError("mentions_per_type must cover every subtype")
        if self.max_length < max(self.min_length, 2):
            raise ValueError("max_length must be >= min_length and >= 2")
        if self.trigger_placement not in ("uniform", "center", "start"):
            raise ValueError(f"unknown trigger placement {self.trigger_placement!r}")

    @property
    def parents(self) -> list[str]:
        return list(self.parent_names) if self.parent_names else [f"Type{i:02d}" for i in range(self.num_types)]

    def subtypes(self) -> list[tuple[str, str, int]]:
        """(subtype, parent, mention count) triples."""
        out = []
        for parent in self.parents:
            base, extra = divmod(self.mentions_per_type, self.subtypes_per_type)
            for j in range(self.subtypes_per_type):
                out.append((f"{parent}:Sub{j}", parent, base + (j < extra)))
        return out

    @property
    def train_parent_types(self) -> list[str]:
        """First two thirds of the parent types, the train side of the default split."""
        return self.parents[: max(1, round(self.num_types * 2 / 3))]


def random_tree(n: int, rng: np.random.Generator) -> list[int]:
    order = rng.permutation(n)
    heads = [-1] * n
    for i in range(1, n):
        heads[order[i]] = int(order[rng.integers(i)])
    return heads


def _anchor_position(length: int, policy: str, rng: np.random.Generator) -> int:
    if policy == "center":
        return length // 2
    if policy == "start":
        return 0
    return int(rng.integers(length))


def generate(spec: SyntheticSpec) -> tuple[list[dict], dict[str, np.ndarray]]:
    """Build corpus records and the embedding table in memory."""
    rng = np.random.default_rng(spec.seed)
    dim = spec.embedding_dim
    fillers = [f"w{i:04d}" for i in range(spec.filler_vocab)]
    vectors = {w: rng.normal(0.0, 0.5 / np.sqrt(dim), dim) for w in fillers}
    triggers = {}
    for name, _, _ in spec.subtypes():
        direction = rng.normal(size=dim)
        direction /= np.linalg.norm(direction)
        words = [f"{name.replace(':', '_').lower()}_{j}" for j in range(spec.vocab_per_type)]
        for w in words:
            vectors[w] = direction + rng.normal(0.0, 0.1 / np.sqrt(dim), dim)
        triggers[name] = words

    items = [(name, parent) for name, parent, count in spec.subtypes() for _ in range(count)]
    n_free = int(round(len(items) * spec.distractor_ratio))
    items += [(None, None)] * n_free
    order = rng.permutation(len(items))

    records = []
    for pos, i in enumerate(order):
        name, parent = items[i]
        length = int(rng.integers(spec.min_length, spec.max_length + 1))
        words = [fillers[j] for j in rng.integers(len(fillers), size=length)]
        events = []
        if name is not None:
            anchor = _anchor_position(length, spec.trigger_placement, rng)
            words[anchor] = triggers[name][int(rng.integers(spec.vocab_per_type))]
            events.append({"anchor": anchor, "type": name, "parentType": parent})
        heads = random_tree(length, rng)
        records.append({
            "docId": f"doc{pos // spec.sentences_per_doc:05d}",
            "sentId": f"s{pos:06d}",
            "tokens": words,
            "depHeads": heads,
            "depLabels": ["root" if h == -1 else "dep" for h in heads],
            "events": events,
        })
    return records, vectors


def write_synthetic(spec: SyntheticSpec, out_dir) -> tuple[Path, Path]:
    """Write ``corpus.jsonl``, ``embeddings.txt`` and ``synthetic.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records, vectors = generate(spec)
    corpus_path = out / "corpus.jsonl"
    with open(corpus_path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    emb_path = out / "embeddings.txt"
    with open(emb_path, "w", encoding="utf-8") as fh:
        for word, vec in vectors.items():
            fh.write(word + " " + " ".join(f"{x:.6f}" for x in vec) + "\n")
    (out / "synthetic.json").write_text(json.dumps(asdict(spec), indent=1) + "\n", encoding="utf-8")
    return corpus_path, emb_path
