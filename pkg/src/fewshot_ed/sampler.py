"""N+1-way K-shot episode construction.

An episode holds N positive clusters plus one NULL cluster (always the last
class index, N), each with K support mentions, and ``queries_per_class``
labelled queries per class.  NULL mentions are non-trigger tokens drawn from
the sentences of the same split side.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .corpus import NULL_TYPE, EventMention, EventType, Sentence, SplitSide

logger = logging.getLogger(__name__)

MAX_NULL_ATTEMPTS = 1000


class SamplingError(ValueError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    n_way: int = 5
    k_shot: int = 5
    queries_per_class: int = 1
    train_class_pool_size: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.n_way < 1 or self.k_shot < 1 or self.queries_per_class < 1:
            raise SamplingError(f"n_way, k_shot and queries_per_class must be >= 1: {self}")
        if self.train_class_pool_size < self.n_way:
            raise SamplingError(f"class pool ({self.train_class_pool_size}) smaller than n_way ({self.n_way})")


@dataclass
class Episode:
    support: list[list[EventMention]]
    queries: list[tuple[EventMention, int]]
    class_map: list[EventType]

    @property
    def n_way(self) -> int:
        return len(self.support) - 1

    @property
    def k_shot(self) -> int:
        return len(self.support[0])

    @property
    def null_index(self) -> int:
        return len(self.support) - 1

    def support_mentions(self) -> list[EventMention]:
        return [m for cluster in self.support for m in cluster]

    def query_mentions(self) -> list[EventMention]:
        return [m for m, _ in self.queries]

    def query_labels(self) -> list[int]:
        return [y for _, y in self.queries]

    def signature(self) -> tuple:
        """Hashable structural summary used for equality checks."""
        return (
            tuple(t.name for t in self.class_map),
            tuple(tuple(m.key for m in cluster) for cluster in self.support),
            tuple((m.key, y) for m, y in self.queries),
        )

    def to_json(self) -> dict:
        return {
            "classMap": {str(i): t.name for i, t in enumerate(self.class_map)},
            "support": {str(i): [m.to_json() for m in cluster] for i, cluster in enumerate(self.support)},
            "queries": [dict(m.to_json(), label=y) for m, y in self.queries],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)


def synthesize_null_mention(sentence: Sentence, trigger_anchors, rng: np.random.Generator) -> EventMention:
    """Pick a uniformly random non-trigger token of ``sentence`` as a NULL instance."""
    blocked = set(trigger_anchors)
    candidates = [i for i in range(len(sentence)) if i not in blocked]
    if not candidates:
        raise SamplingError(f"sentence {sentence.key} has no non-trigger tokens")
    return EventMention(sentence, candidates[int(rng.integers(len(candidates)))], NULL_TYPE)


def _draw_nulls(sentences: list[Sentence], count: int, taken: set, rng: np.random.Generator) -> list[EventMention]:
    if not sentences:
        raise SamplingError("no sentences available to draw NULL instances from")
    out = []
    for _ in range(MAX_NULL_ATTEMPTS * count):
        if len(out) == count:
            break
        sentence = sentences[int(rng.integers(len(sentences)))]
        if len(sentence.trigger_anchors) >= len(sentence):
            continue
        m = synthesize_null_mention(sentence, sentence.trigger_anchors, rng)
        if m.key in taken:
            continue
        taken.add(m.key)
        out.append(m)
    if len(out) < count:
        raise SamplingError(f"could only draw {len(out)} of {count} distinct NULL instances")
    return out


def sample_episode(side: SplitSide, cfg: SamplerConfig, rng: np.random.Generator,
                   class_pool: list[str] | None = None, *, _groups=None) -> Episode:
    groups = _groups if _groups is not None else side.by_type()
    candidates = sorted(class_pool) if class_pool is not None else sorted(groups)
    if cfg.n_way > len(candidates):
        raise SamplingError(f"n_way={cfg.n_way} exceeds the {len(candidates)} available types on {side.name}")
    per_class = cfg.k_shot + cfg.queries_per_class
    for name in candidates:
        have = len(groups.get(name, ()))
        if have < per_class:
            raise SamplingError(f"type {name!r} has {have} mentions on {side.name}, "
                                f"needs {per_class} for {cfg.k_shot}-shot with {cfg.queries_per_class} queries")

    chosen = [candidates[i] for i in rng.choice(len(candidates), cfg.n_way, replace=False)]
    support, queries, class_map = [], [], []
    taken = set()
    for idx, name in enumerate(chosen):
        pool = groups[name]
        picks = [pool[i] for i in rng.choice(len(pool), per_class, replace=False)]
        support.append(picks[:cfg.k_shot])
        queries.extend((m, idx) for m in picks[cfg.k_shot:])
        class_map.append(pool[0].label)
        taken.update(m.key for m in picks)
    nulls = _draw_nulls(side.sentences, per_class, taken, rng)
    support.append(nulls[:cfg.k_shot])
    queries.extend((m, cfg.n_way) for m in nulls[cfg.k_shot:])
    class_map.append(NULL_TYPE)
    return Episode(support, queries, class_map)


class EpisodeStream:
    """Deterministic sequence of ``iterations`` episodes, fully determined by ``cfg.seed``.

    With ``use_class_pool`` each iteration first draws ``train_class_pool_size``
    types, then the episode's N classes from that pool.  Not safe for
    concurrent advancement.
    """

    def __init__(self, side: SplitSide, cfg: SamplerConfig, iterations: int, use_class_pool: bool = True):
        self.side = side
        self.cfg = cfg
        self.iterations = iterations
        self.use_class_pool = use_class_pool
        self.rng = np.random.default_rng(cfg.seed)
        self._groups = side.by_type()
        self._types = sorted(self._groups)
        self.pool_size = cfg.train_class_pool_size
        if use_class_pool and self.pool_size > len(self._types):
            logger.warning("class pool size %d exceeds %d available types on %s; using all types",
                           self.pool_size, len(self._types), side.name)
            self.pool_size = len(self._types)

    def __len__(self):
        return self.iterations

    def __iter__(self) -> Iterator[Episode]:
        for _ in range(self.iterations):
            pool = None
            if self.use_class_pool:
                pool = [self._types[i] for i in self.rng.choice(len(self._types), self.pool_size, replace=False)]
            yield sample_episode(self.side, self.cfg, self.rng, pool, _groups=self._groups)


def episode_stream(side: SplitSide, cfg: SamplerConfig, iterations: int,
                   use_class_pool: bool = True) -> EpisodeStream:
    return EpisodeStream(side, cfg, iterations, use_class_pool)
