"""Word and relative-position embeddings, and mention batching.

Each token becomes ``[word_vec, pos_vec(i - anchor)]``.  Both tables are
trainable.  PAD rows come out as exact zeros so that padding never leaks
into the encoders.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import torch
from torch import nn

from .corpus import DEFAULT_MAX_SENTENCE_LENGTH, EventMention

logger = logging.getLogger(__name__)

PAD = "<pad>"
UNK = "<unk>"


class EmbeddingFileError(ValueError):
    pass


class Vocabulary:
    """Token to row-index map plus an initial embedding matrix.

    Rows 0 and 1 are PAD and UNK.  Lookup is total: exact match, then
    lowercase, then UNK.
    """

    def __init__(self, tokens: Sequence[str], vectors: np.ndarray):
        tokens = list(tokens)
        if tokens[:2] != [PAD, UNK]:
            raise ValueError("vocabulary must start with PAD and UNK")
        if vectors.shape[0] != len(tokens):
            raise ValueError(f"{len(tokens)} tokens but {vectors.shape[0]} vectors")
        self.tokens = tokens
        self.vectors = np.asarray(vectors, dtype=np.float64)
        self.index = {t: i for i, t in enumerate(tokens)}

    pad_id = 0
    unk_id = 1

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def lookup(self, token: str) -> int:
        i = self.index.get(token)
        if i is None:
            i = self.index.get(token.lower(), self.unk_id)
        return i

    def encode(self, words: Iterable[str]) -> list[int]:
        return [self.lookup(w) for w in words]

    @classmethod
    def from_words(cls, words: Iterable[str], dim: int, seed: int = 0) -> "Vocabulary":
        """Randomly initialised vocabulary for when no pretrained file is given."""
        uniq = sorted(set(words) - {PAD, UNK})
        rng = np.random.default_rng(seed)
        vectors = rng.uniform(-0.1, 0.1, size=(len(uniq) + 2, dim))
        vectors[0] = 0.0
        return cls([PAD, UNK] + uniq, vectors)


def _looks_like_header(parts: list[str]) -> bool:
    return len(parts) == 2 and all(p.isdigit() for p in parts)


def load_pretrained_embeddings(path, dim: int) -> Vocabulary:
    """Load a GloVe/word2vec text file (optional ``count dim`` header line)."""
    tokens, rows = [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.rstrip().split(" ")
            if not line.strip():
                continue
            if lineno == 1 and _looks_like_header(parts):
                continue
            if len(parts) != dim + 1:
                raise EmbeddingFileError(f"line {lineno}: expected {dim} values, found {len(parts) - 1}")
            try:
                rows.append([float(x) for x in parts[1:]])
            except ValueError as exc:
                raise EmbeddingFileError(f"line {lineno}: {exc}") from exc
            tokens.append(parts[0])
    vectors = np.zeros((len(rows) + 2, dim))
    if rows:
        vectors[2:] = np.asarray(rows)
        vectors[1] = vectors[2:].mean(axis=0)
    logger.info("loaded %d vectors of dim %d from %s", len(rows), dim, path)
    return Vocabulary([PAD, UNK] + tokens, vectors)


class PositionTable(nn.Module):
    """Trainable embeddings of clamped relative distances in [-max_dist, max_dist]."""

    def __init__(self, max_dist: int = DEFAULT_MAX_SENTENCE_LENGTH, dim: int = 50):
        super().__init__()
        self.max_dist = max_dist
        self.dim = dim
        self.table = nn.Embedding(2 * max_dist + 1, dim)
        nn.init.uniform_(self.table.weight, -0.1, 0.1)

    def row(self, distance):
        return torch.as_tensor(distance).clamp(-self.max_dist, self.max_dist) + self.max_dist

    def forward(self, distance):
        return self.table(self.row(distance))


@dataclass
class MentionBatch:
    token_ids: torch.Tensor   # (B, L) long, PAD-filled
    lengths: torch.Tensor     # (B,) long
    anchors: torch.Tensor     # (B,) long
    heads: torch.Tensor       # (B, L) long; -1 root or out-of-window, -2 PAD

    @property
    def mask(self) -> torch.Tensor:
        steps = torch.arange(self.token_ids.shape[1])
        return steps[None, :] < self.lengths[:, None]

    def __len__(self):
        return self.token_ids.shape[0]


def truncation_window(length: int, anchor: int, max_len: int) -> tuple[int, int]:
    """Half-open [start, end) window of at most ``max_len`` tokens centred on the anchor."""
    if length <= max_len:
        return 0, length
    start = min(max(anchor - max_len // 2, 0), length - max_len)
    return start, start + max_len


def make_batch(mentions: Sequence[EventMention], vocab: Vocabulary,
               max_len: int = DEFAULT_MAX_SENTENCE_LENGTH, min_width: int = 1) -> MentionBatch:
    """Tensorise mentions, truncating long sentences around their anchors.

    Heads that fall outside a truncation window become roots of their own
    subtree.  ``min_width`` pads every row to at least that many columns.
    """
    rows, heads, anchors = [], [], []
    for m in mentions:
        start, end = truncation_window(len(m.sentence), m.anchor, max_len)
        words = m.sentence.words[start:end]
        rows.append(vocab.encode(words))
        hs = []
        for h in m.sentence.heads[start:end]:
            hs.append(h - start if start <= h < end else -1)
        heads.append(hs)
        anchors.append(m.anchor - start)
    width = max([len(r) for r in rows] + [min_width])
    ids = torch.full((len(rows), width), vocab.pad_id, dtype=torch.long)
    head_t = torch.full((len(rows), width), -2, dtype=torch.long)
    for b, (r, h) in enumerate(zip(rows, heads)):
        ids[b, :len(r)] = torch.tensor(r, dtype=torch.long)
        head_t[b, :len(h)] = torch.tensor(h, dtype=torch.long)
    return MentionBatch(ids, torch.tensor([len(r) for r in rows]), torch.tensor(anchors), head_t)


class InstanceEmbedder(nn.Module):
    """Produces E(s): (B, L, u + v) with PAD rows zeroed."""

    def __init__(self, vocab: Vocabulary, position_dim: int = 50,
                 max_dist: int = DEFAULT_MAX_SENTENCE_LENGTH, trainable: bool = True):
        super().__init__()
        self.words = nn.Embedding(len(vocab), vocab.dim, padding_idx=vocab.pad_id)
        with torch.no_grad():
            self.words.weight.copy_(torch.as_tensor(vocab.vectors))
        self.words.weight.requires_grad_(trainable)
        self.positions = PositionTable(max_dist, position_dim)

    @property
    def word_dim(self) -> int:
        return self.words.embedding_dim

    @property
    def dim(self) -> int:
        return self.words.embedding_dim + self.positions.dim

    def forward(self, batch: MentionBatch) -> torch.Tensor:
        steps = torch.arange(batch.token_ids.shape[1])
        rel = steps[None, :] - batch.anchors[:, None]
        out = torch.cat([self.words(batch.token_ids), self.positions(rel)], dim=-1)
        return out * batch.mask[..., None].to(out.dtype)


def embed_sentence(words: Sequence[str], anchor: int, vocab: Vocabulary, positions: PositionTable,
                   word_table: nn.Embedding | None = None) -> torch.Tensor:
    """Single-sentence E(s) of shape (L, u + v)."""
    if not 0 <= anchor < len(words):
        raise IndexError(f"anchor {anchor} out of range for {len(words)} tokens")
    ids = torch.tensor(vocab.encode(words), dtype=torch.long)
    if word_table is None:
        word_vecs = torch.as_tensor(vocab.vectors, dtype=positions.table.weight.dtype)[ids]
    else:
        word_vecs = word_table(ids)
    rel = torch.arange(len(words)) - anchor
    return torch.cat([word_vecs, positions(rel)], dim=-1)
