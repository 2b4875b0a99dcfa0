"""Distance-based scoring and the four few-shot model families.

========== ============== ==================
family     prototype      logit
========== ============== ==================
matching   mean           cosine
proto      mean           -squared euclidean
proto_att  attention      -squared euclidean
relation   mean           learned comparator
========== ============== ==================
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .embedding import InstanceEmbedder, MentionBatch, Vocabulary, make_batch
from .encoders import EncoderConfig, build_encoder
from .prototypes import attention_prototypes, mean_prototypes
from .sampler import Episode

DISTANCES = ("euclidean", "cosine", "relation")
FAMILIES = {
    "matching": ("mean", "cosine"),
    "proto": ("mean", "euclidean"),
    "proto_att": ("attention", "euclidean"),
    "relation": ("mean", "relation"),
}
FAMILY_TITLES = {"proto": "Proto", "proto_att": "Proto+Att", "relation": "Relation", "matching": "Matching"}


def cosine(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """Cosine along the last axis; defined as 0 when either vector is zero."""
    num = (a * b).sum(-1)
    den = torch.linalg.vector_norm(a, dim=-1) * torch.linalg.vector_norm(b, dim=-1)
    safe = torch.where(den > 0, den, torch.ones_like(den))
    return torch.where(den > 0, num / safe, torch.zeros_like(num))


class RelationComparator(nn.Module):
    """Learned similarity: concat(v, c) -> affine -> ReLU -> affine -> scalar."""

    def __init__(self, dim: int, hidden: int | None = None):
        super().__init__()
        hidden = hidden or dim
        self.net = nn.Sequential(nn.Linear(2 * dim, hidden), nn.ReLU(), nn.Linear(hidden, 1))

    def forward(self, queries: torch.Tensor, protos: torch.Tensor) -> torch.Tensor:
        if protos.ndim == 2:
            protos = protos[None].expand(queries.shape[0], -1, -1)
        pairs = torch.cat([queries[:, None, :].expand_as(protos), protos], dim=-1)
        return self.net(pairs).squeeze(-1)


def logits(queries: torch.Tensor, protos: torch.Tensor, kind: str,
           comparator: RelationComparator | None = None) -> torch.Tensor:
    """(Q, C) logits.  ``protos`` is (C, d) shared or (Q, C, d) per query."""
    if protos.ndim == 2:
        protos_q = protos[None]
    else:
        protos_q = protos
    if kind == "euclidean":
        return -((queries[:, None, :] - protos_q) ** 2).sum(-1)
    if kind == "cosine":
        return cosine(queries[:, None, :], protos_q)
    if kind == "relation":
        if comparator is None:
            raise ValueError("relation scoring needs a comparator")
        return comparator(queries, protos)
    raise ValueError(f"unknown distance kind {kind!r}")


@dataclass
class ClassDistribution:
    logits: torch.Tensor
    probs: torch.Tensor


def score(queries: torch.Tensor, protos: torch.Tensor, kind: str,
          comparator: RelationComparator | None = None) -> ClassDistribution:
    """Softmax over logits; a single (d,) query gives (C,) outputs."""
    single = queries.ndim == 1
    q = queries[None] if single else queries
    z = logits(q, protos, kind, comparator)
    probs = torch.softmax(z, dim=-1)
    if single:
        return ClassDistribution(z[0], probs[0])
    return ClassDistribution(z, probs)


def predict(probs: torch.Tensor) -> torch.Tensor:
    """Argmax with ties going to the lowest index."""
    best = probs.max(dim=-1, keepdim=True).values
    hits = probs == best
    idx = torch.arange(probs.shape[-1]).expand_as(probs)
    return torch.where(hits, idx, torch.full_like(idx, probs.shape[-1])).min(dim=-1).values


@dataclass
class EpisodeOutput:
    logits: torch.Tensor          # (Q, N+1)
    support: torch.Tensor         # (N+1, K, d)
    queries: torch.Tensor         # (Q, d)
    mean_prototypes: torch.Tensor  # (N+1, d)


class FewShotModel(nn.Module):
    def __init__(self, family: str, vocab: Vocabulary, encoder_cfg: EncoderConfig,
                 position_dim: int = 50, max_len: int = 80, relation_hidden: int | None = None):
        super().__init__()
        if family not in FAMILIES:
            raise ValueError(f"unknown model family {family!r}; expected one of {sorted(FAMILIES)}")
        self.family = family
        self.prototype_mode, self.distance = FAMILIES[family]
        self.vocab = vocab
        self.max_len = max_len
        self.encoder_cfg = encoder_cfg
        self.embedder = InstanceEmbedder(vocab, position_dim, max_dist=max_len)
        self.encoder = build_encoder(self.embedder.dim, encoder_cfg)
        self.comparator = RelationComparator(encoder_cfg.out_dim, relation_hidden) if self.distance == "relation" else None

    @property
    def out_dim(self) -> int:
        return self.encoder_cfg.out_dim

    def encode(self, batch: MentionBatch) -> torch.Tensor:
        return self.encoder(self.embedder(batch), batch)

    def batch(self, mentions) -> MentionBatch:
        return make_batch(mentions, self.vocab, self.max_len, min_width=max(self.encoder_cfg.kernel_sizes))

    def prototypes(self, support: torch.Tensor, queries: torch.Tensor) -> torch.Tensor:
        if self.prototype_mode == "attention":
            return attention_prototypes(support, queries)
        return mean_prototypes(support)

    def forward(self, episode: Episode) -> EpisodeOutput:
        mentions = episode.support_mentions() + episode.query_mentions()
        vectors = self.encode(self.batch(mentions))
        n_cls, k = len(episode.support), episode.k_shot
        support = vectors[: n_cls * k].reshape(n_cls, k, -1)
        queries = vectors[n_cls * k:]
        protos = self.prototypes(support, queries)
        z = logits(queries, protos, self.distance, self.comparator)
        return EpisodeOutput(z, support, queries, mean_prototypes(support))


def build_model(family: str, vocab: Vocabulary, encoder_cfg: EncoderConfig, **kwargs) -> FewShotModel:
    return FewShotModel(family.lower(), vocab, encoder_cfg, **kwargs)
