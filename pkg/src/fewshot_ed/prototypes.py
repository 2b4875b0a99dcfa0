"""Class prototypes from support vectors: plain mean, or query-conditioned attention."""
from __future__ import annotations

from typing import Sequence, Union

import torch

Support = Union[torch.Tensor, Sequence[torch.Tensor]]


class PrototypeError(ValueError):
    pass


def _clusters(support: Support) -> list[torch.Tensor]:
    clusters = list(support)
    for i, c in enumerate(clusters):
        if c.ndim != 2 or c.shape[0] == 0:
            raise PrototypeError(f"class {i} has no support vectors")
    return clusters


def mean_prototypes(support: Support) -> torch.Tensor:
    """(C, d) matrix of per-class means.  ``support`` is (C, K, d) or a list of (K_i, d)."""
    if isinstance(support, torch.Tensor) and support.ndim == 3 and support.shape[1] > 0:
        return support.mean(dim=1)
    return torch.stack([c.mean(dim=0) for c in _clusters(support)])


def attention_weights(support: torch.Tensor, queries: torch.Tensor) -> torch.Tensor:
    """alpha[q, i, j] = softmax_j(sum_dims sigmoid(v_ij * q)), shape (Q, C, K)."""
    scores = torch.sigmoid(support[None, :, :, :] * queries[:, None, None, :]).sum(dim=-1)
    return torch.softmax(scores, dim=-1)


def attention_prototypes(support: Support, queries: torch.Tensor) -> torch.Tensor:
    """Query-dependent prototypes, shape (Q, C, d).

    ``queries`` may be a single (d,) vector, giving (C, d).
    """
    single = queries.ndim == 1
    if single:
        queries = queries[None]
    if isinstance(support, torch.Tensor):
        if support.shape[1] == 0:
            raise PrototypeError("empty support class")
        alpha = attention_weights(support, queries)
        protos = torch.einsum("qck,ckd->qcd", alpha, support)
    else:
        parts = []
        for c in _clusters(support):
            alpha = attention_weights(c[None], queries)[:, 0]  # (Q, K_i)
            parts.append(alpha @ c)
        protos = torch.stack(parts, dim=1)
    return protos[0] if single else protos
