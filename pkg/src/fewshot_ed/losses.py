"""Query NLL plus the two support-set regularisers and their weighted sum.

``separation`` inter-cluster mode is the default: the mean over prototype
pairs of (1 + cos) / 2, which falls as prototypes spread apart.  ``literal``
mode is ``1 - sum_{i<j} cos(c_i, c_j)`` as commonly written, which instead
rewards aligned prototypes; it is kept for comparison runs.
"""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .classifier import cosine

INTER_MODES = ("separation", "literal")
SCALING_MODES = ("pair_mean", "query_match")


def query_loss(logits: torch.Tensor, gold: torch.Tensor) -> torch.Tensor:
    """Mean negative log-likelihood of the gold class over the query batch."""
    return F.cross_entropy(logits, gold)


def _pairs(n: int) -> tuple[torch.Tensor, torch.Tensor]:
    return torch.triu_indices(n, n, offset=1).unbind(0)


def intra_loss(support: torch.Tensor, reduction: str = "mean") -> torch.Tensor:
    """Pairwise mse between same-class support vectors, (C, K, d) input.

    mse averages over dimensions; ``reduction="mean"`` divides the sum over all
    within-class pairs by their count.  K = 1 gives 0.
    """
    n_cls, k, _ = support.shape
    if k < 2:
        return support.sum() * 0.0
    i, j = _pairs(k)
    per_pair = ((support[:, i, :] - support[:, j, :]) ** 2).mean(-1)  # (C, pairs)
    total = per_pair.sum()
    if reduction == "sum":
        return total
    return total / per_pair.numel()


def pair_cosines(protos: torch.Tensor) -> torch.Tensor:
    i, j = _pairs(protos.shape[0])
    return cosine(protos[i], protos[j])


def inter_loss(protos: torch.Tensor, mode: str = "separation") -> torch.Tensor:
    """Prototype separation penalty over (C, d) prototypes; 0 for a single prototype."""
    if mode not in INTER_MODES:
        raise ValueError(f"unknown inter mode {mode!r}")
    if protos.shape[0] < 2:
        return protos.sum() * 0.0
    cos = pair_cosines(protos)
    if mode == "separation":
        return ((1.0 + cos) / 2.0).mean()
    return 1.0 - cos.sum()


def inter_loss_pair_mean(protos: torch.Tensor, mode: str = "separation") -> torch.Tensor:
    """Pair-count-normalised inter loss (literal mode becomes 1 - mean cos)."""
    if mode == "separation" or protos.shape[0] < 2:
        return inter_loss(protos, mode)
    return 1.0 - pair_cosines(protos).mean()


@dataclass
class LossBreakdown:
    query: torch.Tensor
    intra: torch.Tensor
    inter: torch.Tensor
    intra_scaled: torch.Tensor
    inter_scaled: torch.Tensor
    total: torch.Tensor
    beta: float
    gamma: float

    def as_floats(self) -> dict[str, float]:
        names = ("total", "query", "intra", "inter", "intra_scaled", "inter_scaled")
        return {f"loss_{n}": getattr(self, n).detach().item() for n in names}


def _scale(aux: torch.Tensor, query: torch.Tensor, mode: str) -> torch.Tensor:
    if mode == "pair_mean":
        return aux
    if mode == "query_match":
        ratio = (query / aux).detach() if aux.detach().item() != 0.0 else torch.zeros_like(aux)
        return aux * ratio
    raise ValueError(f"unknown scaling mode {mode!r}")


def combine(query: torch.Tensor, intra: torch.Tensor, inter: torch.Tensor,
            beta: float, gamma: float, scaling: str = "pair_mean") -> LossBreakdown:
    """total = query + beta * intra_scaled + gamma * inter_scaled.

    ``intra`` must already be pair-mean reduced.  Under ``pair_mean`` scaling
    the literal inter loss is renormalised per pair; ``inter`` is reported raw.
    A term whose coefficient is 0 is detached so it contributes no gradient at
    all, which keeps beta = gamma = 0 step-identical to training without it.
    The sum is formed in float64 so logged terms recompose to the total.
    """
    if beta < 0 or gamma < 0:
        raise ValueError("beta and gamma must be non-negative")
    intra_scaled = _scale(intra, query, scaling)
    inter_scaled = _scale(inter, query, scaling)
    if beta == 0:
        intra_scaled = intra_scaled.detach()
    if gamma == 0:
        inter_scaled = inter_scaled.detach()
    total = query.double()
    if beta != 0:
        total = total + beta * intra_scaled.double()
    if gamma != 0:
        total = total + gamma * inter_scaled.double()
    return LossBreakdown(query, intra, inter, intra_scaled, inter_scaled, total, beta, gamma)


def episode_losses(logits: torch.Tensor, gold: torch.Tensor, support: torch.Tensor, protos: torch.Tensor,
                   beta: float, gamma: float, scaling: str = "pair_mean", inter_mode: str = "separation",
                   include_null: bool = True) -> LossBreakdown:
    """All three terms for one episode; the NULL cluster is the last class."""
    if not include_null:
        support, protos = support[:-1], protos[:-1]
    q = query_loss(logits, gold)
    intra = intra_loss(support)
    inter_raw = inter_loss(protos, inter_mode)
    inter_for_scaling = inter_loss_pair_mean(protos, inter_mode) if scaling == "pair_mean" else inter_raw
    out = combine(q, intra, inter_for_scaling, beta, gamma, scaling)
    out.inter = inter_raw
    return out
