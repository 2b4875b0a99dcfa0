"""Sentence encoders mapping (E(s), anchor) to a single instance vector."""
from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .embedding import MentionBatch

ENCODER_KINDS = ("cnn", "lstm", "gcn")

_ACTIVATIONS = {"relu": nn.ReLU, "tanh": nn.Tanh, "sigmoid": nn.Sigmoid}


@dataclass
class EncoderConfig:
    kind: str = "cnn"
    output_dim: int = 300
    kernel_sizes: tuple[int, ...] = (2, 3, 4, 5)
    filters_per_size: int = 150
    local_window: int = 2
    dense_layers: int = 1
    lstm_hidden: int = 150
    gcn_layers: int = 2
    gcn_hidden: int = 300
    activation: str = "relu"
    dropout: float = 0.5

    def __post_init__(self):
        self.kind = self.kind.lower()
        self.kernel_sizes = tuple(self.kernel_sizes)
        if self.kind not in ENCODER_KINDS:
            raise ValueError(f"unknown encoder kind {self.kind!r}; expected one of {ENCODER_KINDS}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        sizes = [self.output_dim, self.filters_per_size, self.lstm_hidden, self.gcn_layers,
                 self.gcn_hidden, self.dense_layers, *self.kernel_sizes]
        if min(sizes) < 1 or self.local_window < 0 or not self.kernel_sizes:
            raise ValueError(f"encoder sizes must be positive: {self}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1): {self.dropout}")

    @property
    def out_dim(self) -> int:
        if self.kind == "lstm":
            return 2 * self.lstm_hidden
        if self.kind == "gcn":
            return self.gcn_hidden
        return self.output_dim


class CNNEncoder(nn.Module):
    """Multi-width convolution with masked max pooling plus the anchor's local window.

    ``v = act(W [pooled, e[a-w .. a+w]])``
    """

    def __init__(self, input_dim: int, cfg: EncoderConfig):
        super().__init__()
        self.kernel_sizes = cfg.kernel_sizes
        self.window = cfg.local_window
        self.convs = nn.ModuleList(nn.Conv1d(input_dim, cfg.filters_per_size, k) for k in cfg.kernel_sizes)
        in_dim = cfg.filters_per_size * len(cfg.kernel_sizes) + (2 * cfg.local_window + 1) * input_dim
        layers = []
        for _ in range(cfg.dense_layers):
            layers += [nn.Linear(in_dim, cfg.output_dim), _ACTIVATIONS[cfg.activation]()]
            in_dim = cfg.output_dim
        self.dense = nn.Sequential(*layers)
        self.dropout = nn.Dropout(cfg.dropout)

    def pooled(self, emb: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        width = max(emb.shape[1], max(self.kernel_sizes))
        x = F.pad(emb, (0, 0, 0, width - emb.shape[1])).transpose(1, 2)
        feats = []
        for k, conv in zip(self.kernel_sizes, self.convs):
            maps = conv(x)  # (B, filters, width - k + 1)
            starts = torch.arange(maps.shape[-1])
            # a window is valid if it starts inside the sentence and is not a pure-PAD tail
            valid = starts[None, :] <= (lengths[:, None] - k).clamp(min=0)
            maps = maps.masked_fill(~valid[:, None, :], float("-inf"))
            feats.append(maps.max(dim=-1).values)
        return torch.cat(feats, dim=-1)

    def local(self, emb: torch.Tensor, anchors: torch.Tensor) -> torch.Tensor:
        w = self.window
        padded = F.pad(emb, (0, 0, w, w))
        idx = anchors[:, None] + torch.arange(2 * w + 1)[None, :]  # offsets into padded rows
        rows = padded.gather(1, idx[..., None].expand(-1, -1, emb.shape[-1]))
        return rows.flatten(1)

    def forward(self, emb: torch.Tensor, batch: MentionBatch) -> torch.Tensor:
        feats = torch.cat([self.pooled(emb, batch.lengths), self.local(emb, batch.anchors)], dim=-1)
        return self.dropout(self.dense(feats))


def reverse_padded(x: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
    """Reverse each row's first ``lengths[b]`` steps, leaving padding in place."""
    steps = torch.arange(x.shape[1])[None, :]
    idx = torch.where(steps < lengths[:, None], lengths[:, None] - 1 - steps, steps)
    return x.gather(1, idx[..., None].expand(-1, -1, x.shape[-1]))


class LSTMEncoder(nn.Module):
    """Two independent LSTMs (forward, backward); output is both states at the anchor."""

    def __init__(self, input_dim: int, cfg: EncoderConfig):
        super().__init__()
        self.forward_lstm = nn.LSTM(input_dim, cfg.lstm_hidden, batch_first=True)
        self.backward_lstm = nn.LSTM(input_dim, cfg.lstm_hidden, batch_first=True)
        self.dropout = nn.Dropout(cfg.dropout)

    @staticmethod
    def _run(lstm: nn.LSTM, x: torch.Tensor, lengths: torch.Tensor) -> torch.Tensor:
        packed = pack_padded_sequence(x, lengths.cpu(), batch_first=True, enforce_sorted=False)
        out, _ = lstm(packed)
        out, _ = pad_packed_sequence(out, batch_first=True, total_length=x.shape[1])
        return out

    def forward(self, emb: torch.Tensor, batch: MentionBatch) -> torch.Tensor:
        lengths = batch.lengths
        h_fwd = self._run(self.forward_lstm, emb, lengths)
        h_bwd = reverse_padded(self._run(self.backward_lstm, reverse_padded(emb, lengths), lengths), lengths)
        at = torch.arange(emb.shape[0])
        v = torch.cat([h_fwd[at, batch.anchors], h_bwd[at, batch.anchors]], dim=-1)
        return self.dropout(v)


def normalized_adjacency(heads: torch.Tensor, dtype=torch.get_default_dtype()) -> torch.Tensor:
    """Symmetric-normalised undirected adjacency with self loops, D^-1/2 (A + I) D^-1/2.

    ``heads`` is (B, L) with -1 for roots and -2 for PAD; PAD nodes get zero rows
    and columns.
    """
    bsz, n = heads.shape
    valid = heads > -2
    adj = torch.zeros(bsz, n, n, dtype=dtype)
    b_idx, child = torch.nonzero(heads >= 0, as_tuple=True)
    parent = heads[b_idx, child]
    adj[b_idx, child, parent] = 1.0
    adj[b_idx, parent, child] = 1.0
    adj = adj + torch.diag_embed(valid.to(dtype))
    deg = adj.sum(-1)
    inv_sqrt = torch.where(deg > 0, deg.clamp(min=1e-12).rsqrt(), torch.zeros_like(deg))
    return inv_sqrt[:, :, None] * adj * inv_sqrt[:, None, :]


class GCNEncoder(nn.Module):
    """Stacked graph convolutions over the undirected dependency graph; output is the anchor node."""

    def __init__(self, input_dim: int, cfg: EncoderConfig):
        super().__init__()
        dims = [input_dim] + [cfg.gcn_hidden] * cfg.gcn_layers
        self.layers = nn.ModuleList(nn.Linear(a, b, bias=False) for a, b in zip(dims, dims[1:]))
        self.act = _ACTIVATIONS[cfg.activation]()
        self.dropout = nn.Dropout(cfg.dropout)

    def forward(self, emb: torch.Tensor, batch: MentionBatch) -> torch.Tensor:
        adj = normalized_adjacency(batch.heads, emb.dtype)
        h = emb
        for layer in self.layers:
            h = self.act(adj @ layer(h))
        return self.dropout(h[torch.arange(h.shape[0]), batch.anchors])


def build_encoder(input_dim: int, cfg: EncoderConfig) -> nn.Module:
    return {"cnn": CNNEncoder, "lstm": LSTMEncoder, "gcn": GCNEncoder}[cfg.kind](input_dim, cfg)
