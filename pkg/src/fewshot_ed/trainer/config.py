from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..classifier import FAMILIES
from ..corpus import ACE_TRAIN_PARENT_TYPES
from ..encoders import EncoderConfig
from ..losses import INTER_MODES, SCALING_MODES
from ..sampler import SamplerConfig

OPTIMIZERS = ("sgd", "adadelta")


@dataclass
class RunConfig:
    family: str = "proto"
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    beta: float = 0.0
    gamma: float = 0.0
    scaling: str = "pair_mean"
    inter_mode: str = "separation"
    aux_losses: bool = True
    aux_include_null: bool = True
    # None picks SGD, or AdaDelta for the relation family
    optimizer: str | None = None
    allow_sgd_relation: bool = False
    initial_lr: float = 0.03
    adadelta_lr: float = 1.0
    decay_every: int = 500
    decay_factor: float = 0.5
    iterations: int = 2500
    eval_every: int = 200
    eval_episodes: int = 500
    clip_norm: float | None = 5.0
    weight_decay: float = 0.0
    seed: int = 0
    eval_seed: int = 12345
    word_dim: int = 300
    position_dim: int = 50
    max_len: int = 80
    corpus: str | None = None
    embeddings: str | None = None
    train_parent_types: tuple[str, ...] = ACE_TRAIN_PARENT_TYPES
    min_per_type: int = 15
    split_seed: int = 0
    split_unit: str = "mention"

    def __post_init__(self):
        if isinstance(self.encoder, dict):
            self.encoder = EncoderConfig(**self.encoder)
        if isinstance(self.sampler, dict):
            self.sampler = SamplerConfig(**self.sampler)
        self.family = self.family.lower()
        self.train_parent_types = tuple(self.train_parent_types)
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.optimizer is not None:
            self.optimizer = self.optimizer.lower()
            if self.optimizer not in OPTIMIZERS:
                raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.scaling not in SCALING_MODES:
            raise ValueError(f"unknown scaling mode {self.scaling!r}")
        if self.inter_mode not in INTER_MODES:
            raise ValueError(f"unknown inter mode {self.inter_mode!r}")
        if self.beta < 0 or self.gamma < 0 or self.weight_decay < 0:
            raise ValueError("beta, gamma and weight_decay must be >= 0")
        if self.initial_lr <= 0 or self.adadelta_lr <= 0 or not 0 < self.decay_factor <= 1:
            raise ValueError("learning rates must be > 0 and decay_factor in (0, 1]")
        for name in ("decay_every", "eval_every", "eval_episodes", "word_dim", "position_dim", "max_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def resolved_optimizer(self) -> str:
        return self.optimizer or ("adadelta" if self.family == "relation" else "sgd")

    def lr_at(self, step: int) -> float:
        """Learning rate used for 0-based step ``step``."""
        base = self.adadelta_lr if self.resolved_optimizer() == "adadelta" else self.initial_lr
        return base * self.decay_factor ** (step // self.decay_every)
