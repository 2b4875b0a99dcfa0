"""Single-file checkpoints: a zip holding a JSON manifest, the vocabulary, and an .npz of named tensors."""
from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field

import numpy as np
import torch

from ..classifier import FewShotModel, build_model
from ..embedding import Vocabulary
from .config import RunConfig

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    config: RunConfig
    state: dict[str, torch.Tensor]
    vocab_tokens: list[str]
    iteration: int = 0
    best_dev_f1: float = 0.0
    rng: dict = field(default_factory=dict)

    @classmethod
    def capture(cls, model: FewShotModel, config: RunConfig, iteration: int, best_dev_f1: float,
                rng: dict | None = None) -> "Checkpoint":
        state = {k: v.detach().clone() for k, v in model.state_dict().items()}
        return cls(config, state, list(model.vocab.tokens), iteration, best_dev_f1, dict(rng or {}))

    def build(self) -> FewShotModel:
        emb = self.state["embedder.words.weight"].double().numpy()
        vocab = Vocabulary(self.vocab_tokens, emb)
        cfg = self.config
        model = build_model(cfg.family, vocab, cfg.encoder, position_dim=cfg.position_dim, max_len=cfg.max_len)
        model = model.to(self.state["embedder.words.weight"].dtype)
        model.load_state_dict(self.state)
        model.eval()
        return model

    def save(self, path) -> None:
        tensors = {k: v.cpu().numpy() for k, v in self.state.items()}
        manifest = {
            "format_version": FORMAT_VERSION,
            "config": self.config.to_dict(),
            "iteration": self.iteration,
            "best_dev_f1": self.best_dev_f1,
            "rng": self.rng,
            "tensors": {k: {"shape": list(v.shape), "dtype": str(v.dtype)} for k, v in tensors.items()},
        }
        blob = io.BytesIO()
        np.savez(blob, **tensors)
        with zipfile.ZipFile(path, "w", zipfile.ZIP_DEFLATED) as zf:
            zf.writestr("manifest.json", json.dumps(manifest, indent=1))
            zf.writestr("vocab.txt", "\n".join(self.vocab_tokens))
            zf.writestr("params.npz", blob.getvalue())

    @classmethod
    def load(cls, path) -> "Checkpoint":
        with zipfile.ZipFile(path) as zf:
            manifest = json.loads(zf.read("manifest.json"))
            tokens = zf.read("vocab.txt").decode("utf-8").split("\n")
            arrays = np.load(io.BytesIO(zf.read("params.npz")))
            if manifest.get("format_version") != FORMAT_VERSION:
                raise ValueError(f"unsupported checkpoint format {manifest.get('format_version')}")
            state = {}
            for name, spec in manifest["tensors"].items():
                arr = arrays[name]
                if list(arr.shape) != spec["shape"]:
                    raise ValueError(f"tensor {name} has shape {arr.shape}, manifest says {spec['shape']}")
                state[name] = torch.from_numpy(arr.copy())
        return cls(RunConfig.from_dict(manifest["config"]), state, tokens, manifest["iteration"],
                   manifest["best_dev_f1"], manifest.get("rng", {}))
