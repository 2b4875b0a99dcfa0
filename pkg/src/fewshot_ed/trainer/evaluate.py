"""Episodic micro-averaged precision / recall / F1 over positive event types.

A query counts as a positive prediction when its predicted class is not NULL.
A positive-gold query predicted as a different positive class is both a false
positive and a false negative.  NULL is never tallied as a class.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import torch

from ..classifier import FewShotModel, predict
from ..corpus import NULL_LABEL, SplitSide
from ..sampler import SamplerConfig, episode_stream


@dataclass(frozen=True)
class Prediction:
    gold: str
    predicted: str


@dataclass
class EvalReport:
    micro_p: float
    micro_r: float
    micro_f1: float
    true_pos: int
    false_pos: int
    false_neg: int
    per_class: dict[str, dict[str, int]]
    episodes: int
    predictions: list[Prediction] = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {"P": self.micro_p, "R": self.micro_r, "F1": self.micro_f1, "tp": self.true_pos,
                "fp": self.false_pos, "fn": self.false_neg, "episodes": self.episodes}

    def format(self) -> str:
        lines = [f"episodes={self.episodes}  P={self.micro_p:.4f}  R={self.micro_r:.4f}  F1={self.micro_f1:.4f}"
                 f"  (tp={self.true_pos} fp={self.false_pos} fn={self.false_neg})"]
        for name, c in sorted(self.per_class.items()):
            lines.append(f"  {name:<30} tp={c['tp']:<5} fp={c['fp']:<5} fn={c['fn']}")
        return "\n".join(lines)


def prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def tally(predictions: list[Prediction], episodes: int = 0) -> EvalReport:
    per_class = defaultdict(lambda: {"tp": 0, "fp": 0, "fn": 0})
    for pr in predictions:
        gold_pos = pr.gold != NULL_LABEL
        pred_pos = pr.predicted != NULL_LABEL
        if gold_pos and pr.predicted == pr.gold:
            per_class[pr.gold]["tp"] += 1
            continue
        if pred_pos:
            per_class[pr.predicted]["fp"] += 1
        if gold_pos:
            per_class[pr.gold]["fn"] += 1
    tp = sum(c["tp"] for c in per_class.values())
    fp = sum(c["fp"] for c in per_class.values())
    fn = sum(c["fn"] for c in per_class.values())
    p, r, f = prf(tp, fp, fn)
    return EvalReport(p, r, f, tp, fp, fn, dict(per_class), episodes, list(predictions))


@torch.no_grad()
def evaluate_model(model: FewShotModel, side: SplitSide, sampler: SamplerConfig,
                   episodes: int, seed: int) -> EvalReport:
    was_training = model.training
    model.eval()
    cfg = SamplerConfig(sampler.n_way, sampler.k_shot, sampler.queries_per_class,
                        max(sampler.train_class_pool_size, sampler.n_way), seed)
    predictions = []
    try:
        for episode in episode_stream(side, cfg, episodes, use_class_pool=False):
            out = model(episode)
            pred = predict(torch.softmax(out.logits, dim=-1)).tolist()
            for (_, gold), p in zip(episode.queries, pred):
                predictions.append(Prediction(episode.class_map[gold].name, episode.class_map[p].name))
    finally:
        model.train(was_training)
    return tally(predictions, episodes)
