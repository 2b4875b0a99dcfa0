from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import torch

from ..classifier import FewShotModel, build_model
from ..corpus import CorpusSplit
from ..embedding import Vocabulary
from ..losses import episode_losses, query_loss
from ..sampler import episode_stream
from .checkpoint import Checkpoint
from .config import RunConfig
from .evaluate import EvalReport, evaluate_model

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ["iteration", "lr", "loss_total", "loss_query", "loss_intra", "loss_inter",
                  "dev_P", "dev_R", "dev_F1", "loss_intra_scaled", "loss_inter_scaled", "best_dev_F1"]


class TrainingDiverged(RuntimeError):
    def __init__(self, iteration: int, lr: float, loss: float):
        super().__init__(f"non-finite loss {loss} at iteration {iteration} (lr={lr})")
        self.iteration = iteration
        self.lr = lr


@dataclass
class TrainResult:
    best: Checkpoint
    last: Checkpoint
    log: list[dict] = field(default_factory=list)
    dev_reports: list[tuple[int, EvalReport]] = field(default_factory=list)

    @property
    def best_dev_f1(self) -> float:
        return self.best.best_dev_f1


def make_optimizer(cfg: RunConfig, params) -> torch.optim.Optimizer:
    name = effective_config(cfg).resolved_optimizer()
    if name == "adadelta":
        return torch.optim.Adadelta(params, lr=cfg.lr_at(0), rho=0.95, eps=1e-6, weight_decay=cfg.weight_decay)
    return torch.optim.SGD(params, lr=cfg.lr_at(0), momentum=0.0, weight_decay=cfg.weight_decay)


def effective_config(cfg: RunConfig) -> RunConfig:
    """Apply the relation-family optimizer override."""
    if cfg.family == "relation" and cfg.resolved_optimizer() == "sgd" and not cfg.allow_sgd_relation:
        logger.warning("SGD rarely converges for the relation family; using AdaDelta "
                       "(set allow_sgd_relation to override)")
        return cfg.replace(optimizer="adadelta")
    return cfg


def init_model(cfg: RunConfig, vocab: Vocabulary, dtype=torch.float32) -> FewShotModel:
    torch.manual_seed(cfg.seed)
    model = build_model(cfg.family, vocab, cfg.encoder, position_dim=cfg.position_dim, max_len=cfg.max_len)
    return model.to(dtype)


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def write_metrics(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (row[k] if k == "iteration" else _fmt(row.get(k))) for k in METRIC_COLUMNS})


def read_metrics(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [{k: (int(v) if k == "iteration" else (float(v) if v else None)) for k, v in row.items()}
                for row in csv.DictReader(fh)]


def train(cfg: RunConfig, split: CorpusSplit, vocab: Vocabulary, out_dir=None,
          dtype=torch.float32) -> TrainResult:
    """Episodic training with periodic dev evaluation and best-checkpoint retention.

    When ``out_dir`` is given, ``metrics.csv`` and ``checkpoints/{best,last}.ckpt``
    are written there.
    """
    cfg = effective_config(cfg)
    model = init_model(cfg, vocab, dtype)
    optimizer = make_optimizer(cfg, model.parameters())
    sampler = dataclasses.replace(cfg.sampler, seed=cfg.seed)
    stream = episode_stream(split.side("train"), sampler, cfg.iterations)
    dev = split.side("dev")

    rows, reports = [], []
    best_f1 = -1.0
    best = Checkpoint.capture(model, cfg, 0, 0.0)
    model.train()
    for step, episode in enumerate(stream):
        iteration = step + 1
        lr = cfg.lr_at(step)
        for group in optimizer.param_groups:
            group["lr"] = lr
        out = model(episode)
        gold = torch.tensor(episode.query_labels())
        if cfg.aux_losses:
            losses = episode_losses(out.logits, gold, out.support, out.mean_prototypes, cfg.beta, cfg.gamma,
                                    cfg.scaling, cfg.inter_mode, cfg.aux_include_null)
            row = losses.as_floats()
            total = losses.total
        else:
            q = query_loss(out.logits, gold)
            total = q.double()
            row = {"loss_total": total.item(), "loss_query": q.item(), "loss_intra": 0.0, "loss_inter": 0.0,
                   "loss_intra_scaled": 0.0, "loss_inter_scaled": 0.0}
        if not math.isfinite(row["loss_total"]):
            raise TrainingDiverged(iteration, lr, row["loss_total"])
        optimizer.zero_grad()
        total.backward()
        if cfg.clip_norm:
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.clip_norm)
        optimizer.step()
        row.update(iteration=iteration, lr=lr)

        if iteration % cfg.eval_every == 0 or iteration == cfg.iterations:
            report = evaluate_model(model, dev, sampler, cfg.eval_episodes, cfg.eval_seed)
            reports.append((iteration, report))
            if report.micro_f1 > best_f1:
                best_f1 = report.micro_f1
                best = Checkpoint.capture(model, cfg, iteration, best_f1,
                                          {"torch": torch.get_rng_state().tolist(),
                                           "sampler": stream.rng.bit_generator.state})
            row.update(dev_P=report.micro_p, dev_R=report.micro_r, dev_F1=report.micro_f1)
            logger.info("iter %d lr %.4g loss %.4f dev F1 %.4f (best %.4f)", iteration, lr,
                        row["loss_total"], report.micro_f1, best_f1)
        row["best_dev_F1"] = max(best_f1, 0.0) if reports else None
        rows.append(row)

    last = Checkpoint.capture(model, cfg, cfg.iterations, max(best_f1, 0.0))
    if not reports:
        best = last
    result = TrainResult(best, last, rows, reports)
    if out_dir is not None:
        out = Path(out_dir)
        (out / "checkpoints").mkdir(parents=True, exist_ok=True)
        write_metrics(rows, out / "metrics.csv")
        best.save(out / "checkpoints" / "best.ckpt")
        last.save(out / "checkpoints" / "last.ckpt")
    return result
