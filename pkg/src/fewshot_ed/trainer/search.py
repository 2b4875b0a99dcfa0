"""(beta, gamma) grid search and the family x encoder x setting x loss experiment matrix."""
from __future__ import annotations

import dataclasses
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from ..corpus import CorpusSplit
from ..embedding import Vocabulary
from .config import RunConfig
from .evaluate import EvalReport, evaluate_model
from .train import train

logger = logging.getLogger(__name__)

DEFAULT_GRID = tuple(itertools.product((0.0, 0.1, 0.2, 0.3), repeat=2))

LOSS_VARIANTS = ("original", "inter", "intra", "both")
LOSS_TITLES = {"original": "Original", "inter": "+Inter", "intra": "+Intra", "both": "+Intra+Inter"}


@dataclass
class GridRow:
    beta: float
    gamma: float
    dev_f1: float


@dataclass
class GridResult:
    rows: list[GridRow]
    best_beta: float
    best_gamma: float
    test: EvalReport | None

    @property
    def best(self) -> GridRow:
        return next(r for r in self.rows if (r.beta, r.gamma) == (self.best_beta, self.best_gamma))


def select_best(rows: list[GridRow]) -> GridRow:
    """Highest dev F1; ties go to the smaller beta, then the smaller gamma."""
    return min(rows, key=lambda r: (-r.dev_f1, r.beta, r.gamma))


def grid_search(base: RunConfig, grid, split: CorpusSplit, vocab: Vocabulary, out_dir=None,
                test_episodes: int | None = None) -> GridResult:
    grid = [(float(b), float(g)) for b, g in grid]
    if not grid:
        raise ValueError("empty (beta, gamma) grid")
    rows, runs = [], {}
    for beta, gamma in grid:
        cfg = base.replace(beta=beta, gamma=gamma)
        cell_dir = None if out_dir is None else Path(out_dir) / f"beta{beta:g}_gamma{gamma:g}"
        result = train(cfg, split, vocab, cell_dir)
        rows.append(GridRow(beta, gamma, result.best_dev_f1))
        runs[beta, gamma] = result
        logger.info("grid beta=%g gamma=%g -> dev F1 %.4f", beta, gamma, result.best_dev_f1)
    winner = select_best(rows)
    model = runs[winner.beta, winner.gamma].best.build()
    test = evaluate_model(model, split.side("test"), base.sampler, test_episodes or base.eval_episodes,
                          base.eval_seed)
    return GridResult(rows, winner.beta, winner.gamma, test)


def parse_setting(text: str) -> tuple[int, int]:
    """'5x5', '5+1x5' or '5+1-way 5-shot' -> (N, K)."""
    t = text.lower().replace("-way", "").replace("-shot", "").replace("+1", "").replace(" ", "x")
    n, k = [int(x) for x in t.split("x") if x]
    return n, k


def setting_title(n: int, k: int) -> str:
    return f"{n}+1-way {k}-shot"


def loss_coefficients(variant: str, beta: float, gamma: float) -> tuple[float, float]:
    return {"original": (0.0, 0.0), "inter": (0.0, gamma), "intra": (beta, 0.0), "both": (beta, gamma)}[variant]


@dataclass(frozen=True)
class CellKey:
    family: str
    encoder: str
    setting: tuple[int, int]
    loss: str


@dataclass
class CellResult:
    key: CellKey
    dev_f1: float
    test_f1: float


def cell_config(base: RunConfig, key: CellKey, beta: float, gamma: float) -> RunConfig:
    b, g = loss_coefficients(key.loss, beta, gamma)
    n, k = key.setting
    sampler = dataclasses.replace(base.sampler, n_way=n, k_shot=k,
                                  train_class_pool_size=max(base.sampler.train_class_pool_size, n))
    encoder = dataclasses.replace(base.encoder, kind=key.encoder)
    return base.replace(family=key.family, encoder=encoder, sampler=sampler, beta=b, gamma=g)


def run_cell(base: RunConfig, key: CellKey, split: CorpusSplit, vocab: Vocabulary,
             beta: float, gamma: float, out_dir=None) -> CellResult:
    cfg = cell_config(base, key, beta, gamma)
    result = train(cfg, split, vocab, out_dir)
    model = result.best.build()
    test = evaluate_model(model, split.side("test"), cfg.sampler, cfg.eval_episodes, cfg.eval_seed)
    logger.info("cell %s: dev F1 %.4f test F1 %.4f", key, result.best_dev_f1, test.micro_f1)
    return CellResult(key, result.best_dev_f1, test.micro_f1)


def _run_cell_args(args):
    return run_cell(*args)


def experiment_matrix(base: RunConfig, split: CorpusSplit, vocab: Vocabulary, families, encoders,
                      settings=((5, 5),), losses=LOSS_VARIANTS, beta: float = 0.1, gamma: float = 0.1,
                      out_dir=None, workers: int = 1) -> list[CellResult]:
    """Train and evaluate every cell of the cross product; one worker process per cell if ``workers`` > 1."""
    keys = [CellKey(f, e, tuple(s), l) for f in families for e in encoders for s in settings for l in losses]
    jobs = []
    for key in keys:
        cell_dir = None
        if out_dir is not None:
            n, k = key.setting
            cell_dir = Path(out_dir) / f"{key.family}_{key.encoder}_{n}x{k}_{key.loss}"
        jobs.append((base, key, split, vocab, beta, gamma, cell_dir))
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_run_cell_args, jobs))
    return [_run_cell_args(job) for job in jobs]
