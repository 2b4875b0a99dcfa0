from __future__ import annotations

from ..corpus import Corpus, CorpusSplit, load_corpus, split_corpus
from ..embedding import Vocabulary, load_pretrained_embeddings
from .checkpoint import Checkpoint
from .config import RunConfig
from .evaluate import EvalReport, Prediction, evaluate_model, tally
from .search import DEFAULT_GRID, CellKey, CellResult, experiment_matrix, grid_search
from .train import TrainingDiverged, TrainResult, read_metrics, train


def load_vocabulary(cfg: RunConfig, corpus: Corpus) -> Vocabulary:
    if cfg.embeddings:
        return load_pretrained_embeddings(cfg.embeddings, cfg.word_dim)
    words = (t.text for s in corpus.sentences for t in s.tokens)
    return Vocabulary.from_words(words, cfg.word_dim, seed=cfg.seed)


def prepare_run(cfg: RunConfig, corpus: Corpus | None = None) -> tuple[Corpus, CorpusSplit, Vocabulary]:
    """Load the configured corpus, split it, and build the vocabulary."""
    if corpus is None:
        if not cfg.corpus:
            raise ValueError("no corpus configured")
        corpus = load_corpus(cfg.corpus)
    split = split_corpus(corpus, cfg.train_parent_types, cfg.min_per_type, cfg.split_seed,
                         unit=cfg.split_unit, n_way=cfg.sampler.n_way)
    return corpus, split, load_vocabulary(cfg, corpus)


__all__ = [
    "Checkpoint", "RunConfig", "EvalReport", "Prediction", "evaluate_model", "tally", "DEFAULT_GRID",
    "CellKey", "CellResult", "experiment_matrix", "grid_search", "TrainingDiverged", "TrainResult",
    "read_metrics", "train", "load_vocabulary", "prepare_run",
]
