import json

import numpy as np
import pytest
import torch

from fewshot_ed.corpus import load_corpus, split_corpus
from fewshot_ed.embedding import Vocabulary
from fewshot_ed.synthetic import SyntheticSpec, write_synthetic


def finite_difference_check(fn, tensors, step=1e-3, floor=1e-8):
    """Largest per-tensor relative error between autograd and central differences.

    ``fn`` maps nothing to a scalar and reads ``tensors`` (float64 leaves) in place.
    Relative error of a tensor is ||g_auto - g_fd|| / max(||g_auto||, ||g_fd||, floor);
    the floor only matters for gradients that are identically zero (e.g. a bias
    feeding a shift-invariant softmax), where both sides are pure roundoff.
    """
    tensors = list(tensors)
    for t in tensors:
        t.grad = None
    loss = fn()
    auto = torch.autograd.grad(loss, tensors, allow_unused=True)
    worst = 0.0
    for t, a in zip(tensors, auto):
        a = torch.zeros_like(t) if a is None else a
        numeric = torch.zeros_like(t)
        flat, nflat = t.data.view(-1), numeric.view(-1)
        for i in range(flat.numel()):
            orig = flat[i].item()
            flat[i] = orig + step
            with torch.no_grad():
                up = fn().item()
            flat[i] = orig - step
            with torch.no_grad():
                down = fn().item()
            flat[i] = orig
            nflat[i] = (up - down) / (2 * step)
        denom = max(a.norm().item(), numeric.norm().item(), floor)
        worst = max(worst, (a - numeric).norm().item() / denom)
    return worst


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r) + "\n")
    return path


def chain_heads(n):
    return [-1] + list(range(n - 1))


def toy_record(doc, sent, words, events=(), heads=None):
    return {
        "docId": doc,
        "sentId": sent,
        "tokens": list(words),
        "depHeads": heads if heads is not None else chain_heads(len(words)),
        "depLabels": ["dep"] * len(words),
        "events": [dict(anchor=a, type=t, parentType=p) for a, t, p in events],
    }


def counted_corpus(tmp_path, counts, seed=0, length=6):
    """Corpus with ``counts[(type, parent)]`` single-trigger sentences each."""
    rng = np.random.default_rng(seed)
    records = []
    i = 0
    for (etype, parent), n in counts.items():
        for _ in range(n):
            words = [f"w{rng.integers(50)}" for _ in range(length)]
            anchor = int(rng.integers(length))
            words[anchor] = etype.lower()
            records.append(toy_record(f"d{i // 3}", f"s{i}", words, [(anchor, etype, parent)]))
            i += 1
    return load_corpus(write_jsonl(tmp_path / "corpus.jsonl", records))


@pytest.fixture(scope="session")
def small_synthetic(tmp_path_factory):
    """Small separable corpus: 6 parents x 2 subtypes, 40-dim embeddings."""
    out = tmp_path_factory.mktemp("synth_small")
    spec = SyntheticSpec(num_types=6, subtypes_per_type=2, mentions_per_type=40, embedding_dim=40,
                         filler_vocab=80, min_length=5, max_length=12, seed=3)
    corpus_path, emb_path = write_synthetic(spec, out)
    return spec, corpus_path, emb_path


@pytest.fixture(scope="session")
def small_split(small_synthetic):
    spec, corpus_path, _ = small_synthetic
    corpus = load_corpus(corpus_path)
    return corpus, split_corpus(corpus, spec.train_parent_types, 15, seed=1)


@pytest.fixture
def tiny_vocab():
    rng = np.random.default_rng(0)
    words = [f"w{i}" for i in range(50)]
    vectors = rng.normal(size=(len(words) + 2, 4))
    vectors[0] = 0
    return Vocabulary(["<pad>", "<unk>"] + words, vectors)


# criterion number -> (passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
