"""Command-line driver.

Exit status: 0 on success, 1 for usage or validation errors, 2 for runtime failures.
Output goes to ``--out``, defaulting to ``$FEWSHOT_ED_OUT/<command>`` (``runs/<command>``).
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

from .corpus import load_corpus, split_corpus, write_manifest
from .sampler import SamplingError, sample_episode
from .synthetic import SyntheticSpec, write_synthetic
from .trainer import (DEFAULT_GRID, Checkpoint, RunConfig, TrainingDiverged, evaluate_model, experiment_matrix,
                      grid_search, prepare_run, train)
from .trainer.report import matrix_table, standard_tables
from .trainer.search import LOSS_VARIANTS, parse_setting

logger = logging.getLogger("fewshot_ed")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _csv(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


# flag -> dotted RunConfig path
OVERRIDES = {
    "family": "family", "encoder": "encoder.kind", "seed": "seed", "iterations": "iterations",
    "beta": "beta", "gamma": "gamma", "n_way": "sampler.n_way", "k_shot": "sampler.k_shot",
    "eval_every": "eval_every", "eval_episodes": "eval_episodes", "corpus": "corpus",
    "embeddings": "embeddings", "optimizer": "optimizer", "inter_mode": "inter_mode", "scaling": "scaling",
}


def resolve_config(args) -> RunConfig:
    data = RunConfig().to_dict()
    if getattr(args, "config", None):
        data = _merge(data, json.loads(Path(args.config).read_text(encoding="utf-8")))
    for flag, path in OVERRIDES.items():
        value = getattr(args, flag, None)
        if value is not None:
            _assign(data, path, value)
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        _assign(data, key, _parse_value(value))
    if getattr(args, "train_parents", None):
        data["train_parent_types"] = _csv(args.train_parents)
    return RunConfig.from_dict(data)


def _merge(base: dict, update: dict) -> dict:
    out = dict(base)
    for k, v in update.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _assign(data: dict, path: str, value) -> None:
    *parents, leaf = path.split(".")
    node = data
    for p in parents:
        if p not in node or not isinstance(node[p], dict):
            raise UsageError(f"unknown config key {path!r}")
        node = node[p]
    if leaf not in node:
        raise UsageError(f"unknown config key {path!r}")
    node[leaf] = value


def _out_dir(args, command: str) -> Path:
    if getattr(args, "out", None):
        out = Path(args.out)
    else:
        out = Path(os.environ.get("FEWSHOT_ED_OUT", "runs")) / command
    out.mkdir(parents=True, exist_ok=True)
    return out


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with RunConfig fields")
    p.add_argument("--out", help="output directory")
    p.add_argument("--family", choices=["matching", "proto", "proto_att", "relation"])
    p.add_argument("--encoder", choices=["cnn", "lstm", "gcn"])
    p.add_argument("--seed", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--n-way", type=int)
    p.add_argument("--k-shot", type=int)
    p.add_argument("--eval-every", type=int)
    p.add_argument("--eval-episodes", type=int)
    p.add_argument("--corpus")
    p.add_argument("--embeddings")
    p.add_argument("--optimizer", choices=["sgd", "adadelta"])
    p.add_argument("--inter-mode", choices=["separation", "literal"])
    p.add_argument("--scaling", choices=["pair_mean", "query_match"])
    p.add_argument("--train-parents", help="comma-separated parent types used for training")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config field, dotted for nested (e.g. encoder.dropout=0.2)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fewshot-ed", description="Few-shot event detection toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("synth", help="generate a synthetic corpus and embedding file")
    p.add_argument("--out")
    for f in dataclasses.fields(SyntheticSpec):
        if f.name in ("parent_names", "trigger_placement"):
            continue
        p.add_argument("--" + f.name.replace("_", "-"), type=float if f.type == "float" else int)
    p.add_argument("--trigger-placement", choices=["uniform", "center", "start"])
    p.add_argument("--parent-names", help="comma-separated parent type names")

    p = sub.add_parser("prepare-data", help="load, validate and split a corpus")
    _add_run_flags(p)
    p.add_argument("--unit", choices=["mention", "document"])

    p = sub.add_parser("train", help="train one model")
    _add_run_flags(p)

    p = sub.add_parser("evaluate", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=["dev", "test"], default="test")
    p.add_argument("--episodes", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--corpus")
    p.add_argument("--out")

    p = sub.add_parser("grid-search", help="search (beta, gamma)")
    _add_run_flags(p)
    p.add_argument("--grid-values", help="comma-separated values; the grid is their square")

    p = sub.add_parser("matrix", help="run the family x encoder x setting x loss matrix")
    _add_run_flags(p)
    p.add_argument("--families", default="proto,proto_att")
    p.add_argument("--encoders", default="cnn,lstm,gcn")
    p.add_argument("--settings", default="5x5", help="comma-separated NxK, e.g. 5x5,10x10")
    p.add_argument("--losses", default=",".join(LOSS_VARIANTS))
    p.add_argument("--aux-beta", type=float, default=0.1)
    p.add_argument("--aux-gamma", type=float, default=0.1)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("inspect-episode", help="print one sampled episode as JSON")
    _add_run_flags(p)
    p.add_argument("--split", choices=["train", "dev", "test"], default="train")
    return parser


def cmd_synth(args) -> int:
    kwargs = {}
    for f in dataclasses.fields(SyntheticSpec):
        value = getattr(args, f.name, None)
        if value is not None:
            kwargs[f.name] = _csv(value) if f.name == "parent_names" else value
    if "parent_names" in kwargs:
        kwargs.setdefault("num_types", len(kwargs["parent_names"]))
    spec = SyntheticSpec(**kwargs)
    out = _out_dir(args, "synth")
    corpus, emb = write_synthetic(spec, out)
    cfg = RunConfig(corpus=str(corpus), embeddings=str(emb), word_dim=spec.embedding_dim,
                    train_parent_types=tuple(spec.train_parent_types))
    cfg.save(out / "run.json")
    print(f"wrote {corpus}, {emb} and {out / 'run.json'}")
    return 0


def cmd_prepare(args) -> int:
    cfg = resolve_config(args)
    if args.unit:
        cfg = cfg.replace(split_unit=args.unit)
    if not cfg.corpus:
        raise UsageError("prepare-data needs --corpus or a config with 'corpus'")
    out = _out_dir(args, "prepare-data")
    corpus = load_corpus(cfg.corpus)
    split = split_corpus(corpus, cfg.train_parent_types, cfg.min_per_type, cfg.split_seed,
                         unit=cfg.split_unit, n_way=cfg.sampler.n_way)
    cfg.save(out / "config.resolved.json")
    write_manifest(split, out / "split_manifest.json")
    (out / "corpus_stats.json").write_text(json.dumps(corpus.stats, indent=1) + "\n", encoding="utf-8")
    print(f"{len(corpus.mentions)} mentions in {len(corpus.stats)} types; "
          f"train {len(split.train)} ({len(split.train_types)} types), dev {len(split.dev)}, test {len(split.test)} "
          f"({len(split.dev_test_types)} types)")
    return 0


def _write_report(report, path: Path) -> None:
    payload = dict(report.summary(), per_class=report.per_class)
    path.write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(args, "train")
    cfg.save(out / "config.resolved.json")
    _, split, vocab = prepare_run(cfg)
    result = train(cfg, split, vocab, out)
    reports = out / "reports"
    reports.mkdir(exist_ok=True)
    test = evaluate_model(result.best.build(), split.side("test"), cfg.sampler, cfg.eval_episodes, cfg.eval_seed)
    _write_report(test, reports / "test_eval.json")
    print(f"best dev F1 {result.best_dev_f1:.4f} at iteration {result.best.iteration}; "
          f"test F1 {test.micro_f1:.4f}")
    return 0


def cmd_evaluate(args) -> int:
    ckpt = Checkpoint.load(args.checkpoint)
    cfg = ckpt.config
    if args.corpus:
        cfg = cfg.replace(corpus=args.corpus)
    corpus = load_corpus(cfg.corpus)
    split = split_corpus(corpus, cfg.train_parent_types, cfg.min_per_type, cfg.split_seed, unit=cfg.split_unit)
    model = ckpt.build()
    seed = cfg.eval_seed if args.seed is None else args.seed
    report = evaluate_model(model, split.side(args.split), cfg.sampler, args.episodes or cfg.eval_episodes, seed)
    print(f"[{args.split}] " + report.format())
    if args.out:
        out = _out_dir(args, "evaluate")
        _write_report(report, out / f"{args.split}_eval.json")
    return 0


def cmd_grid(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(args, "grid-search")
    cfg.save(out / "config.resolved.json")
    _, split, vocab = prepare_run(cfg)
    grid = DEFAULT_GRID
    if args.grid_values:
        values = [float(v) for v in _csv(args.grid_values)]
        grid = [(b, g) for b in values for g in values]
    result = grid_search(cfg, grid, split, vocab, out / "runs")
    reports = out / "reports"
    reports.mkdir(exist_ok=True)
    lines = ["beta,gamma,dev_F1"] + [f"{r.beta},{r.gamma},{r.dev_f1!r}" for r in result.rows]
    (reports / "grid.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    _write_report(result.test, reports / "test_eval.json")
    print("\n".join(lines))
    print(f"best beta={result.best_beta} gamma={result.best_gamma}; test F1 {result.test.micro_f1:.4f}")
    return 0


def cmd_matrix(args) -> int:
    cfg = resolve_config(args)
    out = _out_dir(args, "matrix")
    cfg.save(out / "config.resolved.json")
    settings = [parse_setting(s) for s in _csv(args.settings)]
    losses = _csv(args.losses)
    bad = set(losses) - set(LOSS_VARIANTS)
    if bad:
        raise UsageError(f"unknown loss variants {sorted(bad)}; expected {LOSS_VARIANTS}")
    need = max(n for n, _ in settings)
    _, split, vocab = prepare_run(cfg.replace(sampler=dataclasses.replace(
        cfg.sampler, n_way=need, train_class_pool_size=max(need, cfg.sampler.train_class_pool_size))))
    results = experiment_matrix(cfg, split, vocab, _csv(args.families), _csv(args.encoders), settings, losses,
                                args.aux_beta, args.aux_gamma, out / "runs", args.workers)
    reports = out / "reports"
    reports.mkdir(exist_ok=True)
    tables = {"matrix_dev": matrix_table(results, "dev_f1"), "matrix_test": matrix_table(results, "test_f1")}
    tables.update(standard_tables(results))
    for name, table in tables.items():
        (reports / f"{name}.csv").write_text(table.to_csv(), encoding="utf-8")
        (reports / f"{name}.txt").write_text(table.to_text() + "\n", encoding="utf-8")
    print(tables["matrix_dev"].to_text())
    return 0


def cmd_inspect(args) -> int:
    import numpy as np
    cfg = resolve_config(args)
    _, split, _ = prepare_run(cfg)
    episode = sample_episode(split.side(args.split), dataclasses.replace(cfg.sampler, seed=cfg.seed),
                             np.random.default_rng(cfg.seed))
    print(episode.dumps())
    return 0


COMMANDS = {"synth": cmd_synth, "prepare-data": cmd_prepare, "train": cmd_train, "evaluate": cmd_evaluate,
            "grid-search": cmd_grid, "matrix": cmd_matrix, "inspect-episode": cmd_inspect}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    if args.command is None:
        parser.print_help(sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, SamplingError, FileNotFoundError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except TrainingDiverged as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        logger.exception("run failed")
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
