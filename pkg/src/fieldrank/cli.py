"""Command line entry point: one subcommand per pipeline stage.

Each subcommand takes ``--config`` (the declarative pipeline file), holds a
lock on the artifact directory while it works, and prints a one-line JSON
summary on success. Errors are categorized through the exit code:

    2  configuration problems        3  missing upstream artifact
    4  lock contention               5  any other pipeline error
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, FieldRankError, LockHeld, MissingArtifact
from .pipeline import (
    artifact_lock,
    load_config,
    stage_build_bitext,
    stage_evaluate,
    stage_extract_features,
    stage_index,
    stage_run,
    stage_train_ltr,
    stage_train_model1,
    stage_tune_bm25,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fieldrank",
        description="Multi-field BM25 retrieval with translation features and LambdaMART re-ranking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, type=Path, help="pipeline config JSON")
        return p

    add("index", "build per-view inverted and forward indices")
    add("tune-bm25", "grid-search BM25 parameters on the dev split")
    add("build-bitext", "pair training queries with relevant-document chunks")
    add("train-model1", "train and prune translation tables by EM")

    p = add("extract-features", "write labeled feature vectors for candidates")
    p.add_argument("--split", choices=("train", "dev", "test"), default="train")

    add("train-ltr", "train the LambdaMART re-ranker")

    p = add("run", "retrieve, featurize, re-rank and write a TREC run")
    p.add_argument("--split", choices=("train", "dev", "test"), default="test")
    p.add_argument("--no-rerank", action="store_true", help="emit the pure BM25 ranking")
    p.add_argument("--output", type=Path, default=None, help="run file destination")

    p = add("evaluate", "score a run file against qrels (MRR@100, NDCG@10)")
    p.add_argument("--split", choices=("train", "dev", "test"), default="test")
    p.add_argument("--run", type=Path, default=None, help="run file (default: workdir run for split)")
    p.add_argument("--qrels", type=Path, default=None, help="qrels file (default: config qrels for split)")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        with artifact_lock(cfg.workdir):
            if args.command == "index":
                summary = stage_index(cfg)
            elif args.command == "tune-bm25":
                summary = stage_tune_bm25(cfg)
            elif args.command == "build-bitext":
                summary = stage_build_bitext(cfg)
            elif args.command == "train-model1":
                summary = stage_train_model1(cfg)
            elif args.command == "extract-features":
                summary = stage_extract_features(cfg, split=args.split)
            elif args.command == "train-ltr":
                summary = stage_train_ltr(cfg)
            elif args.command == "run":
                summary = stage_run(
                    cfg,
                    split=args.split,
                    rerank_candidates=not args.no_rerank,
                    output=args.output,
                )
            else:
                summary = stage_evaluate(
                    cfg, run_path=args.run, qrels_path=args.qrels, split=args.split
                )
    except FieldRankError as exc:
        code = {
            ConfigError: 2,
            MissingArtifact: 3,
            LockHeld: 4,
        }.get(type(exc), 5)
        print(
            json.dumps({
                "status": "error",
                "category": type(exc).__name__,
                "message": str(exc),
            }),
            file=sys.stderr,
        )
        return code
    print(json.dumps({"status": "ok", **summary}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
