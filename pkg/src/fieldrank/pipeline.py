"""Pipeline configuration and the stages the command line drives.

A single declarative JSON config names every input and parameter; it is
validated in full before any stage runs. Stages communicate exclusively
through files under the configured artifact directory:

    indices/<view_id>/...      per-view inverted + forward indices
    bm25.json                  tuned retrieval parameters
    bitext/<view_id>.txt       aligned query/chunk pairs per translation view
    tables/<view_id>.table     pruned translation tables
    features/<split>.svmlight  labeled feature vectors
    model.txt                  the trained re-ranking ensemble
    runs/<split>.run           TREC-format output

Every stage is idempotent and deterministic: identical inputs and
configuration produce byte-identical artifacts.
"""

from __future__ import annotations

import json
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from . import evaluation
from .corpus import ReadStats, open_corpus
from .errors import ConfigError, LockHeld, MissingArtifact, ParseError
from .features import (
    FeatureConfig,
    FeatureExtractor,
    MODEL1_VIEWS,
    read_feature_file,
    write_feature_file,
)
from .index import (
    BM25Params,
    DEFAULT_TUNING_GRID,
    build_indices,
    load_indices,
    retrieve_topk,
    save_indices,
    tune_bm25_detailed,
)
from .ltr import LambdaMARTParams, TrainingSet, load_model, rerank, save_model, train_lambdamart
from .model1 import (
    BitextStats,
    Model1ScoreConfig,
    Model1Scorer,
    build_bitext,
    collection_lm_from_index,
    load_bitext,
    load_table,
    prune_table,
    save_bitext,
    save_table,
    train_model1,
)
from .textproc import FieldViewSpec, WordPieceVocab, load_stoplist, query_views

RETRIEVAL_VIEW = "all.lemm"

SPLITS = ("train", "dev", "test")


def default_view_specs() -> list[FieldViewSpec]:
    """The eight standard views: lemmatized and raw word views per attribute,
    wordpieces for the body, and the combined retrieval field."""
    return [
        FieldViewSpec("url", lemmatize=True, stop=True),
        FieldViewSpec("title", lemmatize=True, stop=True),
        FieldViewSpec("body", lemmatize=True, stop=True),
        FieldViewSpec("url"),
        FieldViewSpec("title"),
        FieldViewSpec("body"),
        FieldViewSpec("body", scheme="wordpiece"),
        FieldViewSpec("all", lemmatize=True, stop=True),
    ]


@dataclass
class Model1Config:
    chunk_len: int = 16
    iterations: int = 5
    prune_min_prob: float = 1e-3
    prune_top_n: int = 100
    prune_renormalize: bool = False
    smoothing_lambda: float = 0.1
    self_prob: float = 0.05

    def __post_init__(self):
        if self.chunk_len < 1:
            raise ConfigError("model1.chunk_len must be >= 1")
        if self.iterations < 1:
            raise ConfigError("model1.iterations must be >= 1")
        if not 0.0 <= self.prune_min_prob < 1.0:
            raise ConfigError("model1.prune_min_prob must be in [0, 1)")
        if self.prune_top_n < 1:
            raise ConfigError("model1.prune_top_n must be >= 1")
        if not 0.0 <= self.smoothing_lambda < 1.0:
            raise ConfigError("model1.smoothing_lambda must be in [0, 1)")
        if not 0.0 <= self.self_prob < 1.0:
            raise ConfigError("model1.self_prob must be in [0, 1)")


@dataclass
class PipelineConfig:
    """Validated view of the JSON configuration file."""

    workdir: Path
    corpus_path: Path
    wordpiece_vocab: Path
    corpus_format: str = "auto"
    stoplist_path: Path | None = None
    queries: dict[str, Path] = field(default_factory=dict)
    qrels: dict[str, Path] = field(default_factory=dict)
    candidate_depth: int = 1000
    bm25: BM25Params = field(default_factory=BM25Params)
    tuning_grid: tuple[BM25Params, ...] = DEFAULT_TUNING_GRID
    tuning_metric: str = "mrr@100"
    model1: Model1Config = field(default_factory=Model1Config)
    ltr: LambdaMARTParams = field(default_factory=LambdaMARTParams)
    run_tag: str = "fieldrank"

    def queries_path(self, split: str) -> Path:
        if split not in self.queries:
            raise ConfigError(f"config defines no {split!r} queries")
        return self.queries[split]

    def qrels_path(self, split: str) -> Path:
        if split not in self.qrels:
            raise ConfigError(f"config defines no {split!r} qrels")
        return self.qrels[split]


_TOP_LEVEL_KEYS = {
    "workdir", "corpus", "wordpiece_vocab", "stoplist", "queries", "qrels",
    "candidate_depth", "bm25", "model1", "ltr", "run_tag",
}


def load_config(path: str | Path) -> PipelineConfig:
    """Parse and fully validate a pipeline config; all checks happen here."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _TOP_LEVEL_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    base = path.parent

    def resolve(p: str) -> Path:
        candidate = Path(p)
        return candidate if candidate.is_absolute() else base / candidate

    def required(key: str):
        if key not in raw:
            raise ConfigError(f"config key {key!r} is required")
        return raw[key]

    corpus_section = required("corpus")
    if isinstance(corpus_section, str):
        corpus_path, corpus_format = resolve(corpus_section), "auto"
    elif isinstance(corpus_section, dict):
        corpus_path = resolve(corpus_section.get("path", ""))
        corpus_format = corpus_section.get("format", "auto")
    else:
        raise ConfigError("corpus must be a path or {path, format}")

    queries = {}
    qrels = {}
    for split, p in (raw.get("queries") or {}).items():
        if split not in SPLITS:
            raise ConfigError(f"unknown queries split {split!r}")
        queries[split] = resolve(p)
    for split, p in (raw.get("qrels") or {}).items():
        if split not in SPLITS:
            raise ConfigError(f"unknown qrels split {split!r}")
        qrels[split] = resolve(p)

    bm25_section = raw.get("bm25") or {}
    try:
        bm25 = BM25Params(
            k1=float(bm25_section.get("k1", 1.2)),
            b=float(bm25_section.get("b", 0.75)),
        )
        grid_section = bm25_section.get("tune_grid")
        if grid_section:
            grid = tuple(
                BM25Params(k1=float(k1), b=float(b))
                for k1 in grid_section["k1"]
                for b in grid_section["b"]
            )
        else:
            grid = DEFAULT_TUNING_GRID
        model1_cfg = Model1Config(**(raw.get("model1") or {}))
        ltr_cfg = LambdaMARTParams(**(raw.get("ltr") or {}))
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"bad parameter section: {exc}") from None

    candidate_depth = int(raw.get("candidate_depth", 1000))
    if candidate_depth < 1:
        raise ConfigError("candidate_depth must be >= 1")

    cfg = PipelineConfig(
        workdir=resolve(required("workdir")),
        corpus_path=corpus_path,
        corpus_format=corpus_format,
        wordpiece_vocab=resolve(required("wordpiece_vocab")),
        stoplist_path=resolve(raw["stoplist"]) if raw.get("stoplist") else None,
        queries=queries,
        qrels=qrels,
        candidate_depth=candidate_depth,
        bm25=bm25,
        tuning_grid=grid,
        tuning_metric=bm25_section.get("metric", "mrr@100"),
        model1=model1_cfg,
        ltr=ltr_cfg,
        run_tag=str(raw.get("run_tag", "fieldrank")),
    )

    for label, p in [("corpus", cfg.corpus_path), ("wordpiece_vocab", cfg.wordpiece_vocab)]:
        if not p.exists():
            raise ConfigError(f"{label} file does not exist: {p}")
    if cfg.stoplist_path and not cfg.stoplist_path.exists():
        raise ConfigError(f"stoplist file does not exist: {cfg.stoplist_path}")
    for split, p in {**cfg.queries}.items():
        if not p.exists():
            raise ConfigError(f"{split} queries file does not exist: {p}")
    for split, p in {**cfg.qrels}.items():
        if not p.exists():
            raise ConfigError(f"{split} qrels file does not exist: {p}")
    return cfg


@contextmanager
def artifact_lock(workdir: Path):
    """One command at a time per artifact directory."""
    workdir.mkdir(parents=True, exist_ok=True)
    lock_path = workdir / ".lock"
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise LockHeld(f"lock file exists: {lock_path}") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock_path.unlink(missing_ok=True)


def read_queries(path: str | Path) -> dict[str, str]:
    """Read `qid TAB text` lines into an ordered mapping."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            qid, sep, text = line.partition("\t")
            if not sep or not qid:
                raise ParseError("expected `qid<TAB>text`", str(path), lineno)
            out[qid] = text
    return out


def _load_text_resources(cfg: PipelineConfig):
    stoplist = load_stoplist(cfg.stoplist_path) if cfg.stoplist_path else None
    vocab = WordPieceVocab.load(cfg.wordpiece_vocab)
    return stoplist, vocab


def _query_views_by_id(cfg: PipelineConfig, split: str):
    stoplist, vocab = _load_text_resources(cfg)
    specs = default_view_specs()
    queries = read_queries(cfg.queries_path(split))
    return {
        qid: query_views(text, specs, stoplist, vocab)
        for qid, text in queries.items()
    }


def _require(path: Path, what: str, stage: str) -> Path:
    if not path.exists():
        raise MissingArtifact(f"{what} not found at {path}; run `{stage}` first", stage=stage)
    return path


def _indices_dir(cfg: PipelineConfig) -> Path:
    return cfg.workdir / "indices"


def _load_all_indices(cfg: PipelineConfig):
    root = _require(_indices_dir(cfg), "index directory", "index")
    inverted, forward = load_indices(root)
    if RETRIEVAL_VIEW not in inverted:
        raise MissingArtifact(f"retrieval view {RETRIEVAL_VIEW} missing from indices", stage="index")
    return inverted, forward


def _bm25_params(cfg: PipelineConfig) -> BM25Params:
    tuned = cfg.workdir / "bm25.json"
    if tuned.exists():
        data = json.loads(tuned.read_text(encoding="utf-8"))
        return BM25Params(k1=data["k1"], b=data["b"])
    return cfg.bm25


def _build_scorers(cfg: PipelineConfig, inverted) -> dict[str, Model1Scorer]:
    tables_dir = _require(cfg.workdir / "tables", "translation tables", "train-model1")
    scorers: dict[str, Model1Scorer] = {}
    for view in MODEL1_VIEWS:
        table_path = _require(tables_dir / f"{view}.table", f"table for {view}", "train-model1")
        table = load_table(table_path)
        lm = collection_lm_from_index(inverted[view]) if view in inverted else {}
        lam = cfg.model1.smoothing_lambda if lm else 0.0
        scorers[view] = Model1Scorer(
            table,
            Model1ScoreConfig(
                smoothing_lambda=lam,
                self_prob=cfg.model1.self_prob,
                collection_lm=lm,
            ),
        )
    return scorers


# --- stages -----------------------------------------------------------------------


def stage_index(cfg: PipelineConfig) -> dict:
    started = time.perf_counter()
    stoplist, vocab = _load_text_resources(cfg)
    stats = ReadStats()
    stream = open_corpus(cfg.corpus_path, cfg.corpus_format, stats)
    inverted, forward = build_indices(stream, default_view_specs(), stoplist, vocab)
    save_indices(inverted, forward, _indices_dir(cfg))
    return {
        "command": "index",
        "documents": stats.read,
        "skipped_lines": stats.skipped,
        "views": sorted(inverted),
        "elapsed_sec": round(time.perf_counter() - started, 3),
    }


def stage_tune_bm25(cfg: PipelineConfig) -> dict:
    started = time.perf_counter()
    inverted, _ = _load_all_indices(cfg)
    query_views_map = _query_views_by_id(cfg, "dev")
    dev_queries = {qid: views[RETRIEVAL_VIEW] for qid, views in query_views_map.items()}
    dev_qrels = evaluation.read_qrels(cfg.qrels_path("dev"))
    detailed = tune_bm25_detailed(
        inverted[RETRIEVAL_VIEW], dev_queries, dev_qrels,
        cfg.tuning_grid, cfg.tuning_metric, cfg.candidate_depth,
    )
    best_index = max(range(len(detailed)), key=lambda i: (detailed[i][1], -i))
    best, best_value = detailed[best_index]
    out = {"k1": best.k1, "b": best.b, "metric": cfg.tuning_metric, "value": best_value}
    (cfg.workdir / "bm25.json").write_text(
        json.dumps(out, sort_keys=True) + "\n", encoding="utf-8"
    )
    return {
        "command": "tune-bm25",
        "grid_points": len(detailed),
        "queries": len(dev_queries),
        **out,
        "elapsed_sec": round(time.perf_counter() - started, 3),
    }


def stage_build_bitext(cfg: PipelineConfig) -> dict:
    started = time.perf_counter()
    _, forward = _load_all_indices(cfg)
    query_views_map = _query_views_by_id(cfg, "train")
    train_qrels = evaluation.read_qrels(cfg.qrels_path("train"))
    bitext_dir = cfg.workdir / "bitext"
    bitext_dir.mkdir(parents=True, exist_ok=True)
    summary: dict = {"command": "build-bitext", "views": {}}
    for view in MODEL1_VIEWS:
        queries = {qid: views[view] for qid, views in query_views_map.items()}
        stats = BitextStats()
        pairs = build_bitext(queries, train_qrels, forward[view], cfg.model1.chunk_len, stats)
        save_bitext(pairs, bitext_dir / f"{view}.txt")
        summary["views"][view] = {
            "pairs": stats.pairs,
            "relevant_judgments": stats.relevant_judgments,
            "missing_documents": stats.missing_documents,
        }
    summary["elapsed_sec"] = round(time.perf_counter() - started, 3)
    return summary


def stage_train_model1(cfg: PipelineConfig) -> dict:
    started = time.perf_counter()
    bitext_dir = _require(cfg.workdir / "bitext", "bitext directory", "build-bitext")
    tables_dir = cfg.workdir / "tables"
    tables_dir.mkdir(parents=True, exist_ok=True)
    summary: dict = {"command": "train-model1", "views": {}}
    for view in MODEL1_VIEWS:
        pairs = load_bitext(_require(bitext_dir / f"{view}.txt", f"bitext for {view}", "build-bitext"))
        table = train_model1(pairs, iterations=cfg.model1.iterations)
        pruned = prune_table(
            table,
            min_prob=cfg.model1.prune_min_prob,
            top_n=cfg.model1.prune_top_n,
            renormalize=cfg.model1.prune_renormalize,
        )
        pruned.metadata = dict(table.metadata)
        save_table(pruned, tables_dir / f"{view}.table")
        summary["views"][view] = {
            "pairs": len(pairs),
            "entries": pruned.entry_count(),
            "final_log_likelihood": table.log_likelihood_history[-1],
        }
    summary["elapsed_sec"] = round(time.perf_counter() - started, 3)
    return summary


def stage_extract_features(cfg: PipelineConfig, split: str = "train") -> dict:
    started = time.perf_counter()
    inverted, forward = _load_all_indices(cfg)
    params = _bm25_params(cfg)
    scorers = _build_scorers(cfg, inverted)
    extractor = FeatureExtractor(inverted, forward, scorers, FeatureConfig(bm25_params=params))
    query_views_map = _query_views_by_id(cfg, split)
    qrels = evaluation.read_qrels(cfg.qrels_path(split))
    features_dir = cfg.workdir / "features"
    features_dir.mkdir(parents=True, exist_ok=True)

    def rows():
        for qid, views in query_views_map.items():
            candidates = retrieve_topk(
                inverted[RETRIEVAL_VIEW], params, views[RETRIEVAL_VIEW],
                k=cfg.candidate_depth, query_id=qid,
            )
            doc_ids = candidates.doc_ids()
            for doc_id, vector in zip(doc_ids, extractor.vectors(views, doc_ids)):
                yield qrels.relevance(qid, doc_id), qid, vector, doc_id

    out_path = features_dir / f"{split}.svmlight"
    count = write_feature_file(out_path, rows())
    return {
        "command": "extract-features",
        "split": split,
        "queries": len(query_views_map),
        "rows": count,
        "path": str(out_path),
        "elapsed_sec": round(time.perf_counter() - started, 3),
    }


def stage_train_ltr(cfg: PipelineConfig) -> dict:
    started = time.perf_counter()
    features_path = _require(
        cfg.workdir / "features" / "train.svmlight", "training features", "extract-features"
    )
    training = TrainingSet.from_feature_rows(read_feature_file(features_path))
    model = train_lambdamart(training, cfg.ltr)
    save_model(model, cfg.workdir / "model.txt")
    return {
        "command": "train-ltr",
        "groups": len(training.groups),
        "trees": len(model.trees),
        "train_ndcg": model.training_ndcg_history[-1],
        "elapsed_sec": round(time.perf_counter() - started, 3),
    }


def stage_run(
    cfg: PipelineConfig,
    split: str = "test",
    rerank_candidates: bool = True,
    output: Path | None = None,
) -> dict:
    started = time.perf_counter()
    inverted, forward = _load_all_indices(cfg)
    params = _bm25_params(cfg)
    query_views_map = _query_views_by_id(cfg, split)

    extractor = None
    model = None
    if rerank_candidates:
        scorers = _build_scorers(cfg, inverted)
        extractor = FeatureExtractor(inverted, forward, scorers, FeatureConfig(bm25_params=params))
        model = load_model(_require(cfg.workdir / "model.txt", "ranking model", "train-ltr"))

    scored: dict[str, list[tuple[str, float]]] = {}
    for qid, views in query_views_map.items():
        candidates = retrieve_topk(
            inverted[RETRIEVAL_VIEW], params, views[RETRIEVAL_VIEW],
            k=cfg.candidate_depth, query_id=qid,
        )
        if rerank_candidates and candidates.entries:
            doc_ids = candidates.doc_ids()
            vectors = extractor.vectors(views, doc_ids)
            reranked = rerank(candidates, dict(zip(doc_ids, vectors)), model)
            scored[qid] = reranked.entries
        else:
            scored[qid] = candidates.entries

    run = evaluation.Run.from_scores(scored, tag=cfg.run_tag)
    if output is None:
        runs_dir = cfg.workdir / "runs"
        runs_dir.mkdir(parents=True, exist_ok=True)
        suffix = "" if rerank_candidates else ".bm25"
        output = runs_dir / f"{split}{suffix}.run"
    evaluation.write_run(run, output)
    return {
        "command": "run",
        "split": split,
        "reranked": rerank_candidates,
        "queries": len(scored),
        "entries": sum(len(v) for v in scored.values()),
        "path": str(output),
        "elapsed_sec": round(time.perf_counter() - started, 3),
    }


def stage_evaluate(
    cfg: PipelineConfig,
    run_path: Path | None = None,
    qrels_path: Path | None = None,
    split: str = "test",
) -> dict:
    started = time.perf_counter()
    if run_path is None:
        run_path = _require(cfg.workdir / "runs" / f"{split}.run", "run file", "run")
    if qrels_path is None:
        qrels_path = cfg.qrels_path(split)
    run = evaluation.read_run(run_path)
    qrels = evaluation.read_qrels(qrels_path)
    return {
        "command": "evaluate",
        "run": str(run_path),
        "queries": len(run.by_query),
        "mrr@100": evaluation.mrr_at_k(run, qrels, 100),
        "ndcg@10": evaluation.ndcg_at_k(run, qrels, 10),
        "elapsed_sec": round(time.perf_counter() - started, 3),
    }
