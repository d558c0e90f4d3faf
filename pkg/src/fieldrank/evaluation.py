"""TREC-style evaluation: qrels and run files, MRR@k and NDCG@k.

File formats (whitespace-separated, UTF-8, newline-delimited):

* qrels lines: ``qid 0 docid rel``
* run lines:   ``qid Q0 docid rank score tag``

Queries absent from the qrels are excluded from metric means, matching the
behavior of standard TREC tooling. NDCG uses exponential gains
``2^rel - 1`` and the ``1/log2(rank+1)`` discount.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import InconsistentRanks, NoEvaluableQueries, ParseError

logger = logging.getLogger(__name__)


@dataclass
class Qrels:
    """Relevance judgments: query id -> doc id -> graded label (int >= 0)."""

    by_query: dict[str, dict[str, int]] = field(default_factory=dict)
    duplicate_count: int = 0

    def add(self, query_id: str, doc_id: str, relevance: int) -> None:
        docs = self.by_query.setdefault(query_id, {})
        if doc_id in docs:
            self.duplicate_count += 1
        docs[doc_id] = relevance

    def relevance(self, query_id: str, doc_id: str) -> int:
        return self.by_query.get(query_id, {}).get(doc_id, 0)

    def has_relevant(self, query_id: str) -> bool:
        return any(rel >= 1 for rel in self.by_query.get(query_id, {}).values())

    def query_ids(self) -> list[str]:
        return list(self.by_query)


@dataclass
class RunEntry:
    doc_id: str
    rank: int
    score: float


@dataclass
class Run:
    """Ranked results per query, ranks contiguous from 1 per query."""

    by_query: dict[str, list[RunEntry]] = field(default_factory=dict)
    tag: str = "fieldrank"

    @classmethod
    def from_scores(cls, scored: dict[str, Sequence[tuple[str, float]]], tag: str = "fieldrank") -> "Run":
        """Build a run from per-query (doc_id, score) pairs.

        Entries are ordered by descending score, ties broken by ascending
        doc id, and ranks assigned 1..n.
        """
        run = cls(tag=tag)
        for query_id, pairs in scored.items():
            ordered = sorted(pairs, key=lambda p: (-p[1], p[0]))
            run.by_query[query_id] = [
                RunEntry(doc_id, rank + 1, score)
                for rank, (doc_id, score) in enumerate(ordered)
            ]
        return run


def read_qrels(path: str | Path) -> Qrels:
    """Parse a qrels file; duplicate (query, doc) keys keep the last value."""
    qrels = Qrels()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 4:
                raise ParseError(f"expected 4 fields, got {len(parts)}", str(path), lineno)
            qid, _, doc_id, rel_text = parts
            try:
                rel = int(rel_text)
            except ValueError:
                raise ParseError(f"bad relevance {rel_text!r}", str(path), lineno) from None
            if rel < 0:
                raise ParseError(f"negative relevance {rel}", str(path), lineno)
            qrels.add(qid, doc_id, rel)
    if qrels.duplicate_count:
        logger.warning(
            "%s: %d duplicate (query, doc) judgments, last value kept",
            path, qrels.duplicate_count,
        )
    return qrels


def write_qrels(qrels: Qrels, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qid, docs in qrels.by_query.items():
            for doc_id, rel in docs.items():
                fh.write(f"{qid} 0 {doc_id} {rel}\n")


def read_run(path: str | Path) -> Run:
    """Parse a run file, checking rank contiguity and score ordering."""
    run = Run()
    tag_seen = False
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 6:
                raise ParseError(f"expected 6 fields, got {len(parts)}", str(path), lineno)
            qid, _, doc_id, rank_text, score_text, tag = parts
            try:
                rank = int(rank_text)
                score = float(score_text)
            except ValueError:
                raise ParseError("bad rank or score", str(path), lineno) from None
            if not tag_seen:
                run.tag = tag
                tag_seen = True
            entries = run.by_query.setdefault(qid, [])
            if rank != len(entries) + 1:
                raise InconsistentRanks(
                    f"{path}:{lineno}: query {qid}: rank {rank} after {len(entries)} entries"
                )
            if entries and score > entries[-1].score:
                raise InconsistentRanks(
                    f"{path}:{lineno}: query {qid}: score increases at rank {rank}"
                )
            if any(e.doc_id == doc_id for e in entries):
                raise ParseError(f"duplicate doc {doc_id} for query {qid}", str(path), lineno)
            entries.append(RunEntry(doc_id, rank, score))
    return run


def write_run(run: Run, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for qid, entries in run.by_query.items():
            for e in entries:
                fh.write(f"{qid} Q0 {e.doc_id} {e.rank} {e.score!r} {run.tag}\n")


# --- metrics -------------------------------------------------------------------


def _evaluable(run: Run, qrels: Qrels) -> list[str]:
    return [qid for qid in run.by_query if qrels.has_relevant(qid)]


def mrr_at_k(run: Run, qrels: Qrels, k: int) -> float:
    """Mean reciprocal rank of the first relevant document within the top k.

    Queries with no judged-relevant document anywhere are excluded from the
    mean; an evaluated query with no relevant document in its top k scores 0.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    queries = _evaluable(run, qrels)
    if not queries:
        raise NoEvaluableQueries("no run query has a judged-relevant document")
    total = 0.0
    for qid in queries:
        for entry in run.by_query[qid][:k]:
            if qrels.relevance(qid, entry.doc_id) >= 1:
                total += 1.0 / entry.rank
                break
    return total / len(queries)


def _gain(rel: int) -> float:
    return float(2 ** rel - 1)


def dcg(labels: Sequence[int], k: int) -> float:
    """Discounted cumulative gain of a label sequence already in rank order."""
    return sum(
        _gain(rel) / math.log2(pos + 2)
        for pos, rel in enumerate(labels[:k])
    )


def ndcg_of_ranking(labels: Sequence[int], k: int) -> float:
    """NDCG@k of one ranking given its labels in ranked order; 0 if no ideal gain."""
    ideal = dcg(sorted(labels, reverse=True), k)
    if ideal == 0.0:
        return 0.0
    return dcg(labels, k) / ideal


def ndcg_at_k(run: Run, qrels: Qrels, k: int) -> float:
    """Mean NDCG@k over run queries with nonzero ideal DCG.

    The ideal DCG considers every judged document of the query, not only
    those retrieved.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    totals = []
    for qid, entries in run.by_query.items():
        judged = qrels.by_query.get(qid, {})
        ideal = dcg(sorted(judged.values(), reverse=True), k)
        if ideal == 0.0:
            continue
        got = dcg([judged.get(e.doc_id, 0) for e in entries], k)
        totals.append(got / ideal)
    if not totals:
        raise NoEvaluableQueries("no run query has nonzero ideal DCG")
    return sum(totals) / len(totals)


def evaluate_metric(name: str, run: Run, qrels: Qrels) -> float:
    """Dispatch a metric by name, e.g. ``mrr@100`` or ``ndcg@10``."""
    base, _, depth = name.lower().partition("@")
    k = int(depth) if depth else 10
    if base == "mrr":
        return mrr_at_k(run, qrels, k)
    if base == "ndcg":
        return ndcg_at_k(run, qrels, k)
    raise ValueError(f"unknown metric: {name!r}")
