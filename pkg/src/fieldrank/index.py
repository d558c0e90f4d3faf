"""Per-view inverted and forward indices, BM25 scoring and candidate generation.

One pass over the corpus builds, for every configured view, an inverted
index (term -> postings) for retrieval and a forward index (doc -> token
ids) for random-access feature computation. Both share one term dictionary
per view. Document ordinals are dense integers assigned in ingestion
order; doc id strings live only at the boundary.

Persisted layout, one subdirectory per view id:

* ``manifest.json``   doc count, average length, vocab size, format version
* ``dictionary.txt``  one term per line, line number = term id
* ``docids.txt``      one doc id per line, line number = ordinal
* ``doclens.bin``     unsigned varints, one per document
* ``postings.bin``    per term: varint(df), then delta-encoded (ordinal gap, tf) varints
* ``forward.bin``     per document: varint(length), then raw token-id varints

Identical corpora and view specs always produce byte-identical files.
"""

from __future__ import annotations

import functools
import heapq
import json
import math
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import DocumentRecord, document_views
from .errors import DuplicateDocId, EmptyCorpus, EmptyGrid, NoJudgedQueries
from .evaluation import Qrels, Run, evaluate_metric
from .textproc import FieldViewSpec, WordPieceVocab

INDEX_FORMAT_VERSION = 1


@dataclass(frozen=True)
class BM25Params:
    k1: float = 1.2
    b: float = 0.75

    def __post_init__(self):
        if self.k1 < 0:
            raise ValueError("k1 must be >= 0")
        if not 0.0 <= self.b <= 1.0:
            raise ValueError("b must be in [0, 1]")


# Coarse default grid; callers can sweep anything they like instead.
DEFAULT_TUNING_GRID: tuple[BM25Params, ...] = tuple(
    BM25Params(k1=round(0.4 + 0.2 * i, 2), b=b)
    for i in range(9)
    for b in (0.3, 0.45, 0.6, 0.75, 0.9)
)


@dataclass
class CandidateList:
    """Top-k retrieval output: (doc_id, score) descending, ties by doc id."""

    query_id: str
    entries: list[tuple[str, float]] = field(default_factory=list)

    def doc_ids(self) -> list[str]:
        return [doc_id for doc_id, _ in self.entries]


class InvertedIndex:
    """Term -> postings for one view, plus the collection statistics BM25 needs."""

    def __init__(self, view_id: str, terms: list[str], vocab: dict[str, int],
                 postings: list[list[tuple[int, int]]], doc_len: list[int],
                 doc_ids: list[str], doc_ordinals: dict[str, int]):
        self.view_id = view_id
        self.terms = terms
        self.vocab = vocab
        self.postings = postings
        self.doc_len = doc_len
        self.doc_ids = doc_ids
        self.doc_ordinals = doc_ordinals

    @property
    def doc_count(self) -> int:
        return len(self.doc_ids)

    @functools.cached_property
    def avg_len(self) -> float:
        n = len(self.doc_len)
        return sum(self.doc_len) / n if n else 0.0

    def df(self, term: str) -> int:
        tid = self.vocab.get(term)
        return len(self.postings[tid]) if tid is not None else 0

    def idf(self, term: str) -> float:
        return idf(self, term)

    def tf(self, term: str, doc_ordinal: int) -> int:
        tid = self.vocab.get(term)
        if tid is None:
            return 0
        plist = self.postings[tid]
        pos = bisect_left(plist, doc_ordinal, key=lambda p: p[0])
        if pos < len(plist) and plist[pos][0] == doc_ordinal:
            return plist[pos][1]
        return 0

    def total_tokens(self) -> int:
        return sum(self.doc_len)

    def collection_tf(self, term: str) -> int:
        tid = self.vocab.get(term)
        if tid is None:
            return 0
        return sum(tf for _, tf in self.postings[tid])


class ForwardIndex:
    """Doc -> token ids for one view; shares the term dictionary of its inverted twin."""

    def __init__(self, view_id: str, terms: list[str], vocab: dict[str, int],
                 docs: list[list[int]], doc_ids: list[str], doc_ordinals: dict[str, int]):
        self.view_id = view_id
        self.terms = terms
        self.vocab = vocab
        self.docs = docs
        self.doc_ids = doc_ids
        self.doc_ordinals = doc_ordinals

    @property
    def doc_count(self) -> int:
        return len(self.doc_ids)

    def token_ids(self, doc_ordinal: int) -> list[int]:
        return self.docs[doc_ordinal]

    def tokens(self, doc_ordinal: int) -> list[str]:
        terms = self.terms
        return [terms[tid] for tid in self.docs[doc_ordinal]]

    def term_counts(self, doc_ordinal: int) -> Counter[str]:
        return Counter(self.tokens(doc_ordinal))

    def ordinal_of(self, doc_id: str) -> int:
        return self.doc_ordinals[doc_id]


def build_indices(
    corpus: Iterable[DocumentRecord],
    specs: Sequence[FieldViewSpec],
    stoplist: frozenset[str] | set[str] | None = None,
    vocab: WordPieceVocab | None = None,
) -> tuple[dict[str, InvertedIndex], dict[str, ForwardIndex]]:
    """Build one inverted and one forward index per view in a single pass.

    Term ids are assigned in order of first appearance, ordinals in
    ingestion order, so the result is a pure function of the input stream.
    """
    view_ids = [s.view_id for s in specs]
    if len(set(view_ids)) != len(view_ids):
        raise ValueError("duplicate view_id in view specs")
    doc_ids: list[str] = []
    doc_ordinals: dict[str, int] = {}
    per_view_terms: dict[str, list[str]] = {s.view_id: [] for s in specs}
    per_view_vocab: dict[str, dict[str, int]] = {s.view_id: {} for s in specs}
    per_view_postings: dict[str, list[list[tuple[int, int]]]] = {s.view_id: [] for s in specs}
    per_view_doclen: dict[str, list[int]] = {s.view_id: [] for s in specs}
    per_view_docs: dict[str, list[list[int]]] = {s.view_id: [] for s in specs}

    for record in corpus:
        if record.doc_id in doc_ordinals:
            raise DuplicateDocId(f"document id {record.doc_id!r} ingested twice")
        ordinal = len(doc_ids)
        doc_ordinals[record.doc_id] = ordinal
        doc_ids.append(record.doc_id)
        views = document_views(record, specs, stoplist, vocab)
        for view_id, tokens in views.items():
            view_vocab = per_view_vocab[view_id]
            terms = per_view_terms[view_id]
            postings = per_view_postings[view_id]
            token_ids: list[int] = []
            counts: Counter[int] = Counter()
            for token in tokens:
                tid = view_vocab.get(token)
                if tid is None:
                    tid = len(terms)
                    view_vocab[token] = tid
                    terms.append(token)
                    postings.append([])
                token_ids.append(tid)
                counts[tid] += 1
            for tid, tf in counts.items():
                postings[tid].append((ordinal, tf))
            per_view_doclen[view_id].append(len(tokens))
            per_view_docs[view_id].append(token_ids)

    if not doc_ids:
        raise EmptyCorpus("no documents ingested")

    inverted: dict[str, InvertedIndex] = {}
    forward: dict[str, ForwardIndex] = {}
    for spec in specs:
        vid = spec.view_id
        inverted[vid] = InvertedIndex(
            vid, per_view_terms[vid], per_view_vocab[vid], per_view_postings[vid],
            per_view_doclen[vid], doc_ids, doc_ordinals,
        )
        forward[vid] = ForwardIndex(
            vid, per_view_terms[vid], per_view_vocab[vid], per_view_docs[vid],
            doc_ids, doc_ordinals,
        )
    return inverted, forward


def idf(index: InvertedIndex, term: str) -> float:
    """Nonnegative smoothed Robertson IDF: ln(1 + (N - df + 0.5) / (df + 0.5))."""
    df = index.df(term)
    n = index.doc_count
    return math.log(1.0 + (n - df + 0.5) / (df + 0.5))


def bm25_score(
    index: InvertedIndex,
    params: BM25Params,
    query: Sequence[str],
    doc_ordinal: int,
) -> float:
    """BM25 over query tokens (with multiplicity) against one document."""
    dlen = index.doc_len[doc_ordinal]
    score = 0.0
    norm = None
    for term in query:
        tf = index.tf(term, doc_ordinal)
        if tf == 0:
            continue
        if norm is None:
            norm = 1.0 - params.b + params.b * dlen / index.avg_len
        score += idf(index, term) * tf * (params.k1 + 1.0) / (tf + params.k1 * norm)
    return score


@functools.total_ordering
class _AscendingDocId:
    """Inverts string order so a bounded min-heap evicts the larger doc id first."""

    __slots__ = ("doc_id",)

    def __init__(self, doc_id: str):
        self.doc_id = doc_id

    def __eq__(self, other) -> bool:
        return self.doc_id == other.doc_id

    def __lt__(self, other) -> bool:
        return self.doc_id > other.doc_id


def retrieve_topk(
    index: InvertedIndex,
    params: BM25Params,
    query: Sequence[str],
    k: int = 1000,
    query_id: str = "",
) -> CandidateList:
    """Exact BM25 top-k by document-at-a-time postings traversal.

    Only documents with positive scores are returned, ordered by descending
    score with ties broken by ascending doc id; hence fewer than k entries
    whenever fewer than k documents match.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    weights: dict[int, int] = {}
    for term in query:
        tid = index.vocab.get(term)
        if tid is not None and index.postings[tid]:
            weights[tid] = weights.get(tid, 0) + 1

    result = CandidateList(query_id=query_id)
    if not weights:
        return result

    avg_len = index.avg_len
    k1, b = params.k1, params.b
    term_idf = {tid: idf(index, index.terms[tid]) for tid in weights}
    plists = [(index.postings[tid], weights[tid], term_idf[tid]) for tid in weights]
    cursors = [0] * len(plists)

    heap: list[tuple[float, _AscendingDocId, int]] = []
    while True:
        current = -1
        for i, (plist, _, _) in enumerate(plists):
            if cursors[i] < len(plist):
                ordinal = plist[cursors[i]][0]
                if current < 0 or ordinal < current:
                    current = ordinal
        if current < 0:
            break
        norm = 1.0 - b + b * index.doc_len[current] / avg_len
        score = 0.0
        for i, (plist, weight, term_idf_i) in enumerate(plists):
            pos = cursors[i]
            if pos < len(plist) and plist[pos][0] == current:
                tf = plist[pos][1]
                score += weight * term_idf_i * tf * (k1 + 1.0) / (tf + k1 * norm)
                cursors[i] += 1
        if score > 0.0:
            item = (score, _AscendingDocId(index.doc_ids[current]), current)
            if len(heap) < k:
                heapq.heappush(heap, item)
            elif item > heap[0]:
                heapq.heapreplace(heap, item)

    ranked = sorted(heap, key=lambda it: (-it[0], it[1].doc_id))
    result.entries = [(index.doc_ids[ordinal], score) for score, _, ordinal in ranked]
    return result


def tune_bm25(
    index: InvertedIndex,
    dev_queries: Mapping[str, Sequence[str]],
    dev_qrels: Qrels,
    grid: Sequence[BM25Params] = DEFAULT_TUNING_GRID,
    metric: str = "mrr@100",
    k: int = 1000,
) -> BM25Params:
    """Pick the grid point maximizing the metric on the dev set.

    Ties keep the earliest grid point, so grid order is part of the contract.
    """
    best, _ = max(
        enumerate(tune_bm25_detailed(index, dev_queries, dev_qrels, grid, metric, k)),
        key=lambda iv: (iv[1][1], -iv[0]),
    )
    return grid[best]


def tune_bm25_detailed(
    index: InvertedIndex,
    dev_queries: Mapping[str, Sequence[str]],
    dev_qrels: Qrels,
    grid: Sequence[BM25Params] = DEFAULT_TUNING_GRID,
    metric: str = "mrr@100",
    k: int = 1000,
) -> list[tuple[BM25Params, float]]:
    """Metric value for every grid point, in grid order."""
    if not grid:
        raise EmptyGrid("BM25 tuning grid is empty")
    if not dev_queries or not any(dev_qrels.has_relevant(qid) for qid in dev_queries):
        raise NoJudgedQueries("no dev query has relevance judgments")
    results = []
    for params in grid:
        scored = {
            qid: retrieve_topk(index, params, tokens, k=k, query_id=qid).entries
            for qid, tokens in dev_queries.items()
        }
        run = Run.from_scores(scored)
        results.append((params, evaluate_metric(metric, run, dev_qrels)))
    return results


# --- persistence -----------------------------------------------------------------


def _uvarint(value: int) -> bytes:
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _read_uvarint(buf: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        byte = buf[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7


def save_view_index(inv: InvertedIndex, fwd: ForwardIndex, view_dir: str | Path) -> None:
    view_dir = Path(view_dir)
    view_dir.mkdir(parents=True, exist_ok=True)

    manifest = {
        "format_version": INDEX_FORMAT_VERSION,
        "view_id": inv.view_id,
        "doc_count": inv.doc_count,
        "avg_len": inv.avg_len,
        "vocab_size": len(inv.terms),
    }
    (view_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True) + "\n", encoding="utf-8"
    )
    (view_dir / "dictionary.txt").write_text(
        "".join(t + "\n" for t in inv.terms), encoding="utf-8"
    )
    (view_dir / "docids.txt").write_text(
        "".join(d + "\n" for d in inv.doc_ids), encoding="utf-8"
    )

    lens = bytearray()
    for n in inv.doc_len:
        lens += _uvarint(n)
    (view_dir / "doclens.bin").write_bytes(bytes(lens))

    post = bytearray()
    for plist in inv.postings:
        post += _uvarint(len(plist))
        prev = 0
        for ordinal, tf in plist:
            post += _uvarint(ordinal - prev)
            post += _uvarint(tf)
            prev = ordinal
    (view_dir / "postings.bin").write_bytes(bytes(post))

    fwd_bytes = bytearray()
    for token_ids in fwd.docs:
        fwd_bytes += _uvarint(len(token_ids))
        for tid in token_ids:
            fwd_bytes += _uvarint(tid)
    (view_dir / "forward.bin").write_bytes(bytes(fwd_bytes))


def load_view_index(view_dir: str | Path) -> tuple[InvertedIndex, ForwardIndex]:
    view_dir = Path(view_dir)
    manifest = json.loads((view_dir / "manifest.json").read_text(encoding="utf-8"))
    if manifest.get("format_version") != INDEX_FORMAT_VERSION:
        raise ValueError(f"unsupported index format version in {view_dir}")
    view_id = manifest["view_id"]

    terms = (view_dir / "dictionary.txt").read_text(encoding="utf-8").splitlines()
    doc_ids = (view_dir / "docids.txt").read_text(encoding="utf-8").splitlines()
    vocab = {t: i for i, t in enumerate(terms)}
    doc_ordinals = {d: i for i, d in enumerate(doc_ids)}

    buf = (view_dir / "doclens.bin").read_bytes()
    pos = 0
    doc_len: list[int] = []
    while pos < len(buf):
        n, pos = _read_uvarint(buf, pos)
        doc_len.append(n)

    buf = (view_dir / "postings.bin").read_bytes()
    pos = 0
    postings: list[list[tuple[int, int]]] = []
    for _ in range(len(terms)):
        df, pos = _read_uvarint(buf, pos)
        plist = []
        prev = 0
        for _ in range(df):
            gap, pos = _read_uvarint(buf, pos)
            tf, pos = _read_uvarint(buf, pos)
            prev += gap
            plist.append((prev, tf))
        postings.append(plist)

    buf = (view_dir / "forward.bin").read_bytes()
    pos = 0
    docs: list[list[int]] = []
    for _ in range(len(doc_ids)):
        length, pos = _read_uvarint(buf, pos)
        token_ids = []
        for _ in range(length):
            tid, pos = _read_uvarint(buf, pos)
            token_ids.append(tid)
        docs.append(token_ids)

    inv = InvertedIndex(view_id, terms, vocab, postings, doc_len, doc_ids, doc_ordinals)
    fwd = ForwardIndex(view_id, terms, vocab, docs, doc_ids, doc_ordinals)
    return inv, fwd


def save_indices(
    inverted: Mapping[str, InvertedIndex],
    forward: Mapping[str, ForwardIndex],
    root: str | Path,
) -> None:
    root = Path(root)
    for view_id, inv in inverted.items():
        save_view_index(inv, forward[view_id], root / view_id)


def load_indices(root: str | Path) -> tuple[dict[str, InvertedIndex], dict[str, ForwardIndex]]:
    root = Path(root)
    inverted: dict[str, InvertedIndex] = {}
    forward: dict[str, ForwardIndex] = {}
    for view_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        if not (view_dir / "manifest.json").exists():
            continue
        inv, fwd = load_view_index(view_dir)
        inverted[inv.view_id] = inv
        forward[fwd.view_id] = fwd
    return inverted, forward
