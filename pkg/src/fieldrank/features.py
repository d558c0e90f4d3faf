"""The 13-slot feature vector computed for each (query, candidate) pair.

Slot layout (fixed):

    1-3   IDF-normalized BM25 on url.lemm, title.lemm, body.lemm
    4-5   tf-idf cosine similarity on title.lemm, body.lemm
    6-7   query-term overlap fraction on title.lemm, body.lemm
    8-9   proximity scores (unordered / ordered-adjacent) on body.lemm
    10-12 translation log-scores on url.rawtok, title.rawtok, body.rawtok
    13    translation log-score on body.wp

Every value is finite for arbitrary documents: an empty view produces the
operation's zero or floor value rather than an error.

Feature files use SVMlight-style lines:

    label qid:<qid> 1:<v1> ... 13:<v13> # <doc_id>
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import ParseError, UnknownDocument
from .index import BM25Params, ForwardIndex, InvertedIndex, bm25_score, idf
from .model1 import FLOOR_LOG, Model1Scorer, ReverseTable

NUM_FEATURES = 13

FEATURE_SLOTS = (
    "bm25.url.lemm",
    "bm25.title.lemm",
    "bm25.body.lemm",
    "cosine.title.lemm",
    "cosine.body.lemm",
    "overlap.title.lemm",
    "overlap.body.lemm",
    "proximity_unordered.body.lemm",
    "proximity_adjacent.body.lemm",
    "model1.url.rawtok",
    "model1.title.rawtok",
    "model1.body.rawtok",
    "model1.body.wp",
)

BM25_VIEWS = ("url.lemm", "title.lemm", "body.lemm")
COSINE_VIEWS = ("title.lemm", "body.lemm")
OVERLAP_VIEWS = ("title.lemm", "body.lemm")
PROXIMITY_VIEW = "body.lemm"
MODEL1_VIEWS = ("url.rawtok", "title.rawtok", "body.rawtok", "body.wp")


@dataclass(frozen=True)
class ProximityConfig:
    window: int = 8
    k1p: float = 1.2

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.k1p <= 0:
            raise ValueError("k1p must be > 0")


@dataclass(eq=False)
class FeatureVector:
    """Exactly 13 finite reals in the fixed slot order."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (NUM_FEATURES,):
            raise ValueError(f"feature vector must have {NUM_FEATURES} slots")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature vector contains non-finite values")

    def __len__(self) -> int:
        return NUM_FEATURES


def normalized_bm25(
    index: InvertedIndex,
    params: BM25Params,
    query: Sequence[str],
    doc_ordinal: int,
) -> float:
    """BM25 divided by the query's total IDF; 0 when the query carries no IDF."""
    denom = sum(idf(index, t) for t in query)
    if denom == 0.0:
        return 0.0
    return bm25_score(index, params, query, doc_ordinal) / denom


def cosine_sim(
    query: Sequence[str],
    doc: Sequence[str],
    term_idf: Callable[[str], float] | None = None,
) -> float:
    """Cosine of l2-normalized tf-idf vectors with (1 + ln tf) * idf weights."""
    if not query or not doc:
        return 0.0
    weigh = term_idf if term_idf is not None else (lambda _t: 1.0)
    q_weights = {
        t: (1.0 + math.log(tf)) * weigh(t) for t, tf in Counter(query).items()
    }
    d_weights = {
        t: (1.0 + math.log(tf)) * weigh(t) for t, tf in Counter(doc).items()
    }
    q_norm = math.sqrt(sum(w * w for w in q_weights.values()))
    d_norm = math.sqrt(sum(w * w for w in d_weights.values()))
    if q_norm == 0.0 or d_norm == 0.0:
        return 0.0
    dot = sum(w * d_weights[t] for t, w in q_weights.items() if t in d_weights)
    return dot / (q_norm * d_norm)


def overlap_fraction(query: Sequence[str], doc: Sequence[str]) -> float:
    """Fraction of distinct query terms present in the document."""
    distinct = set(query)
    if not distinct:
        return 0.0
    present = distinct.intersection(doc)
    return len(present) / len(distinct)


def proximity_scores(
    query: Sequence[str],
    doc: Sequence[str],
    term_idf: Callable[[str], float],
    cfg: ProximityConfig = ProximityConfig(),
) -> tuple[float, float]:
    """Windowed term-pair scores: (unordered, ordered-adjacent).

    For each unordered pair of distinct query terms, pf counts document
    position pairs within the window that hold the two terms; the pair
    contributes (idf(a)+idf(b)) * pf/(pf+k1p). The unordered feature counts
    any co-occurrence with |i-j| <= window; the adjacent feature counts
    only orientations that appear as consecutive query terms, with
    1 <= j-i <= window. Both are normalized by the total pair IDF, so the
    adjacent score never exceeds the unordered one.

    The counting loop is a backward-looking sliding window: O(|D| * window).
    """
    distinct: list[str] = list(dict.fromkeys(query))
    if len(distinct) < 2:
        return 0.0, 0.0
    qset = set(distinct)
    adjacent = {
        (a, b)
        for a, b in zip(query, query[1:])
        if a != b
    }

    pf_unordered: Counter[tuple[str, str]] = Counter()
    pf_adjacent: Counter[tuple[str, str]] = Counter()
    w = cfg.window
    for j, b in enumerate(doc):
        if b not in qset:
            continue
        for i in range(max(0, j - w), j):
            a = doc[i]
            if a == b or a not in qset:
                continue
            pf_unordered[(a, b) if a < b else (b, a)] += 1
            if (a, b) in adjacent:
                pf_adjacent[(a, b) if a < b else (b, a)] += 1

    k1p = cfg.k1p
    denom = 0.0
    num_unordered = 0.0
    num_adjacent = 0.0
    for x in range(len(distinct)):
        for y in range(x + 1, len(distinct)):
            a, b = distinct[x], distinct[y]
            key = (a, b) if a < b else (b, a)
            pair_idf = term_idf(a) + term_idf(b)
            denom += pair_idf
            pf = pf_unordered.get(key, 0)
            if pf:
                num_unordered += pair_idf * pf / (pf + k1p)
            pf = pf_adjacent.get(key, 0)
            if pf:
                num_adjacent += pair_idf * pf / (pf + k1p)
    if denom == 0.0:
        return 0.0, 0.0
    return num_unordered / denom, num_adjacent / denom


@dataclass
class FeatureConfig:
    bm25_params: BM25Params = field(default_factory=BM25Params)
    proximity: ProximityConfig = field(default_factory=ProximityConfig)


class FeatureExtractor:
    """Computes feature vectors from per-view indices and translation scorers.

    Stateless across queries; per query, the translation scorers' reverse
    tables are built once so each candidate is scored in a single pass over
    its forward-index entries.
    """

    def __init__(
        self,
        inverted: Mapping[str, InvertedIndex],
        forward: Mapping[str, ForwardIndex],
        scorers: Mapping[str, Model1Scorer],
        config: FeatureConfig | None = None,
    ):
        needed_indexed = set(BM25_VIEWS) | set(COSINE_VIEWS) | set(OVERLAP_VIEWS) | {PROXIMITY_VIEW}
        missing = sorted(
            [v for v in needed_indexed if v not in inverted or v not in forward]
            + [v for v in MODEL1_VIEWS if v not in forward]
        )
        if missing:
            raise ValueError(f"feature extraction lacks views: {', '.join(missing)}")
        missing_tables = sorted(v for v in MODEL1_VIEWS if v not in scorers)
        if missing_tables:
            raise ValueError(f"feature extraction lacks translation tables for: {', '.join(missing_tables)}")
        self.inverted = inverted
        self.forward = forward
        self.scorers = scorers
        self.config = config if config is not None else FeatureConfig()

    def _ordinal(self, doc_id: str) -> int:
        ordinals = self.forward[PROXIMITY_VIEW].doc_ordinals
        if doc_id not in ordinals:
            raise UnknownDocument(f"document {doc_id!r} is not indexed")
        return ordinals[doc_id]

    def _reverse_tables(self, query_views: Mapping[str, Sequence[str]]) -> dict[str, ReverseTable | None]:
        tables: dict[str, ReverseTable | None] = {}
        for view in MODEL1_VIEWS:
            q = query_views.get(view, ())
            tables[view] = self.scorers[view].reverse_table(q) if q else None
        return tables

    def vector(self, query_views: Mapping[str, Sequence[str]], doc_id: str) -> FeatureVector:
        """Feature vector for one candidate; see vectors() for batch scoring."""
        return self._vector(query_views, doc_id, self._reverse_tables(query_views))

    def vectors(
        self,
        query_views: Mapping[str, Sequence[str]],
        doc_ids: Sequence[str],
    ) -> list[FeatureVector]:
        """Feature vectors for one query's candidates, sharing reverse tables."""
        reverse = self._reverse_tables(query_views)
        return [self._vector(query_views, doc_id, reverse) for doc_id in doc_ids]

    def _vector(
        self,
        query_views: Mapping[str, Sequence[str]],
        doc_id: str,
        reverse: Mapping[str, ReverseTable | None],
    ) -> FeatureVector:
        ordinal = self._ordinal(doc_id)
        cfg = self.config
        values = np.zeros(NUM_FEATURES, dtype=np.float64)
        slot = 0
        for view in BM25_VIEWS:
            values[slot] = normalized_bm25(
                self.inverted[view], cfg.bm25_params, query_views.get(view, ()), ordinal
            )
            slot += 1
        for view in COSINE_VIEWS:
            values[slot] = cosine_sim(
                query_views.get(view, ()),
                self.forward[view].tokens(ordinal),
                self.inverted[view].idf,
            )
            slot += 1
        for view in OVERLAP_VIEWS:
            values[slot] = overlap_fraction(
                query_views.get(view, ()), self.forward[view].tokens(ordinal)
            )
            slot += 1
        prox_a, prox_b = proximity_scores(
            query_views.get(PROXIMITY_VIEW, ()),
            self.forward[PROXIMITY_VIEW].tokens(ordinal),
            self.inverted[PROXIMITY_VIEW].idf,
            cfg.proximity,
        )
        values[slot] = prox_a
        values[slot + 1] = prox_b
        slot += 2
        for view in MODEL1_VIEWS:
            rt = reverse[view]
            if rt is None:
                values[slot] = FLOOR_LOG
            else:
                values[slot] = self.scorers[view].score_fast(
                    self.forward[view].tokens(ordinal), rt
                )
            slot += 1
        return FeatureVector(values)


def extract_features(
    query_views: Mapping[str, Sequence[str]],
    doc_id: str,
    inverted: Mapping[str, InvertedIndex],
    forward: Mapping[str, ForwardIndex],
    scorers: Mapping[str, Model1Scorer],
    config: FeatureConfig | None = None,
) -> FeatureVector:
    """One-shot form of FeatureExtractor.vector for a single pair."""
    return FeatureExtractor(inverted, forward, scorers, config).vector(query_views, doc_id)


# --- feature file ------------------------------------------------------------------


def write_feature_file(
    path: str | Path,
    rows: Iterable[tuple[int, str, FeatureVector, str]],
) -> int:
    """Write (label, query_id, vector, doc_id) rows in SVMlight style; returns count."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for label, qid, vector, doc_id in rows:
            feats = " ".join(f"{i + 1}:{float(v)!r}" for i, v in enumerate(vector.values))
            fh.write(f"{label} qid:{qid} {feats} # {doc_id}\n")
            n += 1
    return n


def read_feature_file(path: str | Path) -> list[tuple[int, str, FeatureVector, str]]:
    rows: list[tuple[int, str, FeatureVector, str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            body, _, comment = line.partition("#")
            doc_id = comment.strip()
            parts = body.split()
            if len(parts) != 2 + NUM_FEATURES or not parts[1].startswith("qid:"):
                raise ParseError("malformed feature line", str(path), lineno)
            try:
                label = int(parts[0])
                qid = parts[1][len("qid:"):]
                values = np.empty(NUM_FEATURES, dtype=np.float64)
                for i, chunk in enumerate(parts[2:]):
                    key, _, value = chunk.partition(":")
                    if int(key) != i + 1:
                        raise ValueError(f"slot {key} out of order")
                    values[i] = float(value)
            except ValueError as exc:
                raise ParseError(str(exc), str(path), lineno) from None
            rows.append((label, qid, FeatureVector(values), doc_id))
    return rows
