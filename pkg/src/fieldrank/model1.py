"""Lexical translation scoring: bitext construction, EM training, pruned tables.

The parallel corpus pairs each query with short chunks of its judged-
relevant documents, so both sides have comparable length. EM training
estimates t(query_term | doc_term); scoring computes the smoothed average
log probability of the query given the document:

    (1/|q|) * sum_i ln[ (1-L) * sum_w t'(q_i|w) * c(w,D)/|D|  +  L * P_C(q_i) ]

with t'(q|w) mixing a small self-translation probability into the learned
table. A query-specific reverse table turns the per-document cost from
O(|D| * |q|) into a single pass over the document; both scoring routes
produce identical floating-point values.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import EmptyBitext, EmptyQuery
from .evaluation import Qrels
from .index import ForwardIndex, InvertedIndex

logger = logging.getLogger(__name__)

# Contribution of a zero-probability query term; reachable only without smoothing.
FLOOR_LOG = math.log(1e-10)

DEFAULT_CHUNK_LEN = 16
DEFAULT_ITERATIONS = 5
DEFAULT_PRUNE_MIN_PROB = 1e-3
DEFAULT_PRUNE_TOP_N = 100


@dataclass(frozen=True)
class BitextPair:
    """One aligned pair: target side is the query, source side a document chunk."""

    target: tuple[str, ...]
    source: tuple[str, ...]


@dataclass
class BitextStats:
    pairs: int = 0
    relevant_judgments: int = 0
    missing_documents: int = 0


def chunk_document(tokens: Sequence[str], target_len: int) -> list[list[str]]:
    """Split into consecutive chunks of target_len; a shorter tail chunk is kept.

    Concatenating the output always reproduces the input.
    """
    if target_len < 1:
        raise ValueError("target_len must be >= 1")
    return [list(tokens[i:i + target_len]) for i in range(0, len(tokens), target_len)]


def build_bitext(
    queries: Mapping[str, Sequence[str]],
    qrels: Qrels,
    forward_index: ForwardIndex,
    target_len: int = DEFAULT_CHUNK_LEN,
    stats: BitextStats | None = None,
) -> list[BitextPair]:
    """Pair every judged-relevant document's chunks with its query.

    Judgments naming documents absent from the index are skipped with a
    counted warning; pairs with an empty query or an empty chunk are dropped.
    """
    stats = stats if stats is not None else BitextStats()
    pairs: list[BitextPair] = []
    for qid, query_tokens in queries.items():
        judged = qrels.by_query.get(qid)
        if not judged:
            continue
        target = tuple(query_tokens)
        for doc_id, rel in judged.items():
            if rel < 1:
                continue
            stats.relevant_judgments += 1
            ordinal = forward_index.doc_ordinals.get(doc_id)
            if ordinal is None:
                stats.missing_documents += 1
                logger.warning("bitext: document %s judged for query %s is not indexed", doc_id, qid)
                continue
            if not target:
                continue
            for chunk in chunk_document(forward_index.tokens(ordinal), target_len):
                if chunk:
                    pairs.append(BitextPair(target=target, source=tuple(chunk)))
    stats.pairs = len(pairs)
    return pairs


class TranslationTable:
    """Pruned conditional distributions t(query_term | doc_term).

    Rows are keyed by source (document) term; each row lists (target term,
    probability) in descending probability order. Rows sum to 1 after
    training, and stay <= 1 after pruning unless renormalized.
    """

    def __init__(self, source_terms: list[str], target_terms: list[str],
                 rows: list[list[tuple[int, float]]],
                 metadata: dict[str, int] | None = None):
        self.source_terms = source_terms
        self.target_terms = target_terms
        self.source_ids = {t: i for i, t in enumerate(source_terms)}
        self.target_ids = {t: i for i, t in enumerate(target_terms)}
        self.rows = rows
        self.metadata = dict(metadata or {})
        self._row_maps: list[dict[int, float]] | None = None
        self._reverse_rows: dict[int, list[tuple[int, float]]] | None = None
        self.log_likelihood_history: list[float] = []

    @classmethod
    def from_probs(cls, probs: Mapping[str, Mapping[str, float]],
                   metadata: dict[str, int] | None = None) -> "TranslationTable":
        """Construct from nested {source_term: {target_term: prob}} mappings."""
        source_terms = list(probs)
        target_terms: list[str] = []
        target_ids: dict[str, int] = {}
        for row in probs.values():
            for t in row:
                if t not in target_ids:
                    target_ids[t] = len(target_terms)
                    target_terms.append(t)
        rows = []
        for src in source_terms:
            entries = [(target_ids[t], p) for t, p in probs[src].items()]
            entries.sort(key=lambda e: (-e[1], target_terms[e[0]]))
            rows.append(entries)
        return cls(source_terms, target_terms, rows, metadata)

    def row_map(self, source_term: str) -> dict[int, float] | None:
        """Target-id -> prob lookup for one source term; None when unseen."""
        sid = self.source_ids.get(source_term)
        if sid is None:
            return None
        if self._row_maps is None:
            self._row_maps = [dict(row) for row in self.rows]
        return self._row_maps[sid]

    def prob(self, target_term: str, source_term: str) -> float:
        tid = self.target_ids.get(target_term)
        if tid is None:
            return 0.0
        row = self.row_map(source_term)
        if row is None:
            return 0.0
        return row.get(tid, 0.0)

    def reverse_rows(self) -> dict[int, list[tuple[int, float]]]:
        """Target-major view: target id -> [(source id, prob)], built once."""
        if self._reverse_rows is None:
            rev: dict[int, list[tuple[int, float]]] = {}
            for sid, row in enumerate(self.rows):
                for tid, prob in row:
                    rev.setdefault(tid, []).append((sid, prob))
            self._reverse_rows = rev
        return self._reverse_rows

    def row_probs(self, source_term: str) -> dict[str, float]:
        """Row as {target_term: prob}, mainly for tests and inspection."""
        sid = self.source_ids.get(source_term)
        if sid is None:
            return {}
        return {self.target_terms[tid]: p for tid, p in self.rows[sid]}

    def entry_count(self) -> int:
        return sum(len(row) for row in self.rows)


def train_model1(bitext: Sequence[BitextPair], iterations: int = DEFAULT_ITERATIONS) -> TranslationTable:
    """Estimate t(target | source) by expectation-maximization.

    Starts from a uniform table over co-occurring pairs; each iteration
    distributes every target token's count over the pair's source tokens
    proportionally to the current probabilities, then renormalizes rows.
    The per-iteration corpus log-likelihood (recorded on the returned
    table) is non-decreasing.
    """
    if not bitext:
        raise EmptyBitext("translation training needs at least one pair")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")

    source_terms: list[str] = []
    source_ids: dict[str, int] = {}
    target_terms: list[str] = []
    target_ids: dict[str, int] = {}
    encoded: list[tuple[list[tuple[int, int]], list[tuple[int, int]], int]] = []
    for pair in bitext:
        for tok in pair.target:
            if tok not in target_ids:
                target_ids[tok] = len(target_terms)
                target_terms.append(tok)
        for tok in pair.source:
            if tok not in source_ids:
                source_ids[tok] = len(source_terms)
                source_terms.append(tok)
        tgt_counts = Counter(target_ids[t] for t in pair.target)
        src_counts = Counter(source_ids[t] for t in pair.source)
        encoded.append((list(tgt_counts.items()), list(src_counts.items()), len(pair.source)))

    uniform = 1.0 / len(target_terms)
    t: list[dict[int, float]] = [{} for _ in source_terms]
    for tgt_counts, src_counts, _ in encoded:
        for sid, _ in src_counts:
            row = t[sid]
            for tid, _ in tgt_counts:
                row.setdefault(tid, uniform)

    history: list[float] = []
    for _ in range(iterations):
        counts: list[dict[int, float]] = [{} for _ in source_terms]
        totals = [0.0] * len(source_terms)
        log_likelihood = 0.0
        for tgt_counts, src_counts, src_len in encoded:
            log_len = math.log(src_len)
            for tid, qc in tgt_counts:
                z = 0.0
                for sid, sc in src_counts:
                    z += t[sid].get(tid, 0.0) * sc
                log_likelihood += qc * (math.log(z) - log_len)
                for sid, sc in src_counts:
                    p = t[sid].get(tid, 0.0)
                    if p:
                        share = p * sc / z * qc
                        row = counts[sid]
                        row[tid] = row.get(tid, 0.0) + share
                        totals[sid] += share
        for sid, row_counts in enumerate(counts):
            total = totals[sid]
            t[sid] = {tid: c / total for tid, c in row_counts.items()}
        history.append(log_likelihood)

    rows: list[list[tuple[int, float]]] = []
    for sid in range(len(source_terms)):
        entries = list(t[sid].items())
        entries.sort(key=lambda e: (-e[1], target_terms[e[0]]))
        rows.append(entries)
    table = TranslationTable(
        source_terms, target_terms, rows,
        metadata={"iterations": iterations, "bitext_pairs": len(bitext)},
    )
    table.log_likelihood_history = history
    return table


def prune_table(
    table: TranslationTable,
    min_prob: float = 0.0,
    top_n: int | None = None,
    renormalize: bool = False,
) -> TranslationTable:
    """Keep per row the entries with prob >= min_prob, then the top_n largest.

    top_n=None keeps every surviving entry. With renormalize, surviving
    nonempty rows are rescaled to sum to 1.
    """
    if not 0.0 <= min_prob < 1.0:
        raise ValueError("min_prob must be in [0, 1)")
    if top_n is not None and top_n < 1:
        raise ValueError("top_n must be >= 1")
    rows: list[list[tuple[int, float]]] = []
    for row in table.rows:
        kept = [(tid, p) for tid, p in row if p >= min_prob]
        if top_n is not None:
            kept = kept[:top_n]
        if renormalize and kept:
            mass = sum(p for _, p in kept)
            kept = [(tid, p / mass) for tid, p in kept]
        rows.append(kept)
    return TranslationTable(
        list(table.source_terms), list(table.target_terms), rows, dict(table.metadata)
    )


# --- scoring ---------------------------------------------------------------------


@dataclass
class Model1ScoreConfig:
    """Smoothing for translation log-scores.

    smoothing_lambda mixes in a collection unigram model; self_prob mixes a
    self-translation component into the table probabilities before
    smoothing. collection_lm must cover the target vocabulary and sum to 1
    whenever smoothing_lambda > 0.
    """

    smoothing_lambda: float = 0.1
    self_prob: float = 0.05
    collection_lm: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.smoothing_lambda < 1.0:
            raise ValueError("smoothing_lambda must be in [0, 1)")
        if not 0.0 <= self.self_prob < 1.0:
            raise ValueError("self_prob must be in [0, 1)")
        if self.smoothing_lambda > 0.0:
            if not self.collection_lm:
                raise ValueError("smoothing requires a collection language model")
            mass = sum(self.collection_lm.values())
            if abs(mass - 1.0) > 1e-6:
                raise ValueError(f"collection model sums to {mass!r}, expected 1")

    def collection_prob(self, term: str) -> float:
        return self.collection_lm.get(term, 0.0)


def collection_lm_from_index(index: InvertedIndex) -> dict[str, float]:
    """Maximum-likelihood unigram model of one view's collection."""
    total = index.total_tokens()
    if total == 0:
        return {}
    lm: dict[str, float] = {}
    for tid, term in enumerate(index.terms):
        ctf = sum(tf for _, tf in index.postings[tid])
        if ctf:
            lm[term] = ctf / total
    return lm


def model1_log_score(
    query: Sequence[str],
    doc: Sequence[str],
    table: TranslationTable,
    cfg: Model1ScoreConfig,
) -> float:
    """Average smoothed log translation probability of the query given the doc.

    O(|D| * |q|); the reference route against which the reverse-table fast
    path is checked.
    """
    if not query:
        raise EmptyQuery("translation score needs a nonempty query")
    sums = [0.0] * len(query)
    sp = cfg.self_prob
    one_minus_sp = 1.0 - sp
    if doc:
        dlen = len(doc)
        query_tids = [table.target_ids.get(q) for q in query]
        for w, count in Counter(doc).items():
            frac = count / dlen
            row = table.row_map(w)
            for i, q in enumerate(query):
                tid = query_tids[i]
                t = row.get(tid, 0.0) if (row is not None and tid is not None) else 0.0
                t_prime = one_minus_sp * t + (sp if q == w else 0.0)
                if t_prime != 0.0:
                    sums[i] += t_prime * frac
    lam = cfg.smoothing_lambda
    one_minus_lam = 1.0 - lam
    total = 0.0
    for i, q in enumerate(query):
        inside = one_minus_lam * sums[i] + lam * cfg.collection_prob(q)
        total += math.log(inside) if inside > 0.0 else FLOOR_LOG
    return total / len(query)


@dataclass
class ReverseTable:
    """Query-specific map: doc term -> [(query position, additive contribution)].

    Entries exist for every doc term that can translate some query term,
    plus the query's own terms (self-translation); any other doc term
    contributes nothing, exactly as in the naive route.
    """

    query: tuple[str, ...]
    contributions: dict[str, list[tuple[int, float]]]


def precompute_reverse_table(
    query: Sequence[str],
    table: TranslationTable,
    cfg: Model1ScoreConfig,
) -> ReverseTable:
    """Invert the table for one query so documents can be scored in one pass."""
    if not query:
        raise EmptyQuery("reverse table needs a nonempty query")
    sp = cfg.self_prob
    one_minus_sp = 1.0 - sp
    reverse = table.reverse_rows()
    contributions: dict[str, list[tuple[int, float]]] = {}
    for i, q in enumerate(query):
        tid = table.target_ids.get(q)
        sources: dict[str, float] = {}
        if tid is not None:
            for sid, prob in reverse.get(tid, ()):
                sources[table.source_terms[sid]] = prob
        doc_terms = list(sources)
        if q not in sources:
            doc_terms.append(q)
        for w in doc_terms:
            t = sources.get(w, 0.0)
            t_prime = one_minus_sp * t + (sp if q == w else 0.0)
            if t_prime != 0.0:
                contributions.setdefault(w, []).append((i, t_prime))
    return ReverseTable(query=tuple(query), contributions=contributions)


def score_with_reverse_table(
    doc: Sequence[str],
    rt: ReverseTable,
    cfg: Model1ScoreConfig,
) -> float:
    """Single-pass document scoring; equals model1_log_score bit for bit."""
    sums = [0.0] * len(rt.query)
    if doc:
        dlen = len(doc)
        for w, count in Counter(doc).items():
            entries = rt.contributions.get(w)
            if entries:
                frac = count / dlen
                for i, contrib in entries:
                    sums[i] += contrib * frac
    lam = cfg.smoothing_lambda
    one_minus_lam = 1.0 - lam
    total = 0.0
    for i, q in enumerate(rt.query):
        inside = one_minus_lam * sums[i] + lam * cfg.collection_prob(q)
        total += math.log(inside) if inside > 0.0 else FLOOR_LOG
    return total / len(rt.query)


class Model1Scorer:
    """A trained table plus its smoothing config, ready to score pairs."""

    def __init__(self, table: TranslationTable, cfg: Model1ScoreConfig):
        self.table = table
        self.cfg = cfg

    def score(self, query: Sequence[str], doc: Sequence[str]) -> float:
        return model1_log_score(query, doc, self.table, self.cfg)

    def reverse_table(self, query: Sequence[str]) -> ReverseTable:
        return precompute_reverse_table(query, self.table, self.cfg)

    def score_fast(self, doc: Sequence[str], rt: ReverseTable) -> float:
        return score_with_reverse_table(doc, rt, self.cfg)


# --- persistence -------------------------------------------------------------------


def save_table(table: TranslationTable, path: str | Path) -> None:
    """Write the table: header line, then `source TAB target TAB prob` rows.

    Rows are sorted by source term, entries by descending probability. The
    header counts the vocabulary actually present in the body (pruning can
    empty rows), so a load/save cycle reproduces the file byte for byte.
    """
    iterations = table.metadata.get("iterations", 0)
    pairs = table.metadata.get("bitext_pairs", 0)
    present_sources = sum(1 for row in table.rows if row)
    present_targets = len({tid for row in table.rows for tid, _ in row})
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"model1\tv1\tsource_vocab={present_sources}"
            f"\ttarget_vocab={present_targets}"
            f"\titerations={iterations}\tbitext_pairs={pairs}\n"
        )
        for src in sorted(table.source_terms):
            sid = table.source_ids[src]
            for tid, prob in table.rows[sid]:
                fh.write(f"{src}\t{table.target_terms[tid]}\t{prob!r}\n")


def load_table(path: str | Path) -> TranslationTable:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if not header or header[0] != "model1":
            raise ValueError(f"{path}: not a translation table file")
        meta: dict[str, int] = {}
        for part in header[2:]:
            key, _, value = part.partition("=")
            meta[key] = int(value)
        probs: dict[str, dict[str, float]] = {}
        for line in fh:
            if not line.strip():
                continue
            src, tgt, prob = line.rstrip("\n").split("\t")
            probs.setdefault(src, {})[tgt] = float(prob)
    metadata = {k: meta[k] for k in ("iterations", "bitext_pairs") if k in meta}
    return TranslationTable.from_probs(probs, metadata)


def save_bitext(pairs: Iterable[BitextPair], path: str | Path) -> None:
    """Export pairs as `query_tokens TAB chunk_tokens` lines."""
    with open(path, "w", encoding="utf-8") as fh:
        for pair in pairs:
            fh.write(" ".join(pair.target) + "\t" + " ".join(pair.source) + "\n")


def load_bitext(path: str | Path) -> list[BitextPair]:
    """Read pairs written by save_bitext; tokens never contain whitespace."""
    pairs: list[BitextPair] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            target_text, _, source_text = line.partition("\t")
            pairs.append(BitextPair(
                target=tuple(target_text.split()),
                source=tuple(source_text.split()),
            ))
    return pairs
