"""Lexical translation tables: bitext, EM training, pruning, fast scoring.

Pairs training queries with chunks of their relevant documents, trains
t(query_term | doc_term) by EM (watch the log-likelihood climb), prunes
the table, and scores documents two ways: the naive O(|D| x |q|) route
and the O(|D|) reverse-table route. The two scores are identical, and the
reverse table pays off as soon as one query scores many documents.

Run:  python demos/03_translation_tables.py
"""

import time
from pathlib import Path

from fieldrank import WordPieceVocab, build_indices
from fieldrank.corpus import iter_corpus_tsv
from fieldrank.evaluation import read_qrels
from fieldrank.model1 import (
    Model1ScoreConfig,
    build_bitext,
    collection_lm_from_index,
    model1_log_score,
    precompute_reverse_table,
    prune_table,
    score_with_reverse_table,
    train_model1,
)
from fieldrank.pipeline import default_view_specs, read_queries
from fieldrank.textproc import query_views

DATA = Path(__file__).parent.parent / "data" / "mini"
VIEW = "body.rawtok"

vocab = WordPieceVocab.load(DATA / "wp_vocab.txt")
specs = default_view_specs()
inverted, forward = build_indices(iter_corpus_tsv(DATA / "docs.tsv"), specs, None, vocab)

queries = {
    qid: query_views(text, specs, None, vocab)[VIEW]
    for qid, text in read_queries(DATA / "queries_train.tsv").items()
}
qrels = read_qrels(DATA / "qrels_train.txt")

pairs = build_bitext(queries, qrels, forward[VIEW], target_len=8)
print(f"bitext: {len(pairs)} aligned (query, chunk) pairs from {len(queries)} queries")
print(f"example pair: {pairs[0].target} <- {pairs[0].source}")

table = train_model1(pairs, iterations=8)
print("\nEM log-likelihood per iteration:")
for it, ll in enumerate(table.log_likelihood_history, start=1):
    print(f"  iter {it}: {ll:10.4f}")

print("\nstrongest translations of 'espresso' (document side):")
for target, prob in sorted(table.row_probs("espresso").items(), key=lambda kv: -kv[1])[:5]:
    print(f"  t({target!r} | 'espresso') = {prob:.4f}")

pruned = prune_table(table, min_prob=1e-3, top_n=100)
print(f"\npruning: {table.entry_count()} entries -> {pruned.entry_count()} entries")

cfg = Model1ScoreConfig(
    smoothing_lambda=0.1, self_prob=0.05,
    collection_lm=collection_lm_from_index(inverted[VIEW]),
)
query = query_views("espresso brewing", specs, None, vocab)[VIEW]
rt = precompute_reverse_table(query, pruned, cfg)

print("\nscores (naive == reverse-table, bit for bit):")
for doc_id in ("D01", "D02", "D04"):
    doc = forward[VIEW].tokens(forward[VIEW].ordinal_of(doc_id))
    naive = model1_log_score(query, doc, pruned, cfg)
    fast = score_with_reverse_table(doc, rt, cfg)
    assert fast == naive
    print(f"  {doc_id}: {naive:8.4f}")

repeats = 2000
docs = [forward[VIEW].tokens(i) for i in range(forward[VIEW].doc_count)]
start = time.perf_counter()
for _ in range(repeats):
    for doc in docs:
        model1_log_score(query, doc, pruned, cfg)
naive_time = time.perf_counter() - start
start = time.perf_counter()
rt = precompute_reverse_table(query, pruned, cfg)
for _ in range(repeats):
    for doc in docs:
        score_with_reverse_table(doc, rt, cfg)
fast_time = time.perf_counter() - start
print(f"\nscoring {repeats * len(docs)} docs: naive {naive_time:.3f}s, "
      f"reverse-table {fast_time:.3f}s ({naive_time / fast_time:.1f}x)")
