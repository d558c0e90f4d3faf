"""The 13-slot feature vector and the LambdaMART re-ranker.

Builds the full feature stack over the mini corpus (field BM25, cosine,
overlap, proximity, four translation scores), prints one candidate's
vector slot by slot, trains a small LambdaMART ensemble on the training
split, and re-ranks one query's BM25 candidates.

Run:  python demos/04_features_and_reranking.py
"""

from pathlib import Path

from fieldrank import BM25Params, WordPieceVocab, build_indices, retrieve_topk
from fieldrank.evaluation import read_qrels
from fieldrank.corpus import iter_corpus_tsv
from fieldrank.features import FEATURE_SLOTS, FeatureConfig, FeatureExtractor
from fieldrank.ltr import LambdaMARTParams, TrainingSet, predict, rerank, train_lambdamart
from fieldrank.model1 import (
    Model1ScoreConfig,
    Model1Scorer,
    build_bitext,
    collection_lm_from_index,
    train_model1,
)
from fieldrank.pipeline import RETRIEVAL_VIEW, default_view_specs, read_queries
from fieldrank.textproc import query_views

DATA = Path(__file__).parent.parent / "data" / "mini"
MODEL1_VIEWS = ("url.rawtok", "title.rawtok", "body.rawtok", "body.wp")

vocab = WordPieceVocab.load(DATA / "wp_vocab.txt")
specs = default_view_specs()
inverted, forward = build_indices(iter_corpus_tsv(DATA / "docs.tsv"), specs, None, vocab)
train_queries = read_queries(DATA / "queries_train.tsv")
train_qrels = read_qrels(DATA / "qrels_train.txt")
query_views_by_id = {
    qid: query_views(text, specs, None, vocab) for qid, text in train_queries.items()
}

scorers = {}
for view in MODEL1_VIEWS:
    pairs = build_bitext(
        {qid: views[view] for qid, views in query_views_by_id.items()},
        train_qrels, forward[view], target_len=8,
    )
    scorers[view] = Model1Scorer(
        train_model1(pairs, iterations=5),
        Model1ScoreConfig(smoothing_lambda=0.1, self_prob=0.05,
                          collection_lm=collection_lm_from_index(inverted[view])),
    )

params = BM25Params(k1=1.2, b=0.75)
extractor = FeatureExtractor(inverted, forward, scorers, FeatureConfig(bm25_params=params))

print("feature vector for query 'espresso brewing' vs document D01:")
views = query_views_by_id["qt1"]
vector = extractor.vector(views, "D01")
for name, value in zip(FEATURE_SLOTS, vector.values):
    print(f"  {name:32s} {value:9.4f}")

print("\ntraining LambdaMART on the train split candidates...")
training = TrainingSet()
for qid, qviews in query_views_by_id.items():
    candidates = retrieve_topk(inverted[RETRIEVAL_VIEW], params, qviews[RETRIEVAL_VIEW], k=1000)
    doc_ids = candidates.doc_ids()
    for doc_id, vec in zip(doc_ids, extractor.vectors(qviews, doc_ids)):
        training.add(qid, doc_id, vec, train_qrels.relevance(qid, doc_id))
model = train_lambdamart(training, LambdaMARTParams(
    num_trees=25, num_leaves=5, learning_rate=0.1, min_leaf_instances=2))
history = model.training_ndcg_history
print(f"  {len(model.trees)} trees; train NDCG@10 {history[0]:.3f} -> {history[-1]:.3f}")

print("\nre-ranking a held-out query: 'espresso coffee brewing'")
test_views = query_views("espresso coffee brewing", specs, None, vocab)
candidates = retrieve_topk(inverted[RETRIEVAL_VIEW], params, test_views[RETRIEVAL_VIEW], k=1000)
doc_ids = candidates.doc_ids()
features = dict(zip(doc_ids, extractor.vectors(test_views, doc_ids)))
reranked = rerank(candidates, features, model)
print(f"  {'BM25 order':20s} {'model order':20s}")
for (bm_doc, bm_score), (lt_doc, lt_score) in zip(candidates.entries, reranked.entries):
    print(f"  {bm_doc} {bm_score:8.4f}      {lt_doc} {lt_score:8.4f}")
assert reranked.entries[0][1] == predict(model, features[reranked.entries[0][0]])
