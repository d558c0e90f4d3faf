"""fieldrank: traditional multi-stage retrieval over multi-field documents.

Tuned BM25 candidate generation, a 13-slot feature extractor built on
per-view forward indices and EM-trained lexical translation tables, a
LambdaMART re-ranker, and TREC-style evaluation.
"""

from .corpus import DocumentRecord, open_corpus
from .errors import FieldRankError
from .evaluation import Qrels, Run, mrr_at_k, ndcg_at_k, read_qrels, read_run, write_qrels, write_run
from .features import (
    FEATURE_SLOTS,
    FeatureConfig,
    FeatureExtractor,
    FeatureVector,
    NUM_FEATURES,
    ProximityConfig,
    cosine_sim,
    normalized_bm25,
    overlap_fraction,
    proximity_scores,
)
from .index import (
    BM25Params,
    CandidateList,
    ForwardIndex,
    InvertedIndex,
    bm25_score,
    build_indices,
    idf,
    load_indices,
    retrieve_topk,
    save_indices,
    tune_bm25,
)
from .ltr import (
    EnsembleModel,
    LambdaMARTParams,
    RegressionTree,
    TrainingSet,
    load_model,
    predict,
    rerank,
    save_model,
    train_lambdamart,
)
from .model1 import (
    BitextPair,
    Model1ScoreConfig,
    Model1Scorer,
    TranslationTable,
    build_bitext,
    chunk_document,
    collection_lm_from_index,
    load_table,
    model1_log_score,
    precompute_reverse_table,
    prune_table,
    save_table,
    score_with_reverse_table,
    train_model1,
)
from .textproc import (
    FieldViewSpec,
    RawAttribute,
    WordPieceVocab,
    build_view,
    lemmatize,
    preprocess_url,
    query_views,
    remove_stopwords,
    tokenize_word,
    tokenize_wordpiece,
)

__version__ = "0.1.0"
