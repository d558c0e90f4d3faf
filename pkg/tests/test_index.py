from __future__ import annotations

import math
import random

import pytest

import oracles
from conftest import body_spec, make_corpus, random_token_corpus
from fieldrank.corpus import DocumentRecord
from fieldrank.errors import DuplicateDocId, EmptyCorpus, EmptyGrid, NoJudgedQueries
from fieldrank.evaluation import Qrels
from fieldrank.index import (
    BM25Params,
    build_indices,
    bm25_score,
    idf,
    load_view_index,
    retrieve_topk,
    save_view_index,
    tune_bm25,
)


def build_token_index(docs_tokens: list[list[str]], doc_ids: list[str] | None = None):
    """Index pre-tokenized docs through a raw body view (no lemmatization)."""
    ids = doc_ids or [f"d{i:04d}" for i in range(len(docs_tokens))]
    records = [
        DocumentRecord(doc_id, {"body": " ".join(tokens)})
        for doc_id, tokens in zip(ids, docs_tokens)
    ]
    from fieldrank.textproc import FieldViewSpec
    inv, fwd = build_indices(records, [FieldViewSpec("body", view_id="body.rawtok")])
    return inv["body.rawtok"], fwd["body.rawtok"]


class TestBuildIndices:
    def test_two_doc_counts(self):
        corpus = make_corpus({"d1": "cat", "d2": "cat cat"})
        inv, _ = build_indices(corpus, [body_spec()])
        ix = inv["body.lemm"]
        assert ix.df("cat") == 2
        assert ix.tf("cat", 0) == 1
        assert ix.tf("cat", 1) == 2
        assert ix.doc_count == 2
        assert ix.avg_len == 1.5

    def test_empty_document(self):
        inv, fwd = build_indices(make_corpus({"d1": ""}), [body_spec()])
        ix = inv["body.lemm"]
        assert ix.doc_count == 1
        assert ix.doc_len == [0]
        assert ix.terms == []
        assert fwd["body.lemm"].tokens(0) == []

    def test_duplicate_doc_id(self):
        docs = [DocumentRecord("d1", {"body": "a"}), DocumentRecord("d1", {"body": "b"})]
        with pytest.raises(DuplicateDocId):
            build_indices(docs, [body_spec()])

    def test_empty_corpus(self):
        with pytest.raises(EmptyCorpus):
            build_indices([], [body_spec()])

    def test_forward_inverted_tf_consistency(self):
        rng = random.Random(11)
        docs = random_token_corpus(rng, 40, 25, min_len=0, max_len=20)
        inv, fwd = build_token_index(docs)
        for ordinal in range(inv.doc_count):
            counts = fwd.term_counts(ordinal)
            total_tf = 0
            for term in inv.terms:
                tf = inv.tf(term, ordinal)
                total_tf += tf
                assert counts.get(term, 0) == tf
            assert total_tf == inv.doc_len[ordinal]

    def test_build_is_deterministic_bytes(self, tmp_path):
        corpus = {"d1": "the cat sat", "d2": "a dog ran off", "d3": ""}
        for name in ("one", "two"):
            inv, fwd = build_indices(make_corpus(corpus), [body_spec()])
            save_view_index(inv["body.lemm"], fwd["body.lemm"], tmp_path / name)
        for filename in ("manifest.json", "dictionary.txt", "docids.txt",
                         "doclens.bin", "postings.bin", "forward.bin"):
            assert (tmp_path / "one" / filename).read_bytes() == \
                (tmp_path / "two" / filename).read_bytes()

    def test_save_load_round_trip(self, tmp_path):
        rng = random.Random(5)
        docs = random_token_corpus(rng, 25, 30)
        inv, fwd = build_token_index(docs)
        save_view_index(inv, fwd, tmp_path / "v")
        inv2, fwd2 = load_view_index(tmp_path / "v")
        assert inv2.vocab == inv.vocab
        assert inv2.postings == inv.postings
        assert inv2.doc_len == inv.doc_len
        assert inv2.doc_ids == inv.doc_ids
        assert fwd2.docs == fwd.docs
        save_view_index(inv2, fwd2, tmp_path / "w")
        for filename in ("manifest.json", "postings.bin", "forward.bin"):
            assert (tmp_path / "v" / filename).read_bytes() == \
                (tmp_path / "w" / filename).read_bytes()


class TestIdf:
    def test_every_doc_has_term(self):
        inv, _ = build_indices(make_corpus({"d1": "cat", "d2": "cat cat"}), [body_spec()])
        assert idf(inv["body.lemm"], "cat") == pytest.approx(math.log(1.2), abs=1e-12)

    def test_unseen_term(self):
        inv, _ = build_indices(make_corpus({"d1": "cat"}), [body_spec()])
        assert idf(inv["body.lemm"], "dog") == pytest.approx(math.log(4.0), abs=1e-12)

    def test_decreasing_in_df(self):
        rng = random.Random(2)
        docs = random_token_corpus(rng, 50, 10)
        inv, _ = build_token_index(docs)
        by_df = sorted(inv.terms, key=inv.df)
        idfs = [idf(inv, t) for t in by_df]
        dfs = [inv.df(t) for t in by_df]
        for (df1, v1), (df2, v2) in zip(zip(dfs, idfs), zip(dfs[1:], idfs[1:])):
            if df1 < df2:
                assert v1 > v2


class TestBM25Score:
    @pytest.fixture
    def two_doc_index(self):
        inv, _ = build_indices(make_corpus({"d1": "cat", "d2": "cat cat"}), [body_spec()])
        return inv["body.lemm"]

    def test_disjoint_query(self, two_doc_index):
        assert bm25_score(two_doc_index, BM25Params(), ["dog"], 1) == 0.0

    def test_worked_example(self, two_doc_index):
        # tf=2, dlen=2, avgdl=1.5, k1=1.2, b=0.75
        expected = math.log(1.2) * 4.4 / 3.5
        got = bm25_score(two_doc_index, BM25Params(1.2, 0.75), ["cat"], 1)
        assert got == pytest.approx(expected, abs=1e-12)
        assert got == pytest.approx(0.22920, abs=1e-4)

    def test_b_zero_ignores_length(self):
        inv, _ = build_indices(
            make_corpus({"d1": "cat dog", "d2": "cat " + "filler " * 30}), [body_spec()]
        )
        ix = inv["body.lemm"]
        params = BM25Params(k1=1.2, b=0.0)
        assert bm25_score(ix, params, ["cat"], 0) == pytest.approx(
            bm25_score(ix, params, ["cat"], 1), abs=1e-12
        )

    def test_monotone_in_tf_when_b_zero(self):
        inv, _ = build_indices(
            make_corpus({"d1": "cat", "d2": "cat cat", "d3": "cat cat cat"}), [body_spec()]
        )
        ix = inv["body.lemm"]
        params = BM25Params(k1=1.2, b=0.0)
        scores = [bm25_score(ix, params, ["cat"], i) for i in range(3)]
        assert scores[0] < scores[1] < scores[2]

    def test_query_multiplicity_counts(self, two_doc_index):
        single = bm25_score(two_doc_index, BM25Params(), ["cat"], 1)
        double = bm25_score(two_doc_index, BM25Params(), ["cat", "cat"], 1)
        assert double == pytest.approx(2 * single, abs=1e-12)

    def test_params_validation(self):
        with pytest.raises(ValueError):
            BM25Params(k1=-0.1)
        with pytest.raises(ValueError):
            BM25Params(b=1.5)


class TestRetrieveTopk:
    def test_no_indexed_terms(self):
        inv, _ = build_indices(make_corpus({"d1": "cat"}), [body_spec()])
        assert retrieve_topk(inv["body.lemm"], BM25Params(), ["dog"], k=5).entries == []

    def test_two_doc_example(self):
        inv, _ = build_indices(make_corpus({"d1": "cat", "d2": "cat cat"}), [body_spec()])
        top = retrieve_topk(inv["body.lemm"], BM25Params(1.2, 0.75), ["cat"], k=1)
        assert top.doc_ids() == ["d2"]

    def test_matches_brute_force_small(self):
        rng = random.Random(23)
        docs = random_token_corpus(rng, 200, 40, min_len=0, max_len=25)
        inv, _ = build_token_index(docs)
        params = BM25Params(0.9, 0.4)
        for _ in range(10):
            query = [rng.choice([f"t{i}" for i in range(45)])
                     for _ in range(rng.randint(1, 5))]
            expected_scores = oracles.bm25_all_scores(docs, query, params.k1, params.b)
            for k in (1, 3, 10, 500):
                expected = oracles.topk_by_scores(inv.doc_ids, expected_scores, k)
                got = retrieve_topk(inv, params, query, k=k).entries
                assert [d for d, _ in got] == [d for d, _ in expected]
                for (_, s1), (_, s2) in zip(got, expected):
                    assert s1 == pytest.approx(s2, abs=1e-9)

    def test_tie_break_ascending_doc_id(self):
        # identical documents give identical scores
        docs = [["cat"], ["cat"], ["cat"]]
        inv, _ = build_token_index(docs, ["z", "a", "m"])
        top = retrieve_topk(inv, BM25Params(), ["cat"], k=3)
        assert top.doc_ids() == ["a", "m", "z"]

    def test_fewer_than_k_when_few_match(self):
        inv, _ = build_token_index([["cat"], ["dog"], ["cat", "cat"]])
        top = retrieve_topk(inv, BM25Params(), ["cat"], k=100)
        assert len(top.entries) == 2


class TestTuneBM25:
    def _queries_and_qrels(self, relevant: dict[str, str]):
        queries = {qid: ["q"] for qid in relevant}
        qrels = Qrels()
        for qid, doc_id in relevant.items():
            qrels.add(qid, doc_id, 1)
        return queries, qrels

    def test_single_point_grid(self):
        inv, _ = build_token_index([["q"], ["x"]])
        queries, qrels = self._queries_and_qrels({"q1": "d0000"})
        only = BM25Params(0.7, 0.5)
        assert tune_bm25(inv, queries, qrels, [only]) == only

    def test_empty_grid(self):
        inv, _ = build_token_index([["q"]])
        queries, qrels = self._queries_and_qrels({"q1": "d0000"})
        with pytest.raises(EmptyGrid):
            tune_bm25(inv, queries, qrels, [])

    def test_no_judged_queries(self):
        inv, _ = build_token_index([["q"]])
        with pytest.raises(NoJudgedQueries):
            tune_bm25(inv, {"q1": ["q"]}, Qrels(), [BM25Params()])

    def test_tie_keeps_first_grid_point(self):
        # all docs same length: scores are invariant across the grid
        inv, _ = build_token_index([["q", "a"], ["q", "b"], ["x", "y"]])
        queries, qrels = self._queries_and_qrels({"q1": "d0000"})
        grid = [BM25Params(1.2, 0.3), BM25Params(1.2, 0.9)]
        assert tune_bm25(inv, queries, qrels, grid) == grid[0]

    def test_spam_corpus_prefers_larger_b(self):
        # long spammy docs repeat the query term; the relevant doc is short
        spam = [["q"] * 10 + [f"s{i}_{j}" for j in range(490)] for i in range(3)]
        docs = [["q", "w1", "w2", "w3", "w4"]] + spam
        inv, _ = build_token_index(docs)
        queries, qrels = self._queries_and_qrels({"q1": "d0000"})
        grid = [
            BM25Params(k1, b)
            for k1 in (0.4, 0.8, 1.2, 1.6, 2.0)
            for b in (0.3, 0.45, 0.6, 0.75, 0.9)
        ]
        spam_choice = tune_bm25(inv, queries, qrels, grid)

        neutral = [["q", "a", "b"], ["q", "c", "d"], ["x", "y", "z"]]
        inv_n, _ = build_token_index(neutral)
        neutral_choice = tune_bm25(inv_n, queries, qrels, grid)
        assert spam_choice.b > neutral_choice.b
