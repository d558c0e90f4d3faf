from __future__ import annotations

import math
import random

import pytest

import oracles
from fieldrank.corpus import DocumentRecord
from fieldrank.errors import EmptyBitext, EmptyQuery
from fieldrank.evaluation import Qrels
from fieldrank.index import build_indices
from fieldrank.model1 import (
    BitextPair,
    BitextStats,
    Model1ScoreConfig,
    TranslationTable,
    build_bitext,
    chunk_document,
    load_bitext,
    load_table,
    model1_log_score,
    precompute_reverse_table,
    prune_table,
    save_bitext,
    save_table,
    score_with_reverse_table,
    train_model1,
)
from fieldrank.textproc import FieldViewSpec

TWO_PAIR_BITEXT = [
    BitextPair(target=("a",), source=("x",)),
    BitextPair(target=("a", "b"), source=("x", "y")),
]


def random_bitext(rng: random.Random, n_pairs: int, vocab: int = 12) -> list[BitextPair]:
    src = [f"w{i}" for i in range(vocab)]
    tgt = [f"q{i}" for i in range(vocab)]
    pairs = []
    for _ in range(n_pairs):
        target = tuple(rng.choice(tgt) for _ in range(rng.randint(1, 4)))
        source = tuple(rng.choice(src) for _ in range(rng.randint(1, 8)))
        pairs.append(BitextPair(target=target, source=source))
    return pairs


class TestChunkDocument:
    def test_sizes(self):
        chunks = chunk_document([f"t{i}" for i in range(10)], 4)
        assert [len(c) for c in chunks] == [4, 4, 2]

    def test_shorter_than_target(self):
        assert chunk_document(["a", "b", "c"], 8) == [["a", "b", "c"]]

    def test_empty(self):
        assert chunk_document([], 4) == []

    def test_reconstruction(self):
        rng = random.Random(17)
        for _ in range(50):
            tokens = [f"t{rng.randint(0, 30)}" for _ in range(rng.randint(0, 64))]
            target_len = rng.randint(1, 12)
            chunks = chunk_document(tokens, target_len)
            assert [t for c in chunks for t in c] == tokens
            assert all(len(c) <= target_len for c in chunks)
            assert all(c for c in chunks)


class TestBuildBitext:
    @pytest.fixture
    def forward(self):
        docs = [
            DocumentRecord("d1", {"body": " ".join(f"t{i}" for i in range(10))}),
            DocumentRecord("d2", {"body": "alpha beta"}),
        ]
        _, fwd = build_indices(docs, [FieldViewSpec("body", view_id="body.rawtok")])
        return fwd["body.rawtok"]

    def test_chunked_pairs_share_query(self, forward):
        qrels = Qrels()
        qrels.add("q1", "d1", 1)
        pairs = build_bitext({"q1": ["foo", "bar"]}, qrels, forward, target_len=4)
        assert len(pairs) == 3
        assert all(p.target == ("foo", "bar") for p in pairs)
        assert [len(p.source) for p in pairs] == [4, 4, 2]

    def test_nonrelevant_contributes_nothing(self, forward):
        qrels = Qrels()
        qrels.add("q1", "d1", 0)
        assert build_bitext({"q1": ["foo"]}, qrels, forward, 4) == []

    def test_empty_qrels(self, forward):
        assert build_bitext({"q1": ["foo"]}, Qrels(), forward, 4) == []

    def test_missing_document_counted(self, forward):
        qrels = Qrels()
        qrels.add("q1", "ghost", 2)
        qrels.add("q1", "d2", 1)
        stats = BitextStats()
        pairs = build_bitext({"q1": ["foo"]}, qrels, forward, 4, stats)
        assert stats.missing_documents == 1
        assert len(pairs) == 1

    def test_empty_query_dropped(self, forward):
        qrels = Qrels()
        qrels.add("q1", "d1", 1)
        assert build_bitext({"q1": []}, qrels, forward, 4) == []

    def test_file_round_trip(self, tmp_path, forward):
        qrels = Qrels()
        qrels.add("q1", "d1", 1)
        qrels.add("q1", "d2", 2)
        pairs = build_bitext({"q1": ["foo", "bar"]}, qrels, forward, 3)
        path = tmp_path / "bitext.txt"
        save_bitext(pairs, path)
        assert load_bitext(path) == pairs


class TestTrainModel1:
    def test_two_pair_alignment(self):
        table = train_model1(TWO_PAIR_BITEXT, iterations=10)
        assert table.prob("a", "x") > 0.9
        assert table.prob("b", "y") > 0.9

    def test_matches_independent_em(self):
        rng = random.Random(31)
        for trial in range(5):
            bitext = random_bitext(rng, rng.randint(2, 15))
            iterations = rng.randint(1, 6)
            table = train_model1(bitext, iterations=iterations)
            expected = oracles.model1_em(
                [(list(p.target), list(p.source)) for p in bitext], iterations
            )
            for (q, w), p in expected.items():
                assert table.prob(q, w) == pytest.approx(p, abs=1e-9), (trial, q, w)

    def test_single_pair_forced(self):
        table = train_model1([BitextPair(("a",), ("x",))], iterations=1)
        assert table.prob("a", "x") == pytest.approx(1.0, abs=1e-12)

    def test_rows_sum_to_one(self):
        rng = random.Random(13)
        table = train_model1(random_bitext(rng, 20), iterations=4)
        for row in table.rows:
            assert sum(p for _, p in row) == pytest.approx(1.0, abs=1e-9)

    def test_log_likelihood_non_decreasing(self):
        rng = random.Random(41)
        for _ in range(10):
            table = train_model1(random_bitext(rng, rng.randint(2, 12)), iterations=6)
            history = table.log_likelihood_history
            for earlier, later in zip(history, history[1:]):
                assert later >= earlier - 1e-9 * abs(earlier)

    def test_empty_bitext(self):
        with pytest.raises(EmptyBitext):
            train_model1([], iterations=1)

    def test_rows_sorted_descending(self):
        rng = random.Random(3)
        table = train_model1(random_bitext(rng, 25), iterations=3)
        for row in table.rows:
            probs = [p for _, p in row]
            assert probs == sorted(probs, reverse=True)


class TestPruneTable:
    @pytest.fixture
    def table(self):
        return TranslationTable.from_probs({"x": {"a": 0.6, "b": 0.3, "c": 0.1}})

    def test_identity_pruning(self, table):
        pruned = prune_table(table, min_prob=0.0, top_n=None, renormalize=False)
        assert pruned.rows == table.rows
        assert pruned.source_terms == table.source_terms
        assert pruned.target_terms == table.target_terms

    def test_top_n_with_renormalize(self, table):
        pruned = prune_table(table, top_n=2, renormalize=True)
        row = pruned.row_probs("x")
        assert row["a"] == pytest.approx(2 / 3, abs=1e-12)
        assert row["b"] == pytest.approx(1 / 3, abs=1e-12)
        assert "c" not in row

    def test_min_prob_without_renormalize(self, table):
        pruned = prune_table(table, min_prob=0.5)
        assert pruned.row_probs("x") == {"a": 0.6}

    def test_increasing_min_prob_never_adds_mass(self):
        rng = random.Random(19)
        table = train_model1(random_bitext(rng, 20), iterations=3)
        thresholds = [0.0, 0.01, 0.05, 0.2, 0.5]
        previous = None
        for threshold in thresholds:
            pruned = prune_table(table, min_prob=threshold)
            masses = [sum(p for _, p in row) for row in pruned.rows]
            if previous is not None:
                assert all(m2 <= m1 + 1e-15 for m1, m2 in zip(previous, masses))
            previous = masses


class TestModel1Score:
    def test_perfect_translation(self):
        table = TranslationTable.from_probs({"x": {"a": 1.0}})
        cfg = Model1ScoreConfig(smoothing_lambda=0.0, self_prob=0.0)
        assert model1_log_score(["a"], ["x"], table, cfg) == 0.0

    def test_floor_when_untranslatable(self):
        table = TranslationTable.from_probs({"y": {"z": 1.0}})
        cfg = Model1ScoreConfig(smoothing_lambda=0.0, self_prob=0.0)
        score = model1_log_score(["a"], ["y"], table, cfg)
        assert score == pytest.approx(math.log(1e-10), abs=1e-12)

    def test_worked_smoothed_example(self):
        table = TranslationTable.from_probs({"x": {"a": 0.5, "b": 0.25}})
        cfg = Model1ScoreConfig(
            smoothing_lambda=0.2, self_prob=0.0,
            collection_lm={"a": 0.5, "b": 0.5},
        )
        expected = (math.log(0.5) + math.log(0.3)) / 2
        got = model1_log_score(["a", "b"], ["x", "x"], table, cfg)
        assert got == pytest.approx(expected, abs=1e-12)
        assert got == pytest.approx(-0.94856, abs=1e-5)

    def test_against_independent_scorer(self):
        rng = random.Random(47)
        for _ in range(25):
            bitext = random_bitext(rng, rng.randint(2, 10))
            table = train_model1(bitext, iterations=3)
            flat = {
                (table.target_terms[tid], src): p
                for src_id, src in enumerate(table.source_terms)
                for tid, p in table.rows[src_id]
            }
            vocab = [f"w{i}" for i in range(12)] + [f"q{i}" for i in range(12)]
            query = [rng.choice(vocab) for _ in range(rng.randint(1, 5))]
            doc = [rng.choice(vocab) for _ in range(rng.randint(0, 30))]
            lam = rng.choice([0.0, 0.1, 0.3])
            sp = rng.choice([0.0, 0.05, 0.2])
            collection = {t: 1.0 / len(vocab) for t in vocab}
            cfg = Model1ScoreConfig(
                smoothing_lambda=lam, self_prob=sp,
                collection_lm=collection if lam > 0 else {},
            )
            expected = oracles.model1_score(query, doc, flat, lam, sp, collection if lam > 0 else {})
            got = model1_log_score(query, doc, table, cfg)
            assert got == pytest.approx(expected, abs=1e-12)

    def test_empty_doc_degrades_to_collection(self):
        table = TranslationTable.from_probs({"x": {"a": 1.0}})
        cfg = Model1ScoreConfig(
            smoothing_lambda=0.25, self_prob=0.0, collection_lm={"a": 1.0}
        )
        assert model1_log_score(["a"], [], table, cfg) == pytest.approx(
            math.log(0.25), abs=1e-12
        )

    def test_empty_query_raises(self):
        table = TranslationTable.from_probs({"x": {"a": 1.0}})
        cfg = Model1ScoreConfig(smoothing_lambda=0.0, self_prob=0.0)
        with pytest.raises(EmptyQuery):
            model1_log_score([], ["x"], table, cfg)

    def test_self_translation_mixin(self):
        # unseen doc term equal to the query term still contributes
        table = TranslationTable.from_probs({"x": {"a": 1.0}})
        cfg = Model1ScoreConfig(smoothing_lambda=0.0, self_prob=0.5)
        got = model1_log_score(["novel"], ["novel"], table, cfg)
        assert got == pytest.approx(math.log(0.5), abs=1e-12)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            Model1ScoreConfig(smoothing_lambda=0.2, collection_lm={})
        with pytest.raises(ValueError):
            Model1ScoreConfig(smoothing_lambda=0.2, collection_lm={"a": 0.7})
        with pytest.raises(ValueError):
            Model1ScoreConfig(smoothing_lambda=1.0, collection_lm={"a": 1.0})


class TestReverseTable:
    def test_single_entry(self):
        table = TranslationTable.from_probs({"x": {"a": 1.0}})
        cfg = Model1ScoreConfig(smoothing_lambda=0.0, self_prob=0.0)
        rt = precompute_reverse_table(["a"], table, cfg)
        assert rt.contributions["x"] == [(0, 1.0)]

    def test_duplicate_query_terms_share_contributions(self):
        table = TranslationTable.from_probs({"x": {"a": 0.7}})
        cfg = Model1ScoreConfig(smoothing_lambda=0.0, self_prob=0.0)
        rt = precompute_reverse_table(["a", "a"], table, cfg)
        entries = rt.contributions["x"]
        assert [i for i, _ in entries] == [0, 1]
        assert entries[0][1] == entries[1][1]

    def test_empty_query_raises(self):
        table = TranslationTable.from_probs({"x": {"a": 1.0}})
        cfg = Model1ScoreConfig(smoothing_lambda=0.0, self_prob=0.0)
        with pytest.raises(EmptyQuery):
            precompute_reverse_table([], table, cfg)

    def test_exactly_equals_naive_score(self):
        rng = random.Random(59)
        vocab = [f"w{i}" for i in range(12)] + [f"q{i}" for i in range(12)]
        for _ in range(100):
            bitext = random_bitext(rng, rng.randint(2, 10))
            table = train_model1(bitext, iterations=2)
            if rng.random() < 0.5:
                table = prune_table(table, min_prob=0.05, top_n=5,
                                    renormalize=rng.random() < 0.5)
            lam = rng.choice([0.0, 0.1, 0.4])
            cfg = Model1ScoreConfig(
                smoothing_lambda=lam,
                self_prob=rng.choice([0.0, 0.05, 0.3]),
                collection_lm={t: 1.0 / len(vocab) for t in vocab} if lam else {},
            )
            query = [rng.choice(vocab) for _ in range(rng.randint(1, 8))]
            rt = precompute_reverse_table(query, table, cfg)
            for _ in range(3):
                doc = [rng.choice(vocab) for _ in range(rng.randint(0, 256))]
                naive = model1_log_score(query, doc, table, cfg)
                fast = score_with_reverse_table(doc, rt, cfg)
                assert fast == naive  # bit-for-bit


class TestTableFile:
    def test_round_trip_values(self, tmp_path):
        rng = random.Random(7)
        table = train_model1(random_bitext(rng, 15), iterations=3)
        path = tmp_path / "t.table"
        save_table(table, path)
        loaded = load_table(path)
        assert loaded.metadata == {"iterations": 3, "bitext_pairs": 15}
        for src in table.source_terms:
            assert loaded.row_probs(src) == table.row_probs(src)

    def test_write_read_write_byte_identical(self, tmp_path):
        rng = random.Random(29)
        table = train_model1(random_bitext(rng, 15), iterations=2)
        table = prune_table(table, min_prob=0.2)
        first = tmp_path / "a.table"
        second = tmp_path / "b.table"
        save_table(table, first)
        save_table(load_table(first), second)
        assert first.read_bytes() == second.read_bytes()
