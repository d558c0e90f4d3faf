from __future__ import annotations

import random

import pytest

from fieldrank.errors import MissingVocabulary
from fieldrank.textproc import (
    DEFAULT_STOPLIST,
    FieldViewSpec,
    LEMMA_EXCEPTIONS,
    RawAttribute,
    WordPieceVocab,
    build_view,
    lemmatize,
    load_stoplist,
    preprocess_url,
    query_views,
    remove_stopwords,
    tokenize_word,
    tokenize_wordpiece,
)


class TestTokenizeWord:
    def test_empty(self):
        assert tokenize_word("") == []

    def test_punctuation_and_case(self):
        assert tokenize_word("The Rain, in Spain.") == ["the", "rain", "in", "spain"]

    def test_alnum_split(self):
        assert tokenize_word("Blu-Ray v2.1") == ["blu", "ray", "v2", "1"]

    def test_punctuation_only(self):
        assert tokenize_word("... --- !!!") == []

    def test_underscore_is_separator(self):
        assert tokenize_word("snake_case_name") == ["snake", "case", "name"]

    def test_no_empty_or_whitespace_tokens(self):
        for text in ["a  b", " x ", "a\tb\nc", "ünïcode tëxt"]:
            for tok in tokenize_word(text):
                assert tok
                assert not any(c.isspace() for c in tok)


class TestPreprocessUrl:
    def test_empty(self):
        assert preprocess_url("") == ""

    def test_scheme_and_punctuation(self):
        assert preprocess_url("http://example.com/a-b/c") == "example com a b c"

    def test_www_and_query_string(self):
        assert preprocess_url("https://www.foo.org/page?id=3") == "foo org page id 3"

    def test_case_insensitive_prefix(self):
        assert preprocess_url("HTTP://Example.COM/Path") == "Example COM Path"

    def test_composes_with_tokenizer(self):
        assert tokenize_word(preprocess_url("https://www.foo.org/page?id=3")) == [
            "foo", "org", "page", "id", "3",
        ]


class TestLemmatize:
    def test_empty(self):
        assert lemmatize([]) == []

    def test_suffix_rules(self):
        assert lemmatize(["running", "houses"]) == ["run", "house"]

    def test_exception_dictionary(self):
        assert lemmatize(["children"]) == ["child"]

    def test_exception_table_is_large_enough(self):
        assert len(LEMMA_EXCEPTIONS) >= 50

    @pytest.mark.parametrize("word,lemma", [
        ("cities", "city"),
        ("classes", "class"),
        ("boxes", "box"),
        ("churches", "church"),
        ("cats", "cat"),
        ("stopped", "stop"),
        ("wanted", "want"),
        ("falling", "fall"),
        ("studied", "study"),
        ("agreed", "agree"),
        ("quickly", "quick"),
        ("darkness", "dark"),
        ("mice", "mouse"),
        ("women", "woman"),
        ("bus", "bus"),
        ("class", "class"),
        ("analysis", "analysis"),
    ])
    def test_rule_table(self, word, lemma):
        assert lemmatize([word]) == [lemma]

    def test_length_preserved(self):
        rng = random.Random(7)
        words = ["".join(rng.choice("abcdest") for _ in range(rng.randint(1, 10)))
                 for _ in range(500)]
        assert len(lemmatize(words)) == len(words)

    def test_never_produces_empty_tokens(self):
        rng = random.Random(91)
        alphabet = "abcdefginorstuy"
        words = ["".join(rng.choice(alphabet) for _ in range(rng.randint(1, 12)))
                 for _ in range(2000)]
        words += ["s", "es", "ies", "ing", "ed", "ly", "ness", "ful", "xes", "sses"]
        for lemma in lemmatize(words):
            assert lemma
            assert not any(c.isspace() for c in lemma)


class TestRemoveStopwords:
    def test_single_removal(self):
        assert remove_stopwords(["the", "cat"], {"the"}) == ["cat"]

    def test_all_removed(self):
        assert remove_stopwords(["the", "the"], {"the"}) == []

    def test_order_preserved(self):
        assert remove_stopwords(["a", "cat", "on", "a", "mat"], {"a", "on"}) == ["cat", "mat"]

    def test_idempotent(self):
        rng = random.Random(3)
        tokens = [rng.choice(["the", "cat", "sat", "a", "mat"]) for _ in range(200)]
        once = remove_stopwords(tokens, DEFAULT_STOPLIST)
        assert remove_stopwords(once, DEFAULT_STOPLIST) == once

    def test_stoplist_file(self, tmp_path):
        path = tmp_path / "stop.txt"
        path.write_text("the\n\non\n", encoding="utf-8")
        assert load_stoplist(path) == frozenset({"the", "on"})


class TestWordPiece:
    @pytest.fixture
    def vocab(self):
        return WordPieceVocab(["[UNK]", "un", "##aff", "##able", "want", "##ed"])

    def test_empty(self, vocab):
        assert tokenize_wordpiece("", vocab) == []

    def test_canonical_decomposition(self, vocab):
        assert tokenize_wordpiece("unaffable", vocab) == ["un", "##aff", "##able"]

    def test_no_decomposition(self, vocab):
        assert tokenize_wordpiece("qqq", vocab) == ["[UNK]"]

    def test_word_too_long(self, vocab):
        assert tokenize_wordpiece("un" * 51, vocab) == ["[UNK]"]

    def test_multiple_words(self, vocab):
        assert tokenize_wordpiece("wanted unaffable", vocab) == [
            "want", "##ed", "un", "##aff", "##able",
        ]

    def test_round_trip_reconstruction(self, vocab):
        for word in ["unaffable", "wanted", "un"]:
            pieces = tokenize_wordpiece(word, vocab)
            assert "[UNK]" not in pieces
            rebuilt = pieces[0] + "".join(p[2:] for p in pieces[1:])
            assert rebuilt == word

    def test_vocab_requires_unk(self):
        with pytest.raises(ValueError):
            WordPieceVocab(["un", "##aff"])

    def test_vocab_file_round_trip(self, tmp_path, vocab):
        path = tmp_path / "vocab.txt"
        vocab.save(path)
        loaded = WordPieceVocab.load(path)
        assert loaded.pieces == vocab.pieces
        assert loaded.piece_ids["##aff"] == vocab.piece_ids["##aff"]

    def test_output_pieces_always_in_vocab(self, vocab):
        rng = random.Random(17)
        for _ in range(300):
            word = "".join(rng.choice("unafble dqz") for _ in range(rng.randint(1, 15)))
            for piece in tokenize_wordpiece(word, vocab):
                assert piece in vocab or piece == vocab.unk_token


class TestFieldViewSpec:
    def test_default_view_ids(self):
        assert FieldViewSpec("body", lemmatize=True, stop=True).view_id == "body.lemm"
        assert FieldViewSpec("title").view_id == "title.rawtok"
        assert FieldViewSpec("body", scheme="wordpiece").view_id == "body.wp"

    def test_wordpiece_rejects_lemmatize(self):
        with pytest.raises(ValueError):
            FieldViewSpec("body", scheme="wordpiece", lemmatize=True)

    def test_unknown_source(self):
        with pytest.raises(ValueError):
            FieldViewSpec("footer")


class TestBuildView:
    def test_url_composition(self):
        attr = RawAttribute("url", "http://a.com/b")
        spec = FieldViewSpec("url", view_id="url.rawtok")
        assert build_view(attr, spec) == ["a", "com", "b"]

    def test_empty_body(self):
        attr = RawAttribute("body", "")
        assert build_view(attr, FieldViewSpec("body")) == []

    def test_lemmatize_and_stop(self):
        attr = RawAttribute("title", "Running Shoes")
        spec = FieldViewSpec("title", lemmatize=True, stop=True)
        assert build_view(attr, spec, stoplist=frozenset()) == ["run", "shoe"]

    def test_source_mismatch(self):
        with pytest.raises(ValueError):
            build_view(RawAttribute("body", "x"), FieldViewSpec("title"))

    def test_missing_vocabulary(self):
        attr = RawAttribute("body", "hello")
        with pytest.raises(MissingVocabulary):
            build_view(attr, FieldViewSpec("body", scheme="wordpiece"))

    def test_deterministic(self):
        attr = RawAttribute("body", "The cats were running, fast!")
        spec = FieldViewSpec("body", lemmatize=True, stop=True)
        assert build_view(attr, spec) == build_view(attr, spec)


class TestQueryViews:
    def test_one_sequence_per_view(self):
        vocab = WordPieceVocab(["[UNK]", "run", "##ning", "shoes", "shoe"])
        specs = [
            FieldViewSpec("body", lemmatize=True, stop=True),
            FieldViewSpec("body"),
            FieldViewSpec("body", scheme="wordpiece"),
        ]
        views = query_views("Running Shoes", specs, vocab=vocab)
        assert views["body.lemm"] == ["run", "shoe"]
        assert views["body.rawtok"] == ["running", "shoes"]
        assert views["body.wp"] == ["run", "##ning", "shoes"]
