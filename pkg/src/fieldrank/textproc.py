"""Text views: turning raw document attributes and queries into token sequences.

A document carries up to three raw attributes (url, title, body). Each
configured view derives one named token sequence from one attribute, by
composing URL cleanup, word or wordpiece tokenization, rule lemmatization
and stopword removal. All operations here are pure and deterministic:
identical inputs always produce identical token lists.

Token sequences are plain ``list[str]``; the owning view id travels as the
dict key wherever multiple views are handled together.
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

from .errors import MissingVocabulary

ATTRIBUTE_NAMES = ("url", "title", "body")

# Combined pseudo-attribute used for first-stage retrieval views.
COMBINED_SOURCE = "all"

VIEW_SOURCES = ATTRIBUTE_NAMES + (COMBINED_SOURCE,)
VIEW_SCHEMES = ("word", "wordpiece")

# Alphanumeric runs form tokens; underscore and anything else separates.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

_URL_PREFIX_RE = re.compile(r"^(?:https?://|www\.)+", re.IGNORECASE)
_URL_PUNCT_RE = re.compile(r"[./\-_?&=#%]+")

# Lucene's classic English list (33 words); overridable per call or by file.
DEFAULT_STOPLIST: frozenset[str] = frozenset([
    "a", "an", "and", "are", "as", "at", "be", "but", "by", "for", "if",
    "in", "into", "is", "it", "no", "not", "of", "on", "or", "such",
    "that", "the", "their", "then", "there", "these", "they", "this",
    "to", "was", "will", "with",
])


@dataclass(frozen=True)
class RawAttribute:
    """One textual attribute of a document (url, title or body)."""

    name: str
    text: str

    def __post_init__(self):
        if self.name not in ATTRIBUTE_NAMES:
            raise ValueError(f"unknown attribute name: {self.name!r}")


@dataclass(frozen=True)
class FieldViewSpec:
    """Recipe for deriving one token-sequence view from a source attribute.

    ``view_id`` defaults to ``<source>.wp`` for wordpiece views,
    ``<source>.lemm`` for lemmatized word views and ``<source>.rawtok``
    otherwise. Wordpiece views never lemmatize or stop.
    """

    source: str
    scheme: str = "word"
    lemmatize: bool = False
    stop: bool = False
    view_id: str = field(default="")

    def __post_init__(self):
        if self.source not in VIEW_SOURCES:
            raise ValueError(f"unknown view source: {self.source!r}")
        if self.scheme not in VIEW_SCHEMES:
            raise ValueError(f"unknown tokenization scheme: {self.scheme!r}")
        if self.scheme == "wordpiece" and (self.lemmatize or self.stop):
            raise ValueError("wordpiece views cannot be lemmatized or stopped")
        if not self.view_id:
            if self.scheme == "wordpiece":
                suffix = "wp"
            elif self.lemmatize:
                suffix = "lemm"
            else:
                suffix = "rawtok"
            object.__setattr__(self, "view_id", f"{self.source}.{suffix}")


def _normalize(text: str) -> str:
    return unicodedata.normalize("NFC", text).lower()


def tokenize_word(text: str) -> list[str]:
    """Split text into lowercase alphanumeric tokens.

    Punctuation-only runs disappear; "Blu-Ray v2.1" becomes
    ``[blu, ray, v2, 1]``. Total function: empty input gives ``[]``.
    """
    if not text:
        return []
    return _TOKEN_RE.findall(_normalize(text))


def preprocess_url(url: str) -> str:
    """Strip scheme prefixes and turn URL punctuation into spaces.

    ``http://``, ``https://`` and leading ``www.`` are removed
    (case-insensitively); slashes, dots, hyphens, underscores and query
    punctuation become single spaces.
    """
    if not url:
        return ""
    stripped = _URL_PREFIX_RE.sub("", url)
    spaced = _URL_PUNCT_RE.sub(" ", stripped)
    return " ".join(spaced.split())


# --- rule lemmatizer ----------------------------------------------------------

# Irregular forms resolved before any suffix rule fires.
LEMMA_EXCEPTIONS: dict[str, str] = {
    # irregular plurals
    "children": "child", "men": "man", "women": "woman", "feet": "foot",
    "teeth": "tooth", "geese": "goose", "mice": "mouse", "lice": "louse",
    "oxen": "ox", "people": "person", "indices": "index",
    "matrices": "matrix", "vertices": "vertex", "analyses": "analysis",
    "crises": "crisis", "theses": "thesis", "hypotheses": "hypothesis",
    "phenomena": "phenomenon", "criteria": "criterion", "leaves": "leaf",
    "lives": "life", "wives": "wife", "knives": "knife", "wolves": "wolf",
    "halves": "half", "shelves": "shelf", "thieves": "thief",
    "loaves": "loaf", "calves": "calf", "elves": "elf", "scarves": "scarf",
    # irregular verbs
    "went": "go", "gone": "go", "did": "do", "done": "do", "said": "say",
    "made": "make", "took": "take", "taken": "take", "came": "come",
    "saw": "see", "seen": "see", "knew": "know", "known": "know",
    "got": "get", "gave": "give", "given": "give", "found": "find",
    "thought": "think", "bought": "buy", "brought": "bring",
    "built": "build", "sent": "send", "spent": "spend", "left": "leave",
    "felt": "feel", "kept": "keep", "held": "hold", "told": "tell",
    "sold": "sell", "paid": "pay", "met": "meet", "sat": "sit",
    "stood": "stand", "lost": "lose", "won": "win", "wrote": "write",
    "written": "write", "spoke": "speak", "spoken": "speak",
    "broke": "break", "broken": "break", "chose": "choose",
    "chosen": "choose", "drove": "drive", "driven": "drive", "ate": "eat",
    "eaten": "eat", "fell": "fall", "fallen": "fall", "flew": "fly",
    "flown": "fly", "grew": "grow", "grown": "grow", "heard": "hear",
    "led": "lead", "ran": "run",
    # to be / to have, and irregular comparatives
    "is": "be", "was": "be", "are": "be", "were": "be", "been": "be",
    "being": "be", "has": "have", "had": "have", "better": "good",
    "best": "good", "worse": "bad", "worst": "bad",
}

_VOWELS = frozenset("aeiou")
# Doubled finals undone after -ed / -ing removal; ll, ss, zz stay intact
# (falling -> fall, kissing -> kiss) while running -> run.
_UNDOUBLE = frozenset("bdgmnprt")


def _has_vowel(s: str) -> bool:
    return any(c in _VOWELS for c in s)


def _undouble(stem: str) -> str:
    if len(stem) >= 3 and stem[-1] == stem[-2] and stem[-1] in _UNDOUBLE:
        return stem[:-1]
    return stem


def _lemmatize_token(token: str) -> str:
    exception = LEMMA_EXCEPTIONS.get(token)
    if exception is not None:
        return exception
    n = len(token)
    if token.endswith("sses"):
        return token[:-2]
    if token.endswith(("xes", "zes", "ches", "shes")):
        return token[:-2]
    if token.endswith("ies") and n >= 5:
        return token[:-3] + "y"
    if token.endswith("ied") and n >= 5:
        return token[:-3] + "y"
    if token.endswith("eed") and n >= 5:
        return token[:-1]
    if token.endswith("ness") and n >= 6:
        return token[:-4]
    if token.endswith("ful") and n >= 6:
        return token[:-3]
    if token.endswith("ing") and n >= 5 and _has_vowel(token[:-3]):
        return _undouble(token[:-3])
    if token.endswith("ed") and n >= 4 and _has_vowel(token[:-2]):
        return _undouble(token[:-2])
    if token.endswith("ly") and n >= 5:
        return token[:-2]
    if token.endswith("es") and n >= 4:
        return token[:-1]
    if token.endswith("s") and n >= 3 and not token.endswith(("ss", "us", "is")):
        return token[:-1]
    return token


def lemmatize(tokens: list[str]) -> list[str]:
    """Map each token through the exception table, then the suffix rules.

    Output length always equals input length.
    """
    return [_lemmatize_token(t) for t in tokens]


def remove_stopwords(tokens: list[str], stoplist: frozenset[str] | set[str]) -> list[str]:
    """Drop stoplist members, preserving order."""
    return [t for t in tokens if t not in stoplist]


def load_stoplist(path: str | Path) -> frozenset[str]:
    """Read a stoplist file: one word per line, lowercased, blank lines skipped."""
    words = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = line.strip().lower()
            if word:
                words.append(word)
    return frozenset(words)


# --- wordpiece ----------------------------------------------------------------

UNK_PIECE = "[UNK]"
_MAX_WORDPIECE_CHARS = 100


class WordPieceVocab:
    """Ordered wordpiece vocabulary; line number in the file is the piece id."""

    def __init__(self, pieces: list[str], unk_token: str = UNK_PIECE):
        if unk_token not in pieces:
            raise ValueError(f"vocabulary lacks the unknown-piece marker {unk_token!r}")
        self.pieces = list(pieces)
        self.piece_ids = {p: i for i, p in enumerate(self.pieces)}
        if len(self.piece_ids) != len(self.pieces):
            raise ValueError("duplicate pieces in wordpiece vocabulary")
        self.unk_token = unk_token

    def __contains__(self, piece: str) -> bool:
        return piece in self.piece_ids

    def __len__(self) -> int:
        return len(self.pieces)

    @classmethod
    def load(cls, path: str | Path, unk_token: str = UNK_PIECE) -> "WordPieceVocab":
        with open(path, encoding="utf-8") as fh:
            pieces = [line.rstrip("\n") for line in fh]
        pieces = [p for p in pieces if p]
        return cls(pieces, unk_token=unk_token)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for piece in self.pieces:
                fh.write(piece + "\n")


def tokenize_wordpiece(text: str, vocab: WordPieceVocab) -> list[str]:
    """Greedy longest-prefix-match decomposition into wordpieces.

    Text is lowercased and whitespace-split; each word is decomposed
    greedily against the vocabulary, with continuation pieces carrying a
    ``##`` prefix. A word longer than 100 characters, or one with no valid
    decomposition, yields the single unknown-piece marker.
    """
    out: list[str] = []
    for word in _normalize(text).split():
        if len(word) > _MAX_WORDPIECE_CHARS:
            out.append(vocab.unk_token)
            continue
        pieces: list[str] = []
        start = 0
        while start < len(word):
            end = len(word)
            match = None
            while start < end:
                piece = word[start:end]
                if start > 0:
                    piece = "##" + piece
                if piece in vocab:
                    match = piece
                    break
                end -= 1
            if match is None:
                pieces = []
                break
            pieces.append(match)
            start = end
        out.extend(pieces if pieces else [vocab.unk_token])
    return out


# --- view construction ----------------------------------------------------------


def build_view(
    attr: RawAttribute,
    spec: FieldViewSpec,
    stoplist: frozenset[str] | set[str] | None = None,
    vocab: WordPieceVocab | None = None,
) -> list[str]:
    """Produce the token sequence of one view from one raw attribute.

    Composes URL cleanup (url attribute only), tokenization per the view's
    scheme, then optional lemmatization and stopping.
    """
    if spec.source != attr.name:
        raise ValueError(f"view source {spec.source!r} does not match attribute {attr.name!r}")
    text = preprocess_url(attr.text) if attr.name == "url" else attr.text
    return _process_text(text, spec, stoplist, vocab)


def _process_text(
    text: str,
    spec: FieldViewSpec,
    stoplist: frozenset[str] | set[str] | None,
    vocab: WordPieceVocab | None,
) -> list[str]:
    if spec.scheme == "wordpiece":
        if vocab is None:
            raise MissingVocabulary(f"view {spec.view_id!r} needs a wordpiece vocabulary")
        return tokenize_wordpiece(text, vocab)
    tokens = tokenize_word(text)
    if spec.lemmatize:
        tokens = lemmatize(tokens)
    if spec.stop:
        tokens = remove_stopwords(tokens, DEFAULT_STOPLIST if stoplist is None else stoplist)
    return tokens


def query_views(
    text: str,
    specs: list[FieldViewSpec],
    stoplist: frozenset[str] | set[str] | None = None,
    vocab: WordPieceVocab | None = None,
) -> dict[str, list[str]]:
    """Process one query string once per view.

    The query has no attributes, so the same text feeds every view and the
    URL cleanup step never applies.
    """
    return {
        spec.view_id: _process_text(text, spec, stoplist, vocab)
        for spec in specs
    }
