"""Document attributes become token-sequence views.

One raw document (url, title, body) fans out into several processed
views: cleaned-and-tokenized URLs, lemmatized and stopped words for
matching, raw word tokens for translation features, and BERT-style
wordpieces. Queries get the same treatment so both sides of every
comparison live in the same token space.

Run:  python demos/01_text_views.py
"""

from pathlib import Path

from fieldrank import (
    FieldViewSpec,
    RawAttribute,
    WordPieceVocab,
    build_view,
    lemmatize,
    preprocess_url,
    query_views,
    tokenize_word,
    tokenize_wordpiece,
)

DATA = Path(__file__).parent.parent / "data" / "mini"


def banner(text: str) -> None:
    print(f"\n=== {text} ===")


banner("URL cleanup")
url = "https://www.brew.example.com/espresso-guide?ref=home"
print(f"raw:     {url}")
print(f"cleaned: {preprocess_url(url)}")
print(f"tokens:  {tokenize_word(preprocess_url(url))}")

banner("Word tokenization and lemmatization")
title = "Grinding Fine Espresso Beans"
tokens = tokenize_word(title)
print(f"tokens:  {tokens}")
print(f"lemmas:  {lemmatize(tokens)}")

banner("Wordpieces (greedy longest prefix match)")
vocab = WordPieceVocab.load(DATA / "wp_vocab.txt")
for word in ["brewing", "espresso", "telescopes"]:
    print(f"{word:12s} -> {tokenize_wordpiece(word, vocab)}")

banner("A full document view")
attr = RawAttribute("body", "Brewing espresso requires steady pressure and heat.")
spec = FieldViewSpec("body", lemmatize=True, stop=True)
print(f"view {spec.view_id!r}: {build_view(attr, spec)}")

banner("One query, all views")
specs = [
    FieldViewSpec("body", lemmatize=True, stop=True),
    FieldViewSpec("body"),
    FieldViewSpec("body", scheme="wordpiece"),
]
for view_id, toks in query_views("the brewing of espresso", specs, vocab=vocab).items():
    print(f"{view_id:12s} {toks}")
