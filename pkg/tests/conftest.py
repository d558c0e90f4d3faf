from __future__ import annotations

import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fieldrank.corpus import DocumentRecord
from fieldrank.textproc import FieldViewSpec

FIXTURE_DIR = Path(__file__).parent.parent / "data" / "mini"


@pytest.fixture
def mini_fixture_dir() -> Path:
    return FIXTURE_DIR


def body_spec(view_id: str = "body.lemm") -> FieldViewSpec:
    return FieldViewSpec("body", lemmatize=True, stop=True, view_id=view_id)


def make_corpus(texts: dict[str, str]) -> list[DocumentRecord]:
    return [DocumentRecord(doc_id, {"body": text}) for doc_id, text in texts.items()]


def random_token_corpus(
    rng: random.Random,
    n_docs: int,
    vocab_size: int,
    min_len: int = 1,
    max_len: int = 30,
) -> list[list[str]]:
    vocab = [f"t{i}" for i in range(vocab_size)]
    return [
        [rng.choice(vocab) for _ in range(rng.randint(min_len, max_len))]
        for _ in range(n_docs)
    ]
