"""Corpus ingestion: document records and the readers that stream them.

Two input formats are supported:

* tab-separated lines ``docid <TAB> url <TAB> title <TAB> body``
* JSON lines with keys ``id``, ``url``, ``title``, ``body``

Malformed lines are skipped and counted, never fatal. Files are decoded as
UTF-8 with invalid bytes replaced.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

from .textproc import (
    ATTRIBUTE_NAMES,
    COMBINED_SOURCE,
    FieldViewSpec,
    RawAttribute,
    WordPieceVocab,
    _process_text,
    build_view,
    preprocess_url,
)

logger = logging.getLogger(__name__)


@dataclass
class DocumentRecord:
    """One document: identifier plus its raw textual attributes."""

    doc_id: str
    attributes: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.doc_id:
            raise ValueError("doc_id must be nonempty")
        for name in self.attributes:
            if name not in ATTRIBUTE_NAMES:
                raise ValueError(f"unknown attribute name: {name!r}")

    def attribute(self, name: str) -> str:
        return self.attributes.get(name, "")


@dataclass
class ReadStats:
    """Counts accumulated while streaming a corpus file."""

    read: int = 0
    skipped: int = 0


def iter_corpus_tsv(path: str | Path, stats: ReadStats | None = None) -> Iterator[DocumentRecord]:
    """Stream documents from a 4-column TSV file, skipping malformed lines."""
    stats = stats if stats is not None else ReadStats()
    with open(path, encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 4 or not parts[0]:
                stats.skipped += 1
                logger.warning("%s:%d: malformed corpus line skipped", path, lineno)
                continue
            doc_id, url, title, body = parts
            stats.read += 1
            yield DocumentRecord(doc_id, {"url": url, "title": title, "body": body})


def iter_corpus_jsonl(path: str | Path, stats: ReadStats | None = None) -> Iterator[DocumentRecord]:
    """Stream documents from a JSON-lines file, skipping malformed lines."""
    stats = stats if stats is not None else ReadStats()
    with open(path, encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                doc_id = obj["id"]
            except (json.JSONDecodeError, KeyError, TypeError):
                stats.skipped += 1
                logger.warning("%s:%d: malformed corpus line skipped", path, lineno)
                continue
            if not isinstance(doc_id, str) or not doc_id:
                stats.skipped += 1
                logger.warning("%s:%d: malformed corpus line skipped", path, lineno)
                continue
            attrs = {
                name: str(obj.get(name, "") or "")
                for name in ATTRIBUTE_NAMES
            }
            stats.read += 1
            yield DocumentRecord(doc_id, attrs)


def open_corpus(path: str | Path, fmt: str = "auto", stats: ReadStats | None = None) -> Iterator[DocumentRecord]:
    """Open a corpus file as a document stream; format by extension when auto."""
    fmt = fmt.lower()
    if fmt == "auto":
        fmt = "jsonl" if str(path).endswith((".jsonl", ".json")) else "tsv"
    if fmt == "tsv":
        return iter_corpus_tsv(path, stats)
    if fmt == "jsonl":
        return iter_corpus_jsonl(path, stats)
    raise ValueError(f"unknown corpus format: {fmt!r}")


def document_views(
    record: DocumentRecord,
    specs: Iterable[FieldViewSpec],
    stoplist: frozenset[str] | set[str] | None = None,
    vocab: WordPieceVocab | None = None,
) -> dict[str, list[str]]:
    """Token sequences of every configured view for one document.

    Views sourced from ``all`` concatenate the cleaned url, title and body
    texts before tokenization, so first-stage retrieval can index a single
    combined field.
    """
    out: dict[str, list[str]] = {}
    for spec in specs:
        if spec.source == COMBINED_SOURCE:
            combined = " ".join(
                part
                for part in (
                    preprocess_url(record.attribute("url")),
                    record.attribute("title"),
                    record.attribute("body"),
                )
                if part
            )
            out[spec.view_id] = _process_text(combined, spec, stoplist, vocab)
        else:
            attr = RawAttribute(spec.source, record.attribute(spec.source))
            out[spec.view_id] = build_view(attr, spec, stoplist, vocab)
    return out
