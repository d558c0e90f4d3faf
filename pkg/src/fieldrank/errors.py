"""Exception types raised across the package.

Everything derives from FieldRankError so callers can catch the whole
family at the pipeline boundary while modules raise precise types.
"""

from __future__ import annotations


class FieldRankError(Exception):
    """Base class for all package errors."""


# --- text processing ---------------------------------------------------------

class MissingVocabulary(FieldRankError):
    """A wordpiece view was requested without a piece vocabulary."""


# --- indexing / retrieval ----------------------------------------------------

class DuplicateDocId(FieldRankError):
    """The same document identifier appeared twice during ingestion."""


class EmptyCorpus(FieldRankError):
    """Index build received no documents."""


class EmptyGrid(FieldRankError):
    """BM25 tuning received an empty parameter grid."""


class NoJudgedQueries(FieldRankError):
    """BM25 tuning found no dev query with relevance judgments."""


# --- translation model -------------------------------------------------------

class EmptyBitext(FieldRankError):
    """Model 1 training received no aligned pairs."""


class EmptyQuery(FieldRankError):
    """A translation score was requested for an empty query."""


# --- feature extraction ------------------------------------------------------

class UnknownDocument(FieldRankError):
    """A feature vector was requested for a document absent from the indices."""


# --- learning to rank --------------------------------------------------------

class DegenerateTraining(FieldRankError):
    """No training group has two distinct relevance labels."""


class DimensionMismatch(FieldRankError):
    """A feature vector does not match the model's expected width."""


class MissingFeatures(FieldRankError):
    """A candidate was submitted for re-ranking without a feature vector."""


# --- evaluation --------------------------------------------------------------

class NoEvaluableQueries(FieldRankError):
    """A metric was requested but no query is evaluable under the qrels."""


class ParseError(FieldRankError):
    """A data file failed to parse.

    Carries the path and 1-based line number of the offending line.
    """

    def __init__(self, message: str, path: str = "", line: int = 0):
        super().__init__(f"{path}:{line}: {message}" if path else message)
        self.path = path
        self.line = line


class InconsistentRanks(FieldRankError):
    """A run file's ranks are not contiguous or contradict its scores."""


# --- pipeline ----------------------------------------------------------------

class ConfigError(FieldRankError):
    """The pipeline configuration is invalid or references missing files."""


class MissingArtifact(FieldRankError):
    """A pipeline stage needs an artifact an earlier stage has not produced."""

    def __init__(self, message: str, stage: str = ""):
        super().__init__(message)
        self.stage = stage


class LockHeld(FieldRankError):
    """Another command is already running against the same artifact directory."""
