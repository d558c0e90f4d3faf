"""LambdaMART: gradient-boosted regression trees driven by NDCG-swap lambdas.

Each boosting round scores the training set, derives per-document lambda
gradients (and second-order weights) from label-discordant pairs inside
each query group, fits a regression tree to the lambdas with exact greedy
variance-reduction splits, sets leaf outputs by a Newton step, and adds
the tree scaled by the learning rate.

Documents are canonicalized (groups by query id, docs by doc id) before
training, so the learned model is invariant to input order. Trees use the
rule: go left iff feature value <= threshold.

Model file format (text, versioned): a header with feature_count,
learning_rate and num_trees, then per tree its node count and a pre-order
node list of ``split <slot> <threshold>`` / ``leaf <value>`` lines with
1-based feature slots.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import (
    DegenerateTraining,
    DimensionMismatch,
    MissingFeatures,
    ParseError,
)
from .evaluation import ndcg_of_ranking
from .features import NUM_FEATURES, FeatureVector
from .index import CandidateList

MODEL_FORMAT_MAGIC = "fieldrank-ltr"
MODEL_FORMAT_VERSION = "v1"


@dataclass
class LambdaMARTParams:
    num_trees: int = 300
    num_leaves: int = 10
    learning_rate: float = 0.1
    min_leaf_instances: int = 20
    ndcg_truncation: int = 10
    sigma: float = 1.0

    def __post_init__(self):
        if self.num_trees < 0:
            raise ValueError("num_trees must be >= 0")
        if self.num_leaves < 2:
            raise ValueError("num_leaves must be >= 2")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.min_leaf_instances < 1:
            raise ValueError("min_leaf_instances must be >= 1")
        if self.ndcg_truncation < 1:
            raise ValueError("ndcg_truncation must be >= 1")
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")


@dataclass
class TrainingSet:
    """Query groups of (doc_id, feature vector, relevance label >= 0)."""

    groups: dict[str, list[tuple[str, FeatureVector, int]]] = field(default_factory=dict)

    @classmethod
    def from_feature_rows(
        cls, rows: Sequence[tuple[int, str, FeatureVector, str]]
    ) -> "TrainingSet":
        """Group the rows of a feature file (label, qid, vector, doc_id)."""
        ts = cls()
        for label, qid, vector, doc_id in rows:
            ts.groups.setdefault(qid, []).append((doc_id, vector, label))
        return ts

    def add(self, query_id: str, doc_id: str, vector: FeatureVector, label: int) -> None:
        self.groups.setdefault(query_id, []).append((doc_id, vector, label))


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    value: float = 0.0

    @property
    def is_leaf(self) -> bool:
        return self.left is None


@dataclass
class RegressionTree:
    root: TreeNode

    def predict_one(self, x: np.ndarray) -> float:
        node = self.root
        while not node.is_leaf:
            node = node.left if x[node.feature] <= node.threshold else node.right
        return node.value

    def node_count(self) -> int:
        def count(node: TreeNode) -> int:
            if node.is_leaf:
                return 1
            return 1 + count(node.left) + count(node.right)
        return count(self.root)


@dataclass
class EnsembleModel:
    """Ordered trees; prediction is learning_rate times the sum of leaf values."""

    trees: list[RegressionTree] = field(default_factory=list)
    learning_rate: float = 0.1
    feature_count: int = NUM_FEATURES
    training_ndcg_history: list[float] = field(default_factory=list, repr=False, compare=False)

    def predict_array(self, x: np.ndarray) -> float:
        return self.learning_rate * sum(tree.predict_one(x) for tree in self.trees)


def predict(model: EnsembleModel, x: FeatureVector | np.ndarray | Sequence[float]) -> float:
    """Score one feature vector; raises DimensionMismatch on wrong width."""
    values = x.values if isinstance(x, FeatureVector) else np.asarray(x, dtype=np.float64)
    if values.shape != (model.feature_count,):
        raise DimensionMismatch(
            f"expected {model.feature_count} features, got {values.shape}"
        )
    return model.predict_array(values)


# --- lambda gradients ---------------------------------------------------------------


def lambda_pair_matrix(
    labels: np.ndarray,
    scores: np.ndarray,
    truncation: int,
    sigma: float = 1.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Signed pair lambdas and second-order weights for one query group.

    Returns (L, W) with L[i, j] the lambda pushed onto i by the pair (i, j)
    (positive when i carries the higher label), antisymmetric by
    construction, and W[i, j] the symmetric pair weight. Pairs where both
    ranks fall outside the NDCG truncation get a zero swap delta and thus
    contribute nothing.
    """
    n = len(labels)
    labels = np.asarray(labels, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    gains = np.power(2.0, labels) - 1.0

    ideal = float(np.sum(np.sort(gains)[::-1][:truncation]
                         / np.log2(np.arange(min(n, truncation)) + 2.0)))
    if ideal == 0.0:
        return np.zeros((n, n)), np.zeros((n, n))

    order = np.argsort(-scores, kind="stable")
    ranks = np.empty(n, dtype=np.int64)
    ranks[order] = np.arange(1, n + 1)
    discounts = np.where(ranks <= truncation, 1.0 / np.log2(ranks + 1.0), 0.0)

    delta = np.abs(gains[:, None] - gains[None, :]) \
        * np.abs(discounts[:, None] - discounts[None, :]) / ideal
    better = labels[:, None] > labels[None, :]
    with np.errstate(over="ignore"):
        rho = 1.0 / (1.0 + np.exp(sigma * (scores[:, None] - scores[None, :])))
    pair_lambda = np.where(better, sigma * rho * delta, 0.0)
    pair_weight = np.where(better, sigma * sigma * rho * (1.0 - rho) * delta, 0.0)
    lambdas = pair_lambda - pair_lambda.T
    weights = pair_weight + pair_weight.T
    return lambdas, weights


def _group_gradients(
    labels: np.ndarray, scores: np.ndarray, truncation: int, sigma: float
) -> tuple[np.ndarray, np.ndarray]:
    pair_lambda, pair_weight = lambda_pair_matrix(labels, scores, truncation, sigma)
    return pair_lambda.sum(axis=1), pair_weight.sum(axis=1)


# --- tree fitting ---------------------------------------------------------------------


@dataclass
class _Split:
    gain: float
    feature: int
    threshold: float


def _best_split(
    X: np.ndarray, targets: np.ndarray, idx: np.ndarray, min_leaf: int
) -> _Split | None:
    n = len(idx)
    if n < 2 * min_leaf:
        return None
    best: _Split | None = None
    t = targets[idx]
    for f in range(X.shape[1]):
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        st = t[order]
        csum = np.cumsum(st)
        total = csum[-1]
        left_cnt = np.arange(1, n)
        valid = (sv[:-1] != sv[1:]) & (left_cnt >= min_leaf) & (n - left_cnt >= min_leaf)
        if not valid.any():
            continue
        left_sum = csum[:-1]
        right_sum = total - left_sum
        gain = np.where(
            valid,
            left_sum * left_sum / left_cnt + right_sum * right_sum / (n - left_cnt),
            -np.inf,
        )
        p = int(np.argmax(gain))
        if best is None or gain[p] > best.gain:
            best = _Split(float(gain[p]), f, float((sv[p] + sv[p + 1]) / 2.0))
    return best


@dataclass(eq=False)
class _Leaf:
    node: TreeNode
    idx: np.ndarray
    split: _Split | None


def _fit_tree(
    X: np.ndarray,
    lambdas: np.ndarray,
    weights: np.ndarray,
    params: LambdaMARTParams,
) -> tuple[RegressionTree, np.ndarray]:
    """Greedy best-first tree on the lambda targets; returns (tree, leaf outputs).

    The second return value assigns every training row its leaf's Newton
    output, so the caller can update scores without re-walking the tree.
    """
    root = TreeNode()
    all_idx = np.arange(len(lambdas))
    leaves = [_Leaf(root, all_idx, _best_split(X, lambdas, all_idx, params.min_leaf_instances))]
    while len(leaves) < params.num_leaves:
        grow = None
        for leaf in leaves:
            if leaf.split is None:
                continue
            if grow is None or leaf.split.gain > grow.split.gain:
                grow = leaf
        if grow is None:
            break
        leaves.remove(grow)
        node, split, idx = grow.node, grow.split, grow.idx
        node.feature = split.feature
        node.threshold = split.threshold
        mask = X[idx, split.feature] <= split.threshold
        left_idx, right_idx = idx[mask], idx[~mask]
        node.left = TreeNode()
        node.right = TreeNode()
        leaves.append(_Leaf(node.left, left_idx,
                            _best_split(X, lambdas, left_idx, params.min_leaf_instances)))
        leaves.append(_Leaf(node.right, right_idx,
                            _best_split(X, lambdas, right_idx, params.min_leaf_instances)))

    outputs = np.zeros(len(lambdas))
    for leaf in leaves:
        num = float(np.sum(lambdas[leaf.idx]))
        den = float(np.sum(weights[leaf.idx]))
        leaf.node.value = num / den if den > 0.0 else 0.0
        outputs[leaf.idx] = leaf.node.value
    return RegressionTree(root), outputs


# --- training --------------------------------------------------------------------------


def train_lambdamart(
    train: TrainingSet,
    params: LambdaMARTParams | None = None,
) -> EnsembleModel:
    """Boost regression trees on lambda gradients; see the module docstring.

    Requires at least one group with two distinct labels. The returned
    model records its per-round training NDCG in training_ndcg_history.
    """
    params = params if params is not None else LambdaMARTParams()
    if not any(
        len({label for _, _, label in items}) >= 2
        for items in train.groups.values()
    ):
        raise DegenerateTraining("no training group has two distinct labels")

    # Canonical order: groups by query id, documents by doc id. This makes
    # training independent of input order.
    qids = sorted(train.groups)
    rows: list[np.ndarray] = []
    labels_list: list[int] = []
    bounds: list[tuple[int, int]] = []
    for qid in qids:
        items = sorted(train.groups[qid], key=lambda it: it[0])
        start = len(rows)
        for _, vector, label in items:
            rows.append(vector.values)
            labels_list.append(label)
        bounds.append((start, len(rows)))
    X = np.vstack(rows)
    labels = np.asarray(labels_list, dtype=np.float64)

    model = EnsembleModel(
        trees=[], learning_rate=params.learning_rate, feature_count=X.shape[1]
    )
    scores = np.zeros(len(labels))
    trunc = params.ndcg_truncation

    def train_ndcg() -> float:
        values = []
        for start, end in bounds:
            group_scores = scores[start:end]
            order = np.argsort(-group_scores, kind="stable")
            ranked = labels[start:end][order]
            values.append(ndcg_of_ranking([int(v) for v in ranked], trunc))
        return float(np.mean(values))

    model.training_ndcg_history.append(train_ndcg())
    for _ in range(params.num_trees):
        lambdas = np.zeros(len(labels))
        weights = np.zeros(len(labels))
        for start, end in bounds:
            lam, w = _group_gradients(
                labels[start:end], scores[start:end], trunc, params.sigma
            )
            lambdas[start:end] = lam
            weights[start:end] = w
        tree, outputs = _fit_tree(X, lambdas, weights, params)
        model.trees.append(tree)
        scores += params.learning_rate * outputs
        model.training_ndcg_history.append(train_ndcg())
    return model


def rerank(
    candidates: CandidateList,
    features: Mapping[str, FeatureVector],
    model: EnsembleModel,
) -> CandidateList:
    """Reorder candidates by model score (descending, ties by ascending doc id)."""
    missing = [doc_id for doc_id, _ in candidates.entries if doc_id not in features]
    if missing:
        raise MissingFeatures(f"no feature vectors for: {', '.join(sorted(missing))}")
    scored = [
        (doc_id, predict(model, features[doc_id]))
        for doc_id, _ in candidates.entries
    ]
    scored.sort(key=lambda e: (-e[1], e[0]))
    return CandidateList(query_id=candidates.query_id, entries=scored)


# --- persistence --------------------------------------------------------------------------


def save_model(model: EnsembleModel, path: str | Path) -> None:
    lines = [
        f"{MODEL_FORMAT_MAGIC}\t{MODEL_FORMAT_VERSION}",
        f"feature_count\t{model.feature_count}",
        f"learning_rate\t{model.learning_rate!r}",
        f"num_trees\t{len(model.trees)}",
    ]

    def emit(node: TreeNode) -> None:
        if node.is_leaf:
            lines.append(f"leaf\t{node.value!r}")
        else:
            lines.append(f"split\t{node.feature + 1}\t{node.threshold!r}")
            emit(node.left)
            emit(node.right)

    for tree in model.trees:
        lines.append(f"tree\t{tree.node_count()}")
        emit(tree.root)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> EnsembleModel:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or lines[0].split("\t") != [MODEL_FORMAT_MAGIC, MODEL_FORMAT_VERSION]:
        raise ParseError("not a fieldrank model file", str(path), 1)

    def header(lineno: int, key: str) -> str:
        parts = lines[lineno].split("\t")
        if len(parts) != 2 or parts[0] != key:
            raise ParseError(f"expected {key} header", str(path), lineno + 1)
        return parts[1]

    feature_count = int(header(1, "feature_count"))
    learning_rate = float(header(2, "learning_rate"))
    num_trees = int(header(3, "num_trees"))

    it = iter(range(4, len(lines)))

    def read_node(pos_iter: Iterator[int]) -> TreeNode:
        lineno = next(pos_iter)
        parts = lines[lineno].split("\t")
        if parts[0] == "leaf" and len(parts) == 2:
            return TreeNode(value=float(parts[1]))
        if parts[0] == "split" and len(parts) == 3:
            node = TreeNode(feature=int(parts[1]) - 1, threshold=float(parts[2]))
            node.left = read_node(pos_iter)
            node.right = read_node(pos_iter)
            return node
        raise ParseError(f"bad node line {parts[0]!r}", str(path), lineno + 1)

    trees: list[RegressionTree] = []
    for _ in range(num_trees):
        lineno = next(it)
        parts = lines[lineno].split("\t")
        if parts[0] != "tree" or len(parts) != 2:
            raise ParseError("expected tree header", str(path), lineno + 1)
        expected_nodes = int(parts[1])
        tree = RegressionTree(read_node(it))
        if tree.node_count() != expected_nodes:
            raise ParseError(
                f"tree has {tree.node_count()} nodes, header said {expected_nodes}",
                str(path), lineno + 1,
            )
        trees.append(tree)
    return EnsembleModel(trees=trees, learning_rate=learning_rate, feature_count=feature_count)
