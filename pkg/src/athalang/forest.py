"""Random forest of Gini-split CART trees over sparse count features.

Split search maximizes score = s_L/n_L + s_R/n_R in float64, where s is
the sum of squared class counts on a side. Minimizing weighted child
Gini impurity is equivalent: weighted_gini = 1 - score/N. Thresholds are
midpoints between consecutive distinct observed values; ties fall to the
lower feature index, then the lower threshold. Samples with value <=
threshold go left.

All randomness comes from SplitMix64 streams (see rng module): tree t of
a forest seeded with s uses stream (s, t) for its bootstrap sample and
then for feature subsampling, with nodes expanded preorder depth-first,
left child first. Training is therefore byte-reproducible for a given
(data, params, seed) at any parallelism degree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, ClassifierMixin

from .corpus import ClassRegistry
from .features import FeatureVector, Vocabulary, count_matrix
from .rng import SplitMix64
from .validation import check_count_matrix, check_fitted, check_labels

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: Optional[int] = None
    min_samples_split: int = 2
    features_per_split: Optional[int] = None
    bootstrap: bool = True
    seed: int = 42

    def __post_init__(self):
        if self.n_trees < 1:
            raise ValueError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError(f"max_depth must be >= 1 or None, got {self.max_depth}")
        if self.min_samples_split < 2:
            raise ValueError(
                f"min_samples_split must be >= 2, got {self.min_samples_split}"
            )

    def resolve(self, n_features: int) -> "ForestParams":
        """Pin features_per_split for a concrete feature dimension."""
        m = self.features_per_split
        if m is None:
            m = max(1, round(math.sqrt(n_features)))
        if not 1 <= m <= n_features:
            raise ValueError(
                f"features_per_split must be in [1, {n_features}], got {m}"
            )
        return replace(self, features_per_split=m)


class TreeNode:
    """Either an internal split node or a leaf with class counts."""

    __slots__ = ("feature", "threshold", "left", "right", "class_counts")

    def __init__(self, feature=None, threshold=None, left=None, right=None,
                 class_counts=None):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.class_counts = class_counts

    @classmethod
    def leaf(cls, class_counts: dict[int, int]) -> "TreeNode":
        if not class_counts:
            raise ValueError("leaf must have non-empty class counts")
        return cls(class_counts=dict(class_counts))

    @classmethod
    def internal(cls, feature: int, threshold: float) -> "TreeNode":
        return cls(feature=feature, threshold=threshold)

    @property
    def is_leaf(self) -> bool:
        return self.class_counts is not None


@dataclass
class ForestModel:
    """A trained, self-contained language identifier: trees plus the
    vocabulary and class registry they were trained against."""

    params: ForestParams
    trees: list[TreeNode]
    vocabulary: Vocabulary
    registry: ClassRegistry
    format_version: int = MODEL_FORMAT_VERSION

    def __post_init__(self):
        if len(self.trees) != self.params.n_trees:
            raise ValueError(
                f"model has {len(self.trees)} trees but params say {self.params.n_trees}"
            )


def gini(class_counts: Mapping[int, int]) -> float:
    """Gini impurity 1 - sum_c (n_c / N)^2 of a count map."""
    if not class_counts:
        raise ValueError("gini is undefined for empty class counts")
    if any(c < 0 for c in class_counts.values()):
        raise ValueError("class counts must be non-negative")
    total = sum(class_counts.values())
    if total < 1:
        raise ValueError("gini is undefined for a total count of zero")
    return 1.0 - sum((c / total) ** 2 for c in class_counts.values())


def _gather_column(X_csc: sp.csc_matrix, samples: np.ndarray, feature: int) -> np.ndarray:
    """Values of one feature column at `samples` (duplicates allowed),
    as int64 with implicit zeros filled in."""
    start, end = X_csc.indptr[feature], X_csc.indptr[feature + 1]
    rows = X_csc.indices[start:end]
    out = np.zeros(len(samples), dtype=np.int64)
    if len(rows):
        pos = np.searchsorted(rows, samples)
        pos_c = np.minimum(pos, len(rows) - 1)
        hit = rows[pos_c] == samples
        out[hit] = X_csc.data[start:end][pos_c[hit]]
    return out


def best_split(
    X_csc: sp.csc_matrix,
    y: np.ndarray,
    samples: np.ndarray,
    candidate_features: Sequence[int],
    n_classes: Optional[int] = None,
) -> Optional[tuple[int, float, float]]:
    """The (feature, threshold, gain) with minimal weighted child Gini
    among the candidate features, or None when no split improves on the
    node. Candidate order does not matter; ties prefer the lower feature
    index, then the lower threshold.
    """
    samples = np.asarray(samples, dtype=np.int64)
    n = len(samples)
    if n < 2:
        raise ValueError(f"best_split needs >= 2 samples, got {n}")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    y_node = y[samples]
    node_counts = np.bincount(y_node, minlength=n_classes)
    parent_score = int(np.dot(node_counts, node_counts)) / n
    best: Optional[tuple[float, int, float]] = None
    for feature in sorted(int(f) for f in candidate_features):
        vals = _gather_column(X_csc, samples, feature)
        vmax = int(vals.max())
        by_value = np.bincount(
            vals * n_classes + y_node, minlength=(vmax + 1) * n_classes
        ).reshape(vmax + 1, n_classes)
        observed = np.flatnonzero(by_value.sum(axis=1))
        if len(observed) < 2:
            continue
        left = np.cumsum(by_value[observed], axis=0)[:-1]
        n_left = left.sum(axis=1)
        n_right = n - n_left
        right = node_counts[np.newaxis, :] - left
        s_left = np.einsum("ij,ij->i", left, left)
        s_right = np.einsum("ij,ij->i", right, right)
        scores = s_left / n_left + s_right / n_right
        k = int(np.argmax(scores))
        score = float(scores[k])
        if best is None or score > best[0]:
            threshold = (float(observed[k]) + float(observed[k + 1])) / 2.0
            best = (score, feature, threshold)
    if best is None or not best[0] > parent_score:
        return None
    score, feature, threshold = best
    return feature, threshold, (score - parent_score) / n


def grow_tree(
    X_csc: sp.csc_matrix,
    y: np.ndarray,
    samples: np.ndarray,
    params: ForestParams,
    rng: SplitMix64,
    n_classes: Optional[int] = None,
) -> TreeNode:
    """Grow one CART tree over `samples` (preorder, left child first).

    A node becomes a leaf when it is pure, smaller than
    min_samples_split, at max_depth, or when best_split over a fresh
    feature subsample finds no improvement.
    """
    samples = np.asarray(samples, dtype=np.int64)
    if len(samples) == 0:
        raise ValueError("grow_tree needs a non-empty sample set")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    params = params.resolve(X_csc.shape[1])
    n_features = X_csc.shape[1]
    root: Optional[TreeNode] = None
    # stack entries: (samples, depth, parent, is_left_child)
    stack: list[tuple[np.ndarray, int, Optional[TreeNode], bool]] = [
        (samples, 0, None, False)
    ]
    while stack:
        node_samples, depth, parent, is_left = stack.pop()
        counts = np.bincount(y[node_samples], minlength=n_classes)
        found = None
        stop = (
            len(node_samples) < params.min_samples_split
            or int(np.count_nonzero(counts)) <= 1
            or (params.max_depth is not None and depth >= params.max_depth)
        )
        if not stop:
            candidates = rng.sample_without_replacement(
                params.features_per_split, n_features
            )
            found = best_split(X_csc, y, node_samples, candidates, n_classes)
        if found is None:
            node = TreeNode.leaf(
                {c: int(v) for c, v in enumerate(counts) if v}
            )
        else:
            feature, threshold, _gain = found
            node = TreeNode.internal(feature, threshold)
            go_left = _gather_column(X_csc, node_samples, feature) <= threshold
            stack.append((node_samples[~go_left], depth + 1, node, False))
            stack.append((node_samples[go_left], depth + 1, node, True))
        if parent is None:
            root = node
        elif is_left:
            parent.left = node
        else:
            parent.right = node
    assert root is not None
    return root


def leaf_vote(node: TreeNode) -> int:
    """Majority class of a leaf; ties go to the lower class index."""
    best_class, best_count = -1, -1
    for c in sorted(node.class_counts):
        if node.class_counts[c] > best_count:
            best_class, best_count = c, node.class_counts[c]
    return best_class


def _walk(node: TreeNode, entries: Mapping[int, int]) -> TreeNode:
    while not node.is_leaf:
        node = node.left if entries.get(node.feature, 0) <= node.threshold else node.right
    return node


def predict(model: ForestModel, x: FeatureVector) -> tuple[int, dict[int, int]]:
    """Majority vote of the forest on one feature vector.

    Returns (class_index, votes per class summing to n_trees); vote ties
    go to the lower class index.
    """
    if x.dimension != model.vocabulary.dimension:
        raise ValueError(
            f"feature vector dimension {x.dimension} does not match "
            f"model dimension {model.vocabulary.dimension}"
        )
    votes = {c: 0 for c in range(len(model.registry))}
    for tree in model.trees:
        votes[leaf_vote(_walk(tree, x.entries))] += 1
    winner, winner_votes = 0, -1
    for c in range(len(model.registry)):
        if votes[c] > winner_votes:
            winner, winner_votes = c, votes[c]
    return winner, votes


# -- preorder list form, used for worker transport and serialization ---------

def tree_to_preorder(root: TreeNode) -> list[tuple]:
    """Flatten a tree to preorder tuples: (1, feature, threshold) for
    internal nodes, (0, class_counts_items) for leaves."""
    out: list[tuple] = []
    stack = [root]
    while stack:
        node = stack.pop()
        if node.is_leaf:
            out.append((0, tuple(sorted(node.class_counts.items()))))
        else:
            out.append((1, node.feature, node.threshold))
            stack.append(node.right)
            stack.append(node.left)
    return out


def tree_from_preorder(items: Sequence[tuple]) -> TreeNode:
    """Rebuild a tree from its preorder tuple list."""
    if not items:
        raise ValueError("empty preorder node list")
    root: Optional[TreeNode] = None
    # internal nodes still missing children; left is filled first
    pending: list[TreeNode] = []
    for item in items:
        if root is not None and not pending:
            raise ValueError("preorder node list has trailing nodes")
        if item[0] == 1:
            node = TreeNode.internal(item[1], item[2])
        else:
            node = TreeNode.leaf(dict(item[1]))
        if root is None:
            root = node
        else:
            top = pending[-1]
            if top.left is None:
                top.left = node
            else:
                top.right = node
                pending.pop()
        if item[0] == 1:
            pending.append(node)
    if pending:
        raise ValueError("preorder node list ended with incomplete internal nodes")
    return root


def _grow_one(X_csc, y, params: ForestParams, tree_index: int, n_classes: int):
    rng = SplitMix64.stream(params.seed, tree_index)
    n = X_csc.shape[0]
    if params.bootstrap:
        samples = rng.below_batch(n, n)
    else:
        samples = np.arange(n, dtype=np.int64)
    tree = grow_tree(X_csc, y, samples, params, rng, n_classes)
    return tree_to_preorder(tree)


def train_trees(
    X: sp.spmatrix, y: np.ndarray, params: ForestParams, n_jobs: int = 1,
    n_classes: Optional[int] = None,
) -> list[TreeNode]:
    """Train params.n_trees trees; tree t's bootstrap sample and feature
    draws come only from stream (seed, t), so the result is independent
    of n_jobs."""
    if X.shape[0] < 1:
        raise ValueError("empty training set")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    params = params.resolve(X.shape[1])
    X_csc = X.tocsc()
    X_csc.sort_indices()
    flat = Parallel(n_jobs=n_jobs)(
        delayed(_grow_one)(X_csc, y, params, t, n_classes)
        for t in range(params.n_trees)
    )
    return [tree_from_preorder(items) for items in flat]


# -- vectorized batch prediction ---------------------------------------------

class _FlatTree:
    """Array form of one tree for batched traversal."""

    __slots__ = ("feature", "threshold", "left", "right", "vote")

    def __init__(self, root: TreeNode):
        feature, threshold, left, right, vote = [], [], [], [], []
        stack = [(root, -1, False)]
        while stack:
            node, parent_id, is_left = stack.pop()
            node_id = len(feature)
            if parent_id >= 0:
                (left if is_left else right)[parent_id] = node_id
            if node.is_leaf:
                feature.append(-1)
                threshold.append(0.0)
                left.append(-1)
                right.append(-1)
                vote.append(leaf_vote(node))
            else:
                feature.append(node.feature)
                threshold.append(node.threshold)
                left.append(-1)
                right.append(-1)
                vote.append(-1)
                stack.append((node.right, node_id, False))
                stack.append((node.left, node_id, True))
        self.feature = np.asarray(feature, dtype=np.int32)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int32)
        self.right = np.asarray(right, dtype=np.int32)
        self.vote = np.asarray(vote, dtype=np.int32)


def _votes_for_batch(flats: list[_FlatTree], dense: np.ndarray, n_classes: int) -> np.ndarray:
    rows = np.arange(dense.shape[0])
    votes = np.zeros((dense.shape[0], n_classes), dtype=np.int64)
    for flat in flats:
        at = np.zeros(dense.shape[0], dtype=np.int64)
        while True:
            feat = flat.feature[at]
            active = feat >= 0
            if not active.any():
                break
            idx = at[active]
            go_left = dense[rows[active], feat[active]] <= flat.threshold[idx]
            at[active] = np.where(go_left, flat.left[idx], flat.right[idx])
        votes[rows, flat.vote[at]] += 1
    return votes


def predict_matrix(
    trees: Sequence[TreeNode],
    X: sp.spmatrix,
    n_classes: int,
    n_jobs: int = 1,
    batch_size: int = 1024,
) -> tuple[np.ndarray, np.ndarray]:
    """Forest votes for every row of X.

    Returns (labels, votes) where votes has shape (n_rows, n_classes)
    and rows sum to len(trees); label ties go to the lower class index
    (argmax picks the first maximum).
    """
    X = X.tocsr()
    flats = [_FlatTree(t) for t in trees]
    batches = [
        X[start : start + batch_size].toarray().astype(np.float64)
        for start in range(0, X.shape[0], batch_size)
    ]
    parts = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_votes_for_batch)(flats, dense, n_classes) for dense in batches
    )
    votes = (
        np.vstack(parts) if parts else np.zeros((0, n_classes), dtype=np.int64)
    )
    return votes.argmax(axis=1), votes


def predict_texts(
    model: ForestModel, texts: Sequence[str], n_jobs: int = 1,
    batch_size: int = 1024,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorize raw texts with the model's vocabulary and run the
    forest over them; returns (labels, votes)."""
    X = count_matrix(list(texts), model.vocabulary)
    return predict_matrix(
        model.trees, X, len(model.registry), n_jobs=n_jobs, batch_size=batch_size
    )


class RandomForest(BaseEstimator, ClassifierMixin):
    """sklearn-style interface over the seeded forest trainer.

    Parameters mirror ForestParams; X is a non-negative integer count
    matrix (sparse or dense), y integer class labels 0..K-1.
    """

    def __init__(self, n_trees: int = 100, max_depth: Optional[int] = None,
                 min_samples_split: int = 2, features_per_split: Optional[int] = None,
                 bootstrap: bool = True, seed: int = 42,
                 n_jobs: Optional[int] = None):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_samples_split = min_samples_split
        self.features_per_split = features_per_split
        self.bootstrap = bootstrap
        self.seed = seed
        self.n_jobs = n_jobs

    def _params(self) -> ForestParams:
        return ForestParams(
            n_trees=self.n_trees,
            max_depth=self.max_depth,
            min_samples_split=self.min_samples_split,
            features_per_split=self.features_per_split,
            bootstrap=self.bootstrap,
            seed=self.seed,
        )

    def fit(self, X, y):
        X = check_count_matrix(X)
        y = check_labels(y, X.shape[0])
        if X.shape[0] == 0:
            raise ValueError("empty training set")
        self.n_features_in_ = X.shape[1]
        self.n_classes_ = int(y.max()) + 1
        self.classes_ = np.arange(self.n_classes_)
        self.params_ = self._params().resolve(self.n_features_in_)
        self.trees_ = train_trees(
            X, y, self.params_, n_jobs=self.n_jobs or 1, n_classes=self.n_classes_
        )
        return self

    def predict_votes(self, X) -> tuple[np.ndarray, np.ndarray]:
        check_fitted(self, "trees_")
        X = check_count_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, model expects {self.n_features_in_}"
            )
        return predict_matrix(
            self.trees_, X, self.n_classes_, n_jobs=self.n_jobs or 1
        )

    def predict(self, X) -> np.ndarray:
        return self.predict_votes(X)[0]
