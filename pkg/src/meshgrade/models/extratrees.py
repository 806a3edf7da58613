"""
Extremely randomised trees.

Each tree is grown on the full training set. At every node a fixed number
of attributes is drawn among those that are not constant on the node's
samples, one cut-point is drawn uniformly between the attribute's node
minimum and maximum, and the candidate with the largest Gini impurity
reduction wins. Growth stops at pure nodes, nodes smaller than
``min_samples_split``, and nodes whose attributes are all constant.

The ensemble probability of rework is the mean over trees of the rework
fraction in the leaf each tree routes the input to.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from loguru import logger

from ..errors import ModelFormatError
from .common import as_matrix, training_arrays


@dataclass(frozen=True, eq=False)
class DecisionTree:
    """
    Flat array representation of one tree.

    Internal nodes have ``feature >= 0`` and route ``x[feature] < threshold``
    to ``left``; leaves have ``feature == -1``. ``counts`` holds the number of
    (rework, passed) training samples that reached each node.
    """
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray

    @property
    def n_nodes(self):
        return len(self.feature)

    @property
    def is_leaf(self):
        return self.feature < 0

    def apply(self, X):
        """Index of the leaf reached by each row of X."""
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            rows = np.nonzero(self.feature[node] >= 0)[0]
            if len(rows) == 0:
                return node
            current = node[rows]
            go_left = X[rows, self.feature[current]] < self.threshold[current]
            node[rows] = np.where(go_left, self.left[current], self.right[current])

    def predict_proba(self, X):
        """Rework fraction of the reached leaf, per row."""
        leaves = self.apply(X)
        counts = self.counts[leaves]
        return counts[:, 0] / counts.sum(axis=1)


@dataclass(frozen=True, eq=False)
class ExtraTreesModel:
    """A trained ensemble plus the hyperparameters it was grown with."""
    trees: tuple
    n_features: int
    n_trees: int
    max_features: int
    min_samples_split: int
    seed: int
    layout: Optional[object] = None

    def __post_init__(self):
        if len(self.trees) != self.n_trees:
            raise ModelFormatError(f"model declares {self.n_trees} trees but holds {len(self.trees)}")
        for index, tree in enumerate(self.trees):
            n = tree.n_nodes
            arrays = (tree.threshold, tree.left, tree.right)
            if n == 0 or any(len(a) != n for a in arrays) or tree.counts.shape != (n, 2):
                raise ModelFormatError(f"tree {index} has inconsistent node arrays")
            internal = tree.feature >= 0
            if np.any(tree.feature[internal] >= self.n_features):
                raise ModelFormatError(f"tree {index} uses an attribute index >= {self.n_features}")
            children = np.concatenate([tree.left[internal], tree.right[internal]])
            if np.any((children <= 0) | (children >= n)):
                raise ModelFormatError(f"tree {index} has child links outside the tree")
            leaf_counts = tree.counts[~internal]
            if np.any(tree.counts < 0) or np.any(leaf_counts.sum(axis=1) <= 0):
                raise ModelFormatError(f"tree {index} has a leaf without samples")

    def tree_probabilities(self, X):
        """Per-tree rework fractions, shape (n_trees, N)."""
        matrix, _ = as_matrix(X, self.n_features)
        return np.array([tree.predict_proba(matrix) for tree in self.trees])

    def predict_proba(self, X):
        """Mean rework probability over trees; a float for a single vector."""
        matrix, single = as_matrix(X, self.n_features)
        probabilities = self.tree_probabilities(matrix).mean(axis=0)
        return float(probabilities[0]) if single else probabilities


def _gini(rework, total):
    p = rework / total
    return 1.0 - p * p - (1.0 - p) * (1.0 - p)


def _draw_split(X, y, idx, rng, max_features):
    """Best of ``max_features`` random (attribute, cut-point) candidates, or None."""
    n = len(idx)
    rework = y[idx].sum()
    parent = _gini(rework, n)
    best = None
    drawn = 0
    for attribute in rng.permutation(X.shape[1]):
        column = X[idx, attribute]
        low, high = column.min(), column.max()
        if not high > low:
            continue
        cut = rng.uniform(low, high)
        if cut <= low:
            cut = np.nextafter(low, high)
        goes_left = column < cut
        n_left = int(goes_left.sum())
        rework_left = int(y[idx][goes_left].sum())
        n_right = n - n_left
        rework_right = rework - rework_left
        score = parent - (n_left * _gini(rework_left, n_left)
                          + n_right * _gini(rework_right, n_right)) / n
        if best is None or score > best[0]:
            best = (score, int(attribute), float(cut), goes_left)
        drawn += 1
        if drawn == max_features:
            break
    return best


def grow_tree(X, y, rng, max_features, min_samples_split):
    """
    Grow one extremely randomised tree.

    Args:
        X (np.ndarray): (N, D) training features
        y (np.ndarray): (N,) labels, 1 for rework
        rng (np.random.Generator): Random stream of this tree
        max_features (int): Attributes drawn per node
        min_samples_split (int): Smallest node that may be split

    Returns:
        DecisionTree: The grown tree.
    """
    feature, threshold, left, right, counts = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append((0, 0))
        return len(feature) - 1

    stack = [(new_node(), np.arange(len(y)))]
    while stack:
        node, idx = stack.pop()
        n = len(idx)
        rework = int(y[idx].sum())
        counts[node] = (rework, n - rework)
        if rework == 0 or rework == n or n < min_samples_split:
            continue
        split = _draw_split(X, y, idx, rng, max_features)
        if split is None:
            continue
        _, attribute, cut, goes_left = split
        feature[node] = attribute
        threshold[node] = cut
        left[node] = new_node()
        right[node] = new_node()
        stack.append((right[node], idx[~goes_left]))
        stack.append((left[node], idx[goes_left]))

    return DecisionTree(
        feature=np.array(feature, dtype=np.int64),
        threshold=np.array(threshold, dtype=float),
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        counts=np.array(counts, dtype=np.int64).reshape(len(counts), 2),
    )


def train_extratrees(data, config, layout=None):
    """
    Train an ExtraTrees ensemble.

    Tree ``i`` draws its random stream from ``seed + i`` only, so results do
    not depend on ``config.n_jobs``.

    Args:
        data (Dataset): Labelled training rows
        config (TrainConfig): Hyperparameters
        layout (FeatureLayout): Recorded in the model for later featurizing;
                                defaults to the dataset's layout

    Returns:
        ExtraTreesModel: The trained ensemble.

    Raises:
        DatasetError: For empty or unlabelled data.
    """
    X, y = training_arrays(data)
    max_features = config.features_per_split(X.shape[1])

    def grow(index):
        rng = np.random.default_rng(config.seed + index)
        return grow_tree(X, y, rng, max_features, config.min_samples_split)

    if config.n_jobs > 1:
        with ThreadPoolExecutor(max_workers=config.n_jobs) as pool:
            trees = tuple(pool.map(grow, range(config.n_trees)))
    else:
        trees = tuple(grow(index) for index in range(config.n_trees))

    logger.debug(f"grew {len(trees)} trees on {len(y)} rows, "
                 f"{sum(t.n_nodes for t in trees)} nodes in total")
    return ExtraTreesModel(
        trees=trees,
        n_features=X.shape[1],
        n_trees=config.n_trees,
        max_features=max_features,
        min_samples_split=config.min_samples_split,
        seed=config.seed,
        layout=layout if layout is not None else getattr(data, 'layout', None),
    )


def predict_proba_trees(model, x):
    """
    Ensemble probability of rework.

    Args:
        model (ExtraTreesModel): Trained ensemble
        x (array-like): One feature vector or a batch

    Returns:
        float or np.ndarray: Probabilities in [0, 1].

    Raises:
        DimensionMismatchError: If x does not have length D.
    """
    return model.predict_proba(x)
