"""Bagged CART trees with Gini splits, used to rank wrench channels by
impurity-decrease importance."""
import collections
from typing import List, Optional

import numpy as np

from pihlab import log
from pihlab._common import ConfigObject
from pihlab.core import derive_seed, seeded_rng
from pihlab.errors import ConfigError, DegenerateDataError, InsufficientDataError
from pihlab.learning._common import FeatureSelector


__all__ = (
    "ForestConfig",
    "DecisionTree",
    "RandomForest",
    "fit_forest",
    "fit_forest_arrays",
    "feature_importance",
)


MIN_SAMPLES = 20


class ForestConfig(ConfigObject):
    """
    Attributes:
        n_trees (int)
        max_depth (int): Root is depth 0.
        min_leaf (int): Smallest number of samples on either side of a split.
        max_features (int or None): Features tried per node, drawn without
            replacement. None tries all of them.
    """

    SECTION = "learning.forest"
    FIELDS = ("n_trees", "max_depth", "min_leaf", "max_features")

    def __init__(self, n_trees=100, max_depth=6, min_leaf=5, max_features=None):
        self.n_trees = int(n_trees)
        self.max_depth = int(max_depth)
        self.min_leaf = int(min_leaf)
        self.max_features = None if max_features is None else int(max_features)
        if self.n_trees < 1 or self.max_depth < 0 or self.min_leaf < 1:
            raise ConfigError("invalid forest size", n_trees=self.n_trees,
                              max_depth=self.max_depth, min_leaf=self.min_leaf)
        if self.max_features is not None and self.max_features < 1:
            raise ConfigError("max_features must be at least 1", max_features=self.max_features)


Split = collections.namedtuple("Split", ("decrease", "feature", "threshold"))

Node = collections.namedtuple("Node", ("feature", "threshold", "left", "right", "p_positive"))


def gini(p):
    return 2.0 * p * (1.0 - p)


def best_split(X, y, features, min_leaf) -> Optional[Split]:
    """Best Gini split over `features`, scanning every distinct threshold of
    each feature with cumulative class counts. Ties keep the earlier
    feature."""
    n = len(y)
    total_pos = y.sum()
    parent = gini(total_pos / n)
    left_sizes = np.arange(1, n)
    right_sizes = n - left_sizes
    size_ok = (left_sizes >= min_leaf) & (right_sizes >= min_leaf)

    best = None
    for feature in features:
        order = np.argsort(X[:, feature], kind="stable")
        xs = X[order, feature]
        left_pos = np.cumsum(y[order])[:-1]
        valid = size_ok & (xs[:-1] < xs[1:])
        if not valid.any():
            continue

        p_left = left_pos / left_sizes
        p_right = (total_pos - left_pos) / right_sizes
        weighted = (left_sizes * gini(p_left) + right_sizes * gini(p_right)) / n
        decrease = np.where(valid, parent - weighted, -np.inf)

        i = int(np.argmax(decrease))
        if decrease[i] > 0 and (best is None or decrease[i] > best.decrease):
            best = Split(float(decrease[i]), int(feature), 0.5 * (xs[i] + xs[i + 1]))
    return best


class DecisionTree(object):
    """CART classifier on {0, 1} labels. Nodes are stored flat in `nodes`;
    leaves have feature -1."""

    def __init__(self, config: ForestConfig):
        self.config = config
        self.nodes = [ ]
        self.importance = None

    def fit(self, X, y, rng):
        self.nodes = [ ]
        self.importance = np.zeros(X.shape[1])
        self._grow(X, y, 0, len(y), rng)
        return self

    def _leaf(self, y):
        self.nodes.append(Node(-1, 0.0, -1, -1, float(y.mean())))
        return len(self.nodes) - 1

    def _grow(self, X, y, depth, n_root, rng):
        cfg = self.config
        n = len(y)
        if depth >= cfg.max_depth or n < 2 * cfg.min_leaf or y.min() == y.max():
            return self._leaf(y)

        features = np.arange(X.shape[1])
        if cfg.max_features is not None and cfg.max_features < len(features):
            features = np.sort(rng.choice(features, cfg.max_features, replace=False))

        split = best_split(X, y, features, cfg.min_leaf)
        if split is None:
            return self._leaf(y)

        self.importance[split.feature] += (n / n_root) * split.decrease
        index = len(self.nodes)
        self.nodes.append(None)
        go_left = X[:, split.feature] < split.threshold
        left = self._grow(X[go_left], y[go_left], depth + 1, n_root, rng)
        right = self._grow(X[~go_left], y[~go_left], depth + 1, n_root, rng)
        self.nodes[index] = Node(split.feature, split.threshold, left, right, float(y.mean()))
        return index

    def predict_proba(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.empty(len(X))
        for row, x in enumerate(X):
            node = self.nodes[0]
            while node.feature >= 0:
                node = self.nodes[node.left if x[node.feature] < node.threshold else node.right]
            out[row] = node.p_positive
        return out

    def normalized_importance(self):
        total = self.importance.sum()
        return self.importance / total if total > 0 else self.importance.copy()


class RandomForest(object):
    """
    Attributes:
        config (ForestConfig)
        trees (list of DecisionTree)
        seeds (list of int): Bootstrap seed of each tree.
        feature_names (tuple of str or None)
    """

    def __init__(self, config: ForestConfig, trees: List[DecisionTree], seeds, feature_names=None):
        self.config = config
        self.trees = trees
        self.seeds = seeds
        self.feature_names = feature_names

    def predict_proba(self, X):
        return np.mean([tree.predict_proba(X) for tree in self.trees], axis=0)

    def predict(self, X):
        return (self.predict_proba(X) >= 0.5).astype(int)

    def importance_matrix(self):
        return np.array([tree.normalized_importance() for tree in self.trees])

    def feature_importance(self):
        """(mean, std) over trees of each tree's normalized impurity decrease.
        The mean is renormalized to sum to 1."""
        per_tree = self.importance_matrix()
        mean = per_tree.mean(axis=0)
        total = mean.sum()
        if total > 0:
            mean = mean / total
        return mean, per_tree.std(axis=0)


def fit_forest_arrays(X, labels, config: Optional[ForestConfig] = None, rng=None, feature_names=None, logger=None) -> RandomForest:
    """Fit on raw arrays. Labels may be +/-1 or {0, 1}; positive values are
    the positive class.

    Raises:
        InsufficientDataError: fewer than 20 samples.
        DegenerateDataError: a single class.
    """
    logger = log.ensure_logger(logger)
    config = config if config is not None else ForestConfig()
    rng = rng if rng is not None else seeded_rng(0)
    X = np.asarray(X, dtype=float)
    y = (np.asarray(labels, dtype=float) > 0).astype(float)
    if len(y) < MIN_SAMPLES:
        raise InsufficientDataError("forest needs at least %d samples" % MIN_SAMPLES, n=len(y))
    if y.min() == y.max():
        raise DegenerateDataError("forest labels are all one class", n=len(y))

    trees = [ ]
    seeds = [ ]
    n = len(y)
    for _ in range(config.n_trees):
        seed = derive_seed(rng)
        tree_rng = seeded_rng(seed)
        sample = tree_rng.integers(0, n, size=n)
        trees.append(DecisionTree(config).fit(X[sample], y[sample], tree_rng))
        seeds.append(seed)

    logger.debug("forest: {t} trees on {n} samples", t=len(trees), n=n)
    return RandomForest(config, trees, seeds, feature_names)


def fit_forest(dataset, axis, config: Optional[ForestConfig] = None, rng=None,
               selector=FeatureSelector.FULL, logger=None) -> RandomForest:
    """Forest on the direction sign of `axis` from the selected wrench
    channels of `dataset`."""
    selector = FeatureSelector.parse(selector)
    return fit_forest_arrays(
        dataset.features(selector), dataset.signs(axis), config, rng,
        feature_names=selector.names, logger=logger,
    )


def feature_importance(forest: RandomForest):
    return forest.feature_importance()
