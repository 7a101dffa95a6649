import numpy as np
import pytest

from pihlab.core import seeded_rng
from pihlab.errors import ConfigError, DegenerateDataError, InsufficientDataError
from pihlab.learning import FEATURE_NAMES, ForestConfig, feature_importance, fit_forest, fit_forest_arrays
from pihlab.learning.forest import DecisionTree, best_split


def test_best_split_finds_separating_feature():
    X = np.array([[0.0, 5.0], [1.0, 3.0], [2.0, 4.0], [3.0, 1.0]])
    y = np.array([0.0, 0.0, 1.0, 1.0])
    split = best_split(X, y, [0, 1], min_leaf=1)
    assert split.feature == 0
    assert split.threshold == pytest.approx(1.5)
    assert split.decrease == pytest.approx(0.5)


def test_best_split_prefers_first_feature_on_ties():
    X = np.column_stack([np.arange(6.0), np.arange(6.0)])
    y = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
    assert best_split(X, y, [0, 1], min_leaf=1).feature == 0


def test_best_split_respects_min_leaf():
    X = np.arange(6.0)[:, np.newaxis]
    y = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 0.0])
    split = best_split(X, y, [0], min_leaf=2)
    assert split is None or split.threshold > 1.0


def test_tree_fits_threshold_rule():
    rng = seeded_rng(1)
    X = rng.uniform(-1, 1, size=(200, 3))
    y = (X[:, 1] > 0.2).astype(float)
    tree = DecisionTree(ForestConfig(max_depth=3, min_leaf=1)).fit(X, y, rng)
    assert np.mean((tree.predict_proba(X) >= 0.5) == y) == 1.0
    assert np.argmax(tree.normalized_importance()) == 1


def test_forest_input_checks():
    with pytest.raises(InsufficientDataError):
        fit_forest_arrays(np.zeros((10, 2)), np.r_[np.ones(5), -np.ones(5)])
    with pytest.raises(DegenerateDataError):
        fit_forest_arrays(np.zeros((30, 2)), np.ones(30))
    with pytest.raises(ConfigError):
        ForestConfig(n_trees=0)


def test_forest_is_deterministic(nonlinear_dataset):
    config = ForestConfig(n_trees=10)
    a = fit_forest(nonlinear_dataset, "x", config, seeded_rng(3))
    b = fit_forest(nonlinear_dataset, "x", config, seeded_rng(3))
    assert a.seeds == b.seeds
    np.testing.assert_array_equal(a.importance_matrix(), b.importance_matrix())


@pytest.mark.parametrize("axis, informative", [("x", ("fx", "my")), ("y", ("fy", "mx"))])
def test_importance_ranks_lateral_channels(nonlinear_dataset, axis, informative):
    forest = fit_forest(nonlinear_dataset, axis, ForestConfig(n_trees=30), seeded_rng(4))
    mean, std = feature_importance(forest)
    assert forest.feature_names == FEATURE_NAMES
    assert mean.sum() == pytest.approx(1.0)
    assert np.all(std >= 0)
    top = FEATURE_NAMES[int(np.argmax(mean))]
    assert top in informative
    share = sum(mean[FEATURE_NAMES.index(name)] for name in informative)
    assert share > 0.6
    assert mean[FEATURE_NAMES.index("fz")] + mean[FEATURE_NAMES.index("mz")] <= 0.10


def test_forest_predicts_direction(nonlinear_dataset):
    forest = fit_forest(nonlinear_dataset, "y", ForestConfig(n_trees=20), seeded_rng(5))
    predicted = forest.predict(nonlinear_dataset.features())
    accuracy = np.mean(predicted == (nonlinear_dataset.signs("y") > 0))
    assert accuracy >= 0.9


def threshold_labels(a, rng, n_flipped=4):
    y = np.where(a > 0, 1.0, -1.0)
    flipped = rng.choice(len(y), n_flipped, replace=False)
    y[flipped] = -y[flipped]
    return y


def test_importance_concentrates_on_the_only_informative_channel():
    rng = seeded_rng(6)
    X = rng.uniform(-1, 1, size=(400, 6))
    y = threshold_labels(X[:, 0], rng)
    mean, _ = feature_importance(fit_forest_arrays(X, y, ForestConfig(n_trees=20), seeded_rng(7)))
    assert mean[0] >= 0.9


def test_duplicated_channel_shares_importance():
    rng = seeded_rng(8)
    a = rng.uniform(-1, 1, size=400)
    noise = rng.uniform(-1, 1, size=(400, 3))
    y = threshold_labels(a, rng)
    config = ForestConfig(n_trees=20)

    single, _ = feature_importance(fit_forest_arrays(np.column_stack([a, noise]), y, config, seeded_rng(9)))
    paired, _ = feature_importance(fit_forest_arrays(np.column_stack([a, a, noise[:, :2]]), y, config, seeded_rng(9)))
    assert paired[0] + paired[1] == pytest.approx(single[0], abs=0.1)
