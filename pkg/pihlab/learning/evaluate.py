from typing import Optional

import numpy as np

from pihlab import log
from pihlab.core import seeded_rng
from pihlab.errors import DegenerateDataError, InsufficientDataError
from pihlab.learning._common import AXES, FeatureSelector, sign_with_tiebreak
from pihlab.learning.classify import fit_direction_classifier, fit_magnitude_regressor
from pihlab.learning.gp import RbfKernelParams


__all__ = (
    "EvaluationReport",
    "split_indices",
    "evaluate_models",
)


MIN_RECORDS = 100
TEST_FRACTION = 0.2
ROW_KEYS = ("axis", "controller", "feature_mode", "accuracy", "rmse")


def split_indices(n, seed, test_fraction=TEST_FRACTION):
    """Deterministic (train, test) index arrays for `n` records."""
    order = seeded_rng(seed).permutation(n)
    n_test = int(round(n * test_fraction))
    return np.sort(order[n_test:]), np.sort(order[:n_test])


class EvaluationReport(object):
    """Held-out accuracy and RMSE per axis, controller and feature mode.

    Attributes:
        rows (list of dict): One row per (axis, controller, feature_mode) with
            exactly the keys axis, controller, feature_mode, accuracy, rmse.
            accuracy is the direction classifier's; rmse the offset
            regressor's, in mm.
        regression_direction (list of dict): Sign accuracy of the offset
            regressor, keyed like `rows` without rmse.
        split_seed (int)
        sizes (dict): controller -> (n_train, n_test).
        skipped (dict): controller -> record count, for controllers left out
            of the evaluation.
    """

    def __init__(self, rows, regression_direction, split_seed, sizes, skipped=None):
        self.rows = rows
        self.regression_direction = regression_direction
        self.split_seed = split_seed
        self.sizes = sizes
        self.skipped = dict(skipped or {})

    def lookup(self, axis, controller, feature_mode):
        for row in self.rows:
            if (row["axis"], row["controller"], row["feature_mode"]) == (axis, controller, feature_mode):
                return row
        raise KeyError((axis, controller, feature_mode))

    def controllers(self):
        return sorted(set(row["controller"] for row in self.rows))

    def to_dict(self):
        return {
            "split_seed": self.split_seed,
            "rows": self.rows,
            "regression_direction": self.regression_direction,
            "sizes": {k: list(v) for k, v in sorted(self.sizes.items())},
            "skipped": dict(sorted(self.skipped.items())),
        }

    @classmethod
    def from_dict(cls, data):
        return cls(
            data["rows"],
            data.get("regression_direction", [ ]),
            data.get("split_seed"),
            {k: tuple(v) for k, v in data.get("sizes", {}).items()},
            data.get("skipped", {}),
        )


def evaluate_group(group, controller, split_seed, params, logger):
    """Rows, regressor sign rows and (n_train, n_test) for one controller."""
    train_idx, test_idx = split_indices(len(group), split_seed)
    train, test = group.subset(train_idx), group.subset(test_idx)

    rows = [ ]
    regression_direction = [ ]
    for axis in AXES:
        truth = test.labels(axis)
        truth_sign = test.signs(axis)
        for selector in FeatureSelector:
            features = test.features(FeatureSelector.FULL)

            classifier = fit_direction_classifier(train, axis, selector, params, logger)
            accuracy = float(np.mean(classifier.predict(features) == truth_sign))

            regressor = fit_magnitude_regressor(train, axis, selector, params, logger)
            mean, _ = regressor.predict(features)
            rmse = float(np.sqrt(np.mean((mean - truth) ** 2)))
            sign_accuracy = float(np.mean(sign_with_tiebreak(mean) == truth_sign))

            rows.append(dict(zip(ROW_KEYS, (axis, controller, selector.value, accuracy, rmse))))
            regression_direction.append({
                "axis": axis, "controller": controller,
                "feature_mode": selector.value, "accuracy": sign_accuracy,
            })
            logger.verbose(
                "{controller} {axis} {mode}: accuracy={acc:.4f} rmse={rmse:.4f}",
                controller=controller, axis=axis, mode=selector.value, acc=accuracy, rmse=rmse,
            )
    return rows, regression_direction, (len(train), len(test))


def evaluate_models(dataset, split_seed, params: Optional[RbfKernelParams] = None, logger=None) -> EvaluationReport:
    """Fit direction classifiers and offset regressors on an 80/20 split of
    each controller's records, with full and reduced features, and score them
    on the held-out part.

    A controller with fewer than MIN_RECORDS records, or whose training part
    holds a single direction class, is left out with a warning and listed in
    the report's `skipped`.

    Raises:
        InsufficientDataError: no controller could be evaluated.
    """
    logger = log.ensure_logger(logger)

    rows = [ ]
    regression_direction = [ ]
    sizes = { }
    skipped = { }
    for controller in dataset.controllers():
        group = dataset.for_controller(controller)
        if len(group) < MIN_RECORDS:
            logger.warning(
                "skipping {controller}: {n} records, need {min}",
                controller=controller, n=len(group), min=MIN_RECORDS,
            )
            skipped[controller] = len(group)
            continue
        try:
            group_rows, group_direction, sizes[controller] = evaluate_group(
                group, controller, split_seed, params, logger,
            )
        except DegenerateDataError as error:
            logger.warning("skipping {controller}: {error!s}", controller=controller, error=error)
            skipped[controller] = len(group)
            continue
        rows.extend(group_rows)
        regression_direction.extend(group_direction)

    if not rows:
        raise InsufficientDataError(
            "model evaluation needs at least %d records of one controller" % MIN_RECORDS,
            n=len(dataset), skipped=skipped,
        )
    return EvaluationReport(rows, regression_direction, split_seed, sizes, skipped)
