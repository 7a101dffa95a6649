"""Per-axis direction classifiers and offset regressors built on the GP.

Direction is classified by least squares: a GP regression on +/-1 labels,
whose posterior mean's sign is the predicted direction and whose mean itself
serves as a confidence score.
"""
import json
from typing import Optional

import numpy as np

from pihlab import log
from pihlab._common import dump_json
from pihlab.core import axis_index
from pihlab.errors import ConfigError, DegenerateDataError, ModelFormatError
from pihlab.learning._common import AXES, FeatureSelector, sign_with_tiebreak
from pihlab.learning.gp import GpRegressor, RbfKernelParams, gp_fit
from pihlab.types import AnyPath


__all__ = (
    "DirectionClassifier",
    "MagnitudeRegressor",
    "DirectionModels",
    "fit_direction_classifier",
    "predict_direction",
    "fit_magnitude_regressor",
    "fit_direction_models",
)


MODELS_VERSION = 1


class DirectionClassifier(object):
    def __init__(self, axis, selector: FeatureSelector, gp: GpRegressor):
        self.axis = AXES[axis_index(axis)]
        self.selector = selector
        self.gp = gp

    def score(self, features):
        """Posterior mean of the +/-1 regression for full 6-channel wrench
        features, one value per row."""
        mean, _ = self.gp.predict(self.selector.select(features))
        return mean

    def predict(self, features):
        return sign_with_tiebreak(self.score(features))

    def to_dict(self):
        return {"axis": self.axis, "feature_mode": self.selector.value, "gp": self.gp.to_dict()}

    @classmethod
    def from_dict(cls, data):
        return cls(data["axis"], FeatureSelector.parse(data["feature_mode"]), GpRegressor.from_dict(data["gp"]))


class MagnitudeRegressor(object):
    """GP on the signed offset along one axis, mm."""

    def __init__(self, axis, selector: FeatureSelector, gp: GpRegressor):
        self.axis = AXES[axis_index(axis)]
        self.selector = selector
        self.gp = gp

    def predict(self, features):
        """Mean and variance of the offset for each row of full features."""
        return self.gp.predict(self.selector.select(features))

    def to_dict(self):
        return {"axis": self.axis, "feature_mode": self.selector.value, "gp": self.gp.to_dict()}

    @classmethod
    def from_dict(cls, data):
        return cls(data["axis"], FeatureSelector.parse(data["feature_mode"]), GpRegressor.from_dict(data["gp"]))


def fit_direction_classifier(dataset, axis, selector=FeatureSelector.REDUCED, params=None, logger=None):
    """Raises DegenerateDataError when every label has the same sign."""
    selector = FeatureSelector.parse(selector)
    labels = dataset.signs(axis)
    if len(np.unique(labels)) < 2:
        raise DegenerateDataError("direction labels are all one class", axis=axis, n=len(labels))
    gp = gp_fit(dataset.features(selector), labels.astype(float), params, logger=logger)
    return DirectionClassifier(axis, selector, gp)


def predict_direction(classifier: DirectionClassifier, features):
    """Sign in {-1, +1} for a single 6-vector, or an array of signs for rows."""
    signs = classifier.predict(features)
    if np.ndim(features) == 1:
        return int(signs[0])
    return signs


def fit_magnitude_regressor(dataset, axis, selector=FeatureSelector.REDUCED, params=None, logger=None):
    selector = FeatureSelector.parse(selector)
    gp = gp_fit(dataset.features(selector), dataset.labels(axis), params, logger=logger)
    return MagnitudeRegressor(axis, selector, gp)


class DirectionModels(object):
    """Both axes' classifiers and regressors, as used by the insertion
    policy.

    `predict(features)` gives, per axis, the predicted sign and the
    classifier score for one 6-channel wrench.
    """

    def __init__(self, selector, classifiers, regressors=None, controller=None):
        self.selector = FeatureSelector.parse(selector)
        self.classifiers = dict(classifiers)
        self.regressors = dict(regressors or {})
        self.controller = controller

    @property
    def trained(self):
        return all(axis in self.classifiers for axis in AXES)

    def predict(self, features):
        if not self.trained:
            raise ConfigError("direction models are not trained for both axes")
        features = np.asarray(features, dtype=float)
        result = { }
        for axis in AXES:
            score = float(self.classifiers[axis].score(features)[0])
            result[axis] = (1 if score >= 0 else -1, score)
        return result

    def predict_offset(self, features):
        return {
            axis: float(self.regressors[axis].predict(np.asarray(features, dtype=float))[0][0])
            for axis in AXES if axis in self.regressors
        }

    def to_dict(self):
        return {
            "v": MODELS_VERSION,
            "controller": self.controller,
            "feature_mode": self.selector.value,
            "classifiers": {axis: c.to_dict() for axis, c in sorted(self.classifiers.items())},
            "regressors": {axis: r.to_dict() for axis, r in sorted(self.regressors.items())},
        }

    @classmethod
    def from_dict(cls, data):
        try:
            if data["v"] != MODELS_VERSION:
                raise ModelFormatError("unsupported model file version", v=data["v"])
            return cls(
                data["feature_mode"],
                {axis: DirectionClassifier.from_dict(c) for axis, c in data["classifiers"].items()},
                {axis: MagnitudeRegressor.from_dict(r) for axis, r in data["regressors"].items()},
                data.get("controller"),
            )
        except (KeyError, TypeError, ConfigError) as error:
            raise ModelFormatError("malformed model file", detail=error)

    def save(self, path: AnyPath):
        with open(path, "w") as stream:
            dump_json(self.to_dict(), stream)

    @classmethod
    def load(cls, path: AnyPath):
        try:
            with open(path, "r") as stream:
                data = json.load(stream)
        except json.JSONDecodeError as error:
            raise ModelFormatError("model file is not JSON", path=path, detail=error)
        return cls.from_dict(data)


def fit_direction_models(
    dataset,
    selector=FeatureSelector.REDUCED,
    params: Optional[RbfKernelParams] = None,
    logger=None,
) -> DirectionModels:
    logger = log.ensure_logger(logger)
    selector = FeatureSelector.parse(selector)
    classifiers = { }
    regressors = { }
    for axis in AXES:
        classifiers[axis] = fit_direction_classifier(dataset, axis, selector, params, logger)
        regressors[axis] = fit_magnitude_regressor(dataset, axis, selector, params, logger)
        logger.verbose("fitted {axis} models on {n} records", axis=axis, n=len(dataset))
    controllers = dataset.controllers()
    return DirectionModels(
        selector, classifiers, regressors,
        controllers[0] if len(controllers) == 1 else None,
    )
