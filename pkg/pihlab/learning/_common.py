import enum

import numpy as np

from pihlab.errors import ConfigError, DimensionError


FEATURE_NAMES = ("fx", "fy", "fz", "mx", "my", "mz")
AXES = ("x", "y")


class FeatureSelector(enum.Enum):
    """Which wrench channels feed the models. REDUCED drops fz and mz, which
    carry no information about the lateral offset."""

    FULL = "full"
    REDUCED = "reduced"

    @property
    def indices(self):
        if self is FeatureSelector.FULL:
            return (0, 1, 2, 3, 4, 5)
        return (0, 1, 3, 4)

    @property
    def names(self):
        return tuple(FEATURE_NAMES[i] for i in self.indices)

    def select(self, features):
        features = np.asarray(features, dtype=float)
        if features.shape[-1] != len(FEATURE_NAMES):
            raise DimensionError("expected full 6-channel wrench features", got=features.shape[-1])
        return features[..., list(self.indices)]

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ConfigError("unknown feature mode", feature_mode=value)


def sign_with_tiebreak(values):
    """Elementwise sign in {-1, +1}; exact zeros go to +1."""
    return np.where(np.asarray(values, dtype=float) < 0, -1, 1)
