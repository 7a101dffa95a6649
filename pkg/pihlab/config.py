"""Run configuration: one JSON document describing a whole experiment.

    {
      "v": 1,
      "seed": 0,
      "env": {...},            EnvConfig
      "trajectory": {...},     TrajectoryConfig
      "controller": {"kind": "nonlinear", "linear": {...}, "nonlinear": {...}},
      "convergence": {...},    ConvergenceCriterionConfig
      "learning": {...},       LearningConfig
      "policy": {...},         PolicyConfig
      "insertion": {...},      InsertionConfig
      "analysis": {...}        AnalysisConfig
    }

Every section is optional and takes its documented defaults. Unknown keys
anywhere, or a different "v", are errors.

The seed actually used is the --seed flag if given, else the PIH_SEED
environment variable, else the config's "seed". Each stage then derives its
own stream from that seed and a fixed purpose number, so stages don't
perturb each other's randomness.
"""
import json
import os
from typing import Optional

import numpy as np

from pihlab._common import ConfigObject, dump_json
from pihlab.control import (
    CONTROLLER_KINDS,
    LinearAccommodationConfig,
    NonlinearAccommodationConfig,
)
from pihlab.convergence import ConvergenceCriterionConfig
from pihlab.core import TrajectoryConfig, seeded_rng
from pihlab.errors import ConfigError
from pihlab.learning._common import FeatureSelector
from pihlab.learning.forest import ForestConfig
from pihlab.learning.gp import RbfKernelParams
from pihlab.policy import PolicyConfig
from pihlab.sim import EnvConfig
from pihlab.types import AnyPath


__all__ = (
    "RunConfig",
    "ControllerConfig",
    "LearningConfig",
    "InsertionConfig",
    "AnalysisConfig",
    "SEED_ENV_VAR",
    "resolve_seed",
    "seed_for",
    "rng_for",
)


CONFIG_VERSION = 1
SEED_ENV_VAR = "PIH_SEED"

PURPOSES = {
    "collect": 1,
    "analysis": 2,
    "forest": 3,
    "tune": 4,
    "insert": 5,
}


class ControllerConfig(ConfigObject):
    """
    Attributes:
        kind (str): linear, nonlinear or stiffness.
        linear (LinearAccommodationConfig)
        nonlinear (NonlinearAccommodationConfig)
    """

    SECTION = "controller"
    FIELDS = ("kind", "linear", "nonlinear")

    def __init__(self, kind="nonlinear", linear=None, nonlinear=None):
        if kind not in CONTROLLER_KINDS:
            raise ConfigError("unknown controller kind", kind=kind)
        self.kind = kind
        self.linear = section(LinearAccommodationConfig, linear)
        self.nonlinear = section(NonlinearAccommodationConfig, nonlinear)

    def build(self, kind=None):
        kind = kind or self.kind
        if kind not in CONTROLLER_KINDS:
            raise ConfigError("unknown controller kind", kind=kind)
        gains = {"linear": self.linear, "nonlinear": self.nonlinear}.get(kind)
        return CONTROLLER_KINDS[kind](gains)


class LearningConfig(ConfigObject):
    """
    Attributes:
        n_episodes (int): Records collected by `collect`.
        split_seed (int): Seed of the 80/20 evaluation split.
        feature_mode (str): full or reduced, for the trained models.
        kernel (RbfKernelParams)
        tune (bool): Grid-search the lengthscale before training.
        forest (ForestConfig)
    """

    SECTION = "learning"
    FIELDS = ("n_episodes", "split_seed", "feature_mode", "kernel", "tune", "forest")

    def __init__(self, n_episodes=1200, split_seed=0, feature_mode="reduced", kernel=None, tune=False, forest=None):
        self.n_episodes = int(n_episodes)
        self.split_seed = int(split_seed)
        self.feature_mode = FeatureSelector.parse(feature_mode).value
        self.kernel = section(RbfKernelParams, kernel)
        self.tune = bool(tune)
        self.forest = section(ForestConfig, forest)
        if self.n_episodes < 1:
            raise ConfigError("n_episodes must be at least 1", n_episodes=self.n_episodes)


class InsertionConfig(ConfigObject):
    """
    Attributes:
        n_trials (int)
        workspace (float): Half-width, mm, of the square the hole is placed in.
    """

    SECTION = "insertion"
    FIELDS = ("n_trials", "workspace")

    def __init__(self, n_trials=20, workspace=50.0):
        self.n_trials = int(n_trials)
        self.workspace = float(workspace)
        if self.n_trials < 1:
            raise ConfigError("n_trials must be at least 1", n_trials=self.n_trials)


class AnalysisConfig(ConfigObject):
    """
    Attributes:
        n_episodes (int): Ensemble size for convergence analysis.
        misalignment (tuple of 2 float): Fixed lateral offset of every
            ensemble episode, mm. Must leave the peg on the rim.
    """

    SECTION = "analysis"
    FIELDS = ("n_episodes", "misalignment")

    def __init__(self, n_episodes=50, misalignment=(2.0, 0.0)):
        self.n_episodes = int(n_episodes)
        self.misalignment = tuple(float(v) for v in misalignment)
        if self.n_episodes < 2:
            raise ConfigError("an ensemble needs at least 2 episodes", n_episodes=self.n_episodes)
        if len(self.misalignment) != 2:
            raise ConfigError("misalignment needs 2 components", misalignment=self.misalignment)


def section(cls, value):
    if isinstance(value, cls):
        return value
    return cls.from_dict(value)


class RunConfig(ConfigObject):
    SECTION = "run"
    FIELDS = ("v", "seed", "env", "trajectory", "controller", "convergence",
              "learning", "policy", "insertion", "analysis")

    def __init__(self, v=CONFIG_VERSION, seed=0, env=None, trajectory=None, controller=None, convergence=None,
                 learning=None, policy=None, insertion=None, analysis=None):
        if v != CONFIG_VERSION:
            raise ConfigError("unsupported run-config version", v=v)
        self.v = v
        self.seed = int(seed)
        self.env = section(EnvConfig, env)
        self.trajectory = section(TrajectoryConfig, trajectory)
        self.controller = section(ControllerConfig, controller)
        self.convergence = section(ConvergenceCriterionConfig, convergence)
        self.learning = section(LearningConfig, learning)
        self.policy = section(PolicyConfig, policy)
        self.insertion = section(InsertionConfig, insertion)
        self.analysis = section(AnalysisConfig, analysis)

    @classmethod
    def load(cls, path: AnyPath, seed_override=None, environ=None):
        """Read a run-config file and apply the seed precedence.

        Raises:
            ConfigError: invalid JSON or invalid contents.
            OSError: the file can't be read.
        """
        with open(path, "r") as stream:
            try:
                data = json.load(stream)
            except json.JSONDecodeError as error:
                raise ConfigError("run-config is not valid JSON", path=path, line=error.lineno)
        config = cls.from_dict(data)
        config.seed = resolve_seed(seed_override, environ, config.seed)
        return config

    def save(self, path: AnyPath):
        with open(path, "w") as stream:
            dump_json(self.to_dict(), stream)

    def trajectory_spec(self):
        return self.trajectory.build(self.env)


def resolve_seed(flag=None, environ=None, config_seed=0):
    if flag is not None:
        return int(flag)
    environ = os.environ if environ is None else environ
    text = environ.get(SEED_ENV_VAR)
    if text:
        try:
            return int(text)
        except ValueError:
            raise ConfigError("%s must be an integer" % SEED_ENV_VAR, value=text)
    return int(config_seed)


def seed_for(seed, purpose) -> int:
    """Child seed of `seed` for a named stage."""
    try:
        purpose_id = PURPOSES[purpose]
    except KeyError:
        raise ConfigError("unknown seed purpose", purpose=purpose)
    sequence = np.random.SeedSequence([int(seed) % 2 ** 64, purpose_id])
    return int(sequence.generate_state(1, np.uint64)[0])


def rng_for(seed, purpose) -> np.random.Generator:
    return seeded_rng(seed_for(seed, purpose))
