import pytest

from pihlab.control import LinearAccommodationController, NonlinearAccommodationController
from pihlab.core import Position3, TrajectoryConfig, Wrench, seeded_rng
from pihlab.episode import EpisodeLog
from pihlab.learning import Dataset, collect_dataset, fit_direction_models
from pihlab.sim import EnvConfig


DATASET_SIZE = 150


@pytest.fixture
def env_cfg():
    return EnvConfig()


@pytest.fixture
def quiet_env():
    return EnvConfig(noise_sigma=0.0)


@pytest.fixture
def traj(env_cfg):
    return TrajectoryConfig().build(env_cfg)


@pytest.fixture
def make_fz_log():
    """Factory for logs whose only non-zero channel is fz."""

    def make(fz_values, dt=0.02, in_hole=False):
        log = EpisodeLog(dt=dt)
        for k, fz in enumerate(fz_values):
            log.append(
                k * dt, None, None, Position3(0.0, 0.0, 0.0),
                Wrench(0.0, 0.0, float(fz), 0.0, 0.0, 0.0), in_hole,
            )
        return log

    return make


@pytest.fixture(scope="session")
def nonlinear_dataset():
    return collect_dataset(EnvConfig(), NonlinearAccommodationController(), DATASET_SIZE, seeded_rng(11))


@pytest.fixture(scope="session")
def linear_dataset():
    return collect_dataset(EnvConfig(), LinearAccommodationController(), DATASET_SIZE, seeded_rng(12))


@pytest.fixture(scope="session")
def mixed_dataset(linear_dataset, nonlinear_dataset):
    return Dataset(list(linear_dataset) + list(nonlinear_dataset))


@pytest.fixture(scope="session")
def nonlinear_models(nonlinear_dataset):
    return fit_direction_models(nonlinear_dataset)


@pytest.fixture(scope="session")
def linear_models(linear_dataset):
    return fit_direction_models(linear_dataset)
