import numpy as np
import pytest
from scipy import stats

from pihlab.control import NonlinearAccommodationController, StiffnessPassthrough
from pihlab.core import PlanarMisalignment, TrajectoryConfig, seeded_rng
from pihlab.errors import CollectionError, DimensionError, InvalidSpecError
from pihlab.learning import (
    DATASET_COLUMNS,
    Dataset,
    DatasetRecord,
    FeatureSelector,
    collect_dataset,
    sample_misalignment,
)
from pihlab.log import WARNING, RecordingLogger
from pihlab.sim import EnvConfig


def test_sampler_is_uniform_on_the_training_square():
    rng = seeded_rng(77)
    draws = np.array([sample_misalignment(rng) for _ in range(5000)])
    assert np.all(np.abs(draws) <= 3.0)
    for axis in range(2):
        result = stats.kstest(draws[:, axis], stats.uniform(loc=-3.0, scale=6.0).cdf)
        assert result.pvalue > 0.01


def test_collection_is_reproducible(env_cfg):
    a = collect_dataset(env_cfg, NonlinearAccommodationController(), 5, seeded_rng(3))
    b = collect_dataset(env_cfg, NonlinearAccommodationController(), 5, seeded_rng(3))
    assert a == b
    assert len(a) == 5
    assert a.controllers() == ["nonlinear"]


def test_record_is_reproducible_from_its_seed(env_cfg):
    dataset = collect_dataset(env_cfg, NonlinearAccommodationController(), 3, seeded_rng(4))
    record = dataset[2]
    rng = seeded_rng(record.seed)
    assert sample_misalignment(rng) == record.misalignment


def test_collected_features_carry_offset_signs(nonlinear_dataset):
    # outside the hole the lateral force opposes the offset
    labels = nonlinear_dataset.labels("x")
    fx = nonlinear_dataset.features()[:, 0]
    rim = np.abs(labels) > 1.0
    assert np.all(np.sign(fx[rim]) == -np.sign(labels[rim]))


def test_forced_misalignment(env_cfg):
    dataset = collect_dataset(
        env_cfg, NonlinearAccommodationController(), 2, seeded_rng(5),
        misalignment=PlanarMisalignment(1.5, -1.0),
    )
    assert all(r.misalignment == (1.5, -1.0) for r in dataset)


class FlakyController(NonlinearAccommodationController):
    """Passes the reference straight through on the listed runs, so those
    runs never settle."""

    def __init__(self, stuck_runs):
        super().__init__()
        self.stuck_runs = set(stuck_runs)
        self.run = -1

    def reset(self, x_c0):
        self.run += 1
        super().reset(x_c0)

    resume = reset

    def command(self, delta_xr, f):
        if self.run in self.stuck_runs:
            self.x_c_prev = self.x_c_prev + delta_xr
            return self.x_c_prev
        return super().command(delta_xr, f)


def test_isolated_failure_is_recorded_and_replaced(env_cfg):
    logger = RecordingLogger()
    # runs 0 and 1 are the first episode and its retry
    dataset = collect_dataset(
        env_cfg, FlakyController({0, 1}), 2, seeded_rng(8),
        misalignment=PlanarMisalignment(2.0, 0.0), logger=logger,
    )
    assert len(dataset) == 2
    assert len(dataset.failed_seeds) == 1
    assert dataset.failed_seeds[0] not in [r.seed for r in dataset]
    assert len(logger.messages(WARNING)) == 2


def test_repeated_failures_raise_collection_error(env_cfg):
    logger = RecordingLogger()
    traj = TrajectoryConfig(num_ticks=500).build(env_cfg)
    with pytest.raises(CollectionError) as info:
        collect_dataset(
            env_cfg, StiffnessPassthrough(), 5, seeded_rng(6),
            traj=traj, misalignment=PlanarMisalignment(2.0, 0.0), logger=logger,
        )
    assert len(info.value.context["failed_seeds"]) == 3
    assert info.value.context["collected"] == 0
    # one retry warning and one failure warning per episode
    assert len(logger.messages(WARNING)) == 6


def test_failures_never_outnumber_the_request(env_cfg):
    traj = TrajectoryConfig(num_ticks=500).build(env_cfg)
    with pytest.raises(CollectionError) as info:
        collect_dataset(
            env_cfg, StiffnessPassthrough(), 1, seeded_rng(6),
            traj=traj, misalignment=PlanarMisalignment(2.0, 0.0),
        )
    assert len(info.value.context["failed_seeds"]) == 2


def test_forced_zero_misalignment_has_no_lateral_load(env_cfg):
    dataset = collect_dataset(
        env_cfg, NonlinearAccommodationController(), 3, seeded_rng(9),
        misalignment=PlanarMisalignment(0.0, 0.0),
    )
    features = dataset.features()
    bound = 3 * env_cfg.noise_sigma
    for column in (0, 1, 3, 4):
        assert np.all(np.abs(features[:, column]) <= bound)


def test_distant_approach_still_records_contact():
    env = EnvConfig(noise_sigma=0.0)
    for height in (1.0, 3.0):
        dataset = collect_dataset(
            env, NonlinearAccommodationController(), 1, seeded_rng(10),
            traj=TrajectoryConfig(approach_height=height).build(env),
            misalignment=PlanarMisalignment(2.0, 0.0),
        )
        fx, _, fz = dataset[0].features[:3]
        assert fz > 5.0
        assert fx < 0.0
        assert dataset.failed_seeds == [ ]


def test_collect_rejects_empty_request(env_cfg):
    with pytest.raises(InvalidSpecError):
        collect_dataset(env_cfg, NonlinearAccommodationController(), 0, seeded_rng(1))


def test_progress_is_reported(env_cfg):
    class Recorder(object):
        def __init__(self):
            self.calls = [ ]
            self.completed = False

        def progress(self, done, total):
            self.calls.append((done, total))

        def complete(self):
            self.completed = True

    recorder = Recorder()
    collect_dataset(env_cfg, NonlinearAccommodationController(), 3, seeded_rng(7), progress_handler=recorder)
    assert recorder.calls == [(1, 3), (2, 3), (3, 3)]
    assert recorder.completed


def make_record(dx, dy, controller="linear", seed=1):
    return DatasetRecord(PlanarMisalignment(dx, dy), (0.1, 0.2, 5.0, 0.3, 0.4, 0.0), controller, seed)


def test_dataset_views():
    dataset = Dataset([make_record(1.0, -2.0), make_record(0.0, 0.5, "nonlinear", 2)])
    np.testing.assert_array_equal(dataset.labels("y"), [-2.0, 0.5])
    np.testing.assert_array_equal(dataset.signs("x"), [1, 1])
    assert dataset.features(FeatureSelector.REDUCED).shape == (2, 4)
    assert dataset.features("full").shape == (2, 6)
    assert len(dataset.for_controller("nonlinear")) == 1
    assert dataset.subset([1])[0].seed == 2


def test_feature_selector():
    assert FeatureSelector.REDUCED.names == ("fx", "fy", "mx", "my")
    assert FeatureSelector.parse("FULL") is FeatureSelector.FULL
    with pytest.raises(DimensionError):
        FeatureSelector.REDUCED.select(np.zeros((3, 4)))


def test_dataset_csv_round_trip(tmp_path, nonlinear_dataset):
    path = tmp_path / "dataset.csv"
    nonlinear_dataset.to_csv(path)
    assert path.read_text().splitlines()[0] == ",".join(DATASET_COLUMNS)
    assert Dataset.from_csv(path) == nonlinear_dataset


@pytest.mark.parametrize("text", [
    "a,b\n",
    ",".join(DATASET_COLUMNS) + "\n1,2,3\n",
    ",".join(DATASET_COLUMNS) + "\n1,2,3,4,5,6,7,x,linear,1\n",
])
def test_dataset_csv_rejects_malformed_files(tmp_path, text):
    path = tmp_path / "bad.csv"
    path.write_text(text)
    with pytest.raises(InvalidSpecError):
        Dataset.from_csv(path)
