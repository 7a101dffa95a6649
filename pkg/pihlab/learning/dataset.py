"""Misalignment datasets: collection under an accommodation controller and
CSV persistence."""
import collections
import csv
from typing import Iterable, Optional

import numpy as np

from pihlab import log
from pihlab.console import ensure_progress
from pihlab.control import run_episode
from pihlab.convergence import ConvergenceCriterionConfig, convergence_stop, snapshot_features
from pihlab.core import (
    PlanarMisalignment,
    TrajectoryConfig,
    axis_index,
    derive_seed,
    float_text,
    seeded_rng,
)
from pihlab.errors import CollectionError, InvalidSpecError
from pihlab.learning._common import FEATURE_NAMES, FeatureSelector, sign_with_tiebreak
from pihlab.types import AnyPath


__all__ = (
    "DatasetRecord",
    "Dataset",
    "DATASET_COLUMNS",
    "sample_misalignment",
    "collect_dataset",
)


DATASET_COLUMNS = ("dx", "dy") + FEATURE_NAMES + ("controller", "seed")

# horizon multiplier for the single retry of a non-settling episode
RETRY_HORIZON_FACTOR = 2

# failed episodes in a row that end a collection
MAX_CONSECUTIVE_FAILURES = 3


DatasetRecord = collections.namedtuple(
    "DatasetRecord", (
        "misalignment",
        "features",
        "controller",
        "seed",
    )
)


class Dataset(object):
    """An ordered collection of DatasetRecord with array views for fitting.

    `failed_seeds` lists the seeds of collected episodes that never settled
    and so have no record. It is not part of equality or the CSV.
    """

    def __init__(self, records: Optional[Iterable[DatasetRecord]] = None):
        self.records = list(records or ())
        self.failed_seeds = [ ]

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, index):
        return self.records[index]

    def __eq__(self, other):
        return isinstance(other, Dataset) and self.records == other.records

    def append(self, record: DatasetRecord):
        self.records.append(record)

    def features(self, selector=FeatureSelector.FULL) -> np.ndarray:
        if not self.records:
            return np.zeros((0, len(FeatureSelector.parse(selector).indices)))
        full = np.array([r.features for r in self.records], dtype=float)
        return FeatureSelector.parse(selector).select(full)

    def labels(self, axis) -> np.ndarray:
        """Signed offset along `axis`, mm."""
        index = axis_index(axis)
        return np.array([r.misalignment[index] for r in self.records], dtype=float)

    def signs(self, axis) -> np.ndarray:
        return sign_with_tiebreak(self.labels(axis))

    def controllers(self):
        return sorted(set(r.controller for r in self.records))

    def for_controller(self, kind) -> "Dataset":
        return Dataset(r for r in self.records if r.controller == kind)

    def subset(self, indices) -> "Dataset":
        return Dataset(self.records[i] for i in indices)

    def to_csv(self, path: AnyPath):
        with open(path, "w", newline="") as stream:
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(DATASET_COLUMNS)
            for record in self.records:
                writer.writerow(
                    [float_text(v) for v in record.misalignment]
                    + [float_text(v) for v in record.features]
                    + [record.controller, str(record.seed)]
                )

    @classmethod
    def from_csv(cls, path: AnyPath) -> "Dataset":
        dataset = cls()
        with open(path, "r", newline="") as stream:
            reader = csv.reader(stream)
            header = next(reader, None)
            if header is None or tuple(header) != DATASET_COLUMNS:
                raise InvalidSpecError("unexpected dataset CSV header", path=path)
            for line_num, row in enumerate(reader, 2):
                if len(row) != len(DATASET_COLUMNS):
                    raise InvalidSpecError("wrong column count", path=path, line=line_num)
                try:
                    values = [float(v) for v in row[:8]]
                    seed = int(row[9])
                except ValueError:
                    raise InvalidSpecError("unparseable dataset row", path=path, line=line_num)
                dataset.append(DatasetRecord(
                    PlanarMisalignment(values[0], values[1]),
                    tuple(values[2:8]),
                    row[8],
                    seed,
                ))
        return dataset


def sample_misalignment(rng, limit=PlanarMisalignment.LIMIT) -> PlanarMisalignment:
    dx, dy = rng.uniform(-limit, limit, size=2).tolist()
    return PlanarMisalignment(dx, dy)


def settle_features(controller, env_cfg, traj, forced, seed, criterion, stop, logger):
    """Snapshot features of the episode with this seed, re-running it once on
    a longer horizon when it doesn't settle. None when neither run settles."""
    episode_rng = seeded_rng(seed)
    offset = forced if forced is not None else sample_misalignment(episode_rng)
    episode = run_episode(controller, env_cfg, traj, offset, episode_rng, logger=logger, stop=stop)
    features = snapshot_features(episode, criterion)
    if features is not None:
        return offset, features

    logger.warning("did not settle in {ticks} ticks, retrying", ticks=traj.num_ticks)
    retry_rng = seeded_rng(seed)
    if forced is None:
        sample_misalignment(retry_rng)
    episode = run_episode(
        controller, env_cfg, traj.with_ticks(traj.num_ticks * RETRY_HORIZON_FACTOR),
        offset, retry_rng, logger=logger, stop=stop,
    )
    return offset, snapshot_features(episode, criterion)


def collect_dataset(
    env_cfg,
    controller,
    n,
    rng,
    traj=None,
    criterion=None,
    misalignment=None,
    logger=None,
    progress_handler=None,
) -> Dataset:
    """Run episodes at random misalignments until `n` of them have settled,
    and record the quasi-steady wrench of each.

    Every episode gets its own seed drawn from `rng`. From that seed come the
    misalignment (uniform on [-3, 3] mm per axis) and then the sensor noise,
    so a record can be reproduced from its seed alone. Episodes stop as soon
    as the snapshot window is complete. An episode that doesn't settle is
    re-run once with a doubled horizon; if that fails too, its seed goes to
    `failed_seeds` and a fresh episode takes its place.

    Args:
        env_cfg (EnvConfig): The environment.
        controller: Accommodation controller; reset at each episode start.
        n (int): Number of records.
        rng: Parent stream for episode seeds.
        traj (TrajectorySpec or None): Reference; defaults to
            TrajectoryConfig().build(env_cfg).
        criterion (ConvergenceCriterionConfig or None): Snapshot criterion.
        misalignment (PlanarMisalignment or None): Forces every episode to
            this offset instead of sampling.
        logger (log.Logger or None)
        progress_handler: Object with `progress(done, total)` and
            `complete()`.

    Raises:
        CollectionError: MAX_CONSECUTIVE_FAILURES episodes in a row, or more
            than `n` in total, failed. The error carries the failed seeds.
    """
    if n < 1:
        raise InvalidSpecError("need at least one episode", n=n)
    logger = log.ensure_logger(logger)
    progress = ensure_progress(progress_handler)
    traj = traj if traj is not None else TrajectoryConfig().build(env_cfg)
    criterion = criterion if criterion is not None else ConvergenceCriterionConfig()
    stop = convergence_stop(criterion)

    dataset = Dataset()
    consecutive = 0
    while len(dataset) < n:
        seed = derive_seed(rng)
        episode_logger = logger.tagged("seed %d" % seed)
        offset, features = settle_features(
            controller, env_cfg, traj, misalignment, seed, criterion, stop, episode_logger,
        )

        if features is None:
            dataset.failed_seeds.append(seed)
            consecutive += 1
            episode_logger.warning("did not settle after retry, recorded as failure")
            if consecutive >= MAX_CONSECUTIVE_FAILURES or len(dataset.failed_seeds) > n:
                progress.complete()
                raise CollectionError(
                    "episodes keep failing to settle",
                    seed=seed, failed_seeds=list(dataset.failed_seeds), collected=len(dataset),
                )
            continue

        consecutive = 0
        dataset.append(DatasetRecord(
            PlanarMisalignment(*offset),
            tuple(float(v) for v in features),
            controller.kind,
            seed,
        ))
        logger.debug(
            "record {index}: offset=({dx:.3f}, {dy:.3f}) fz={fz:.3f}",
            index=len(dataset) - 1, dx=offset[0], dy=offset[1], fz=features[2],
        )
        progress.progress(len(dataset), n)

    progress.complete()
    logger.verbose(
        "collected {n} {kind} records, {failed} failed episodes",
        n=n, kind=controller.kind, failed=len(dataset.failed_seeds),
    )
    return dataset
