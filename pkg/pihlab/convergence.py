"""Windowed force statistics and the convergence criterion.

An episode's fz channel is tiled into consecutive, non-overlapping windows
(1 s by default). For each window the sample mean and twice the sample
standard deviation are taken. Across an ensemble of episodes, four
statistics are tracked per window index:

    mean        mean over episodes of the window means
    ci_half     half-width of the normal 95% interval on that mean
    esig        mean over episodes of the window 2-sigma
    ssig        standard deviation over episodes of the window 2-sigma

The process is considered converged at the first window k at which every
tracked statistic moved by less than eta_th from the previous window, for
`consecutive_required` windows in a row. A single episode only has the first
and third statistics, so the online detector runs on (mean, 2-sigma).

Windows before the contact forms are skipped by the online and ensemble
detectors: free-space windows are noise-only and would trivially pass. Until
some window is in contact there is nothing to detect, except for a peg that
has already dropped into the hole, which never touches the rim at all.
"""
import collections
import math
from typing import List, Optional, Sequence

import numpy as np

from pihlab._common import ConfigObject
from pihlab.episode import EpisodeLog
from pihlab.errors import ConfigError, InsufficientDataError
from pihlab.units import ticks_for


__all__ = (
    "WindowStats",
    "EnsembleStats",
    "ConvergenceCriterionConfig",
    "window_statistics",
    "window_statistics_array",
    "ensemble_statistics",
    "detect_convergence",
    "contact_onset",
    "detect_episode_convergence",
    "snapshot_window",
    "snapshot_features",
    "convergence_stop",
    "ensemble_detect",
)


# two-sided 95% quantile of the standard normal
Z_95 = 1.96


WindowStats = collections.namedtuple("WindowStats", ("window_index", "mean_fz", "two_sigma_fz"))


class ConvergenceCriterionConfig(ConfigObject):
    """Parameters of the windowed convergence criterion.

    Attributes:
        eta_th (float): Largest window-to-window change, N, that still counts
            as settled. Applied to every statistic.
        consecutive_required (int): Number of consecutive settled windows.
        window_len (float): Window length, s.
        contact_force (float): Mean |fz|, N, above which a window counts as
            in contact. Used to locate contact onset.
    """

    SECTION = "convergence"
    FIELDS = ("eta_th", "consecutive_required", "window_len", "contact_force")

    def __init__(self, eta_th=0.1, consecutive_required=2, window_len=1.0, contact_force=0.5):
        self.eta_th = float(eta_th)
        self.consecutive_required = int(consecutive_required)
        self.window_len = float(window_len)
        self.contact_force = float(contact_force)
        if not self.eta_th > 0:
            raise ConfigError("eta_th must be positive", eta_th=self.eta_th)
        if self.consecutive_required < 1:
            raise ConfigError("consecutive_required must be at least 1",
                              consecutive_required=self.consecutive_required)
        if not self.window_len > 0:
            raise ConfigError("window_len must be positive", window_len=self.window_len)
        if self.contact_force < 0:
            raise ConfigError("contact_force must not be negative", contact_force=self.contact_force)


def window_statistics_array(values, window_ticks, min_windows=1):
    """Per-window mean and 2 * sample std of `values`.

    The trailing partial window is dropped.

    Returns:
        (means, two_sigmas) as 1-d arrays, one entry per full window.

    Raises:
        InsufficientDataError: fewer than `min_windows` full windows.
    """
    values = np.asarray(values, dtype=float)
    n_windows = len(values) // window_ticks
    if n_windows < min_windows:
        raise InsufficientDataError(
            "episode too short for windowed statistics",
            ticks=len(values), window_ticks=window_ticks, min_windows=min_windows,
        )
    tiles = values[:n_windows * window_ticks].reshape(n_windows, window_ticks)
    if window_ticks < 2:
        return tiles[:, 0].copy(), np.zeros(n_windows)
    return tiles.mean(axis=1), 2.0 * tiles.std(axis=1, ddof=1)


def window_statistics(log: EpisodeLog, window_len=1.0, min_windows=1) -> List[WindowStats]:
    window_ticks = ticks_for(window_len, log.dt)
    means, two_sigmas = window_statistics_array(log.fz, window_ticks, min_windows)
    return [
        WindowStats(index, float(m), float(s))
        for index, (m, s) in enumerate(zip(means, two_sigmas))
    ]


class EnsembleStats(object):
    """Per-window ensemble statistics over a set of episodes.

    Attributes:
        n_episodes (int): Episodes contributing to every window.
        mean (numpy.ndarray): Mean over episodes of window means.
        mean_std (numpy.ndarray): Std over episodes (ddof=1) of window means.
        ci_half (numpy.ndarray): 1.96 * mean_std / sqrt(n_episodes).
        esig (numpy.ndarray): Mean over episodes of window 2-sigma.
        ssig (numpy.ndarray): Std over episodes (ddof=1) of window 2-sigma.
    """

    def __init__(self, n_episodes, mean, mean_std, esig, ssig):
        self.n_episodes = n_episodes
        self.mean = mean
        self.mean_std = mean_std
        self.ci_half = Z_95 * mean_std / math.sqrt(n_episodes)
        self.esig = esig
        self.ssig = ssig

    def __len__(self):
        return len(self.mean)

    def detection_series(self):
        return (self.mean, self.ci_half, self.esig, self.ssig)

    def rows(self):
        for k in range(len(self)):
            yield (k, float(self.mean[k]), float(self.ci_half[k]),
                   float(self.esig[k]), float(self.ssig[k]))


def ensemble_statistics(logs: Sequence[EpisodeLog], window_len=1.0) -> EnsembleStats:
    """Raises InsufficientDataError for fewer than 2 logs. Logs of unequal
    length are truncated to the shortest one's window count."""
    logs = list(logs)
    if len(logs) < 2:
        raise InsufficientDataError("ensemble statistics need at least 2 episodes", episodes=len(logs))

    per_episode = [
        window_statistics_array(log.fz, ticks_for(window_len, log.dt))
        for log in logs
    ]
    n_windows = min(len(means) for means, _ in per_episode)
    means = np.array([m[:n_windows] for m, _ in per_episode])
    sigmas = np.array([s[:n_windows] for _, s in per_episode])

    return EnsembleStats(
        n_episodes=len(logs),
        mean=means.mean(axis=0),
        mean_std=means.std(axis=0, ddof=1),
        esig=sigmas.mean(axis=0),
        ssig=sigmas.std(axis=0, ddof=1),
    )


def detect_convergence(stats_series, cfg: ConvergenceCriterionConfig) -> Optional[int]:
    """First window index k at which every statistic has changed by less than
    eta_th between each of the last `consecutive_required` window pairs.

    Args:
        stats_series: Sequence of aligned statistic sequences, one per tracked
            statistic.

    Returns:
        int window index, or None if the series never settles or has fewer
        than 3 windows.
    """
    series = np.atleast_2d(np.asarray(stats_series, dtype=float))
    n_windows = series.shape[1]
    if n_windows < 3:
        return None

    settled = np.all(np.abs(np.diff(series, axis=1)) < cfg.eta_th, axis=0)
    # settled[j - 1] describes the change from window j - 1 to window j
    run = 0
    for j in range(1, n_windows):
        run = run + 1 if settled[j - 1] else 0
        if run >= cfg.consecutive_required:
            return j
    return None


def contact_onset(means, contact_force) -> Optional[int]:
    """First window whose mean |fz| exceeds `contact_force`, or None."""
    hits = np.flatnonzero(np.abs(np.asarray(means, dtype=float)) > contact_force)
    return int(hits[0]) if hits.size else None


def detect_episode_convergence(log: EpisodeLog, cfg: ConvergenceCriterionConfig) -> Optional[int]:
    """Online detection on one episode's (mean, 2-sigma), starting at contact
    onset. Returns an absolute window index.

    With no window in contact yet the result is None, unless the peg already
    sits in the hole.
    """
    window_ticks = ticks_for(cfg.window_len, log.dt)
    if len(log) < window_ticks:
        return None
    means, two_sigmas = window_statistics_array(log.fz, window_ticks)
    onset = contact_onset(means, cfg.contact_force)
    if onset is None:
        if not log.last.in_hole:
            return None
        onset = 0
    found = detect_convergence((means[onset:], two_sigmas[onset:]), cfg)
    return None if found is None else onset + found


def snapshot_window(log: EpisodeLog, cfg: ConvergenceCriterionConfig) -> Optional[int]:
    """Window to take the quasi-steady snapshot from: the one after the
    detection window, or the detection window itself when it is the last
    full one."""
    detected = detect_episode_convergence(log, cfg)
    if detected is None:
        return None
    window_ticks = ticks_for(cfg.window_len, log.dt)
    n_windows = len(log) // window_ticks
    return detected + 1 if detected + 1 < n_windows else detected


def snapshot_features(log: EpisodeLog, cfg: ConvergenceCriterionConfig) -> Optional[np.ndarray]:
    """Mean wrench [fx, fy, fz, mx, my, mz] over the snapshot window, or None
    for aborted or never-settling episodes."""
    if log.aborted:
        return None
    window = snapshot_window(log, cfg)
    if window is None:
        return None
    window_ticks = ticks_for(cfg.window_len, log.dt)
    start = window * window_ticks
    return log.wrenches[start:start + window_ticks].mean(axis=0)


def convergence_stop(cfg: ConvergenceCriterionConfig):
    """Stop predicate for run_episode: true once the window following the
    detection window is complete. Only evaluated on window boundaries."""

    def stop(log):
        window_ticks = ticks_for(cfg.window_len, log.dt)
        if len(log) % window_ticks:
            return False
        detected = detect_episode_convergence(log, cfg)
        return detected is not None and (detected + 2) * window_ticks <= len(log)

    return stop


def ensemble_detect(ensemble: EnsembleStats, cfg: ConvergenceCriterionConfig) -> Optional[int]:
    """Four-statistic detection over an ensemble, starting at the contact
    onset of the ensemble mean. Returns an absolute window index, or None
    when the ensemble mean never shows contact."""
    onset = contact_onset(ensemble.mean, cfg.contact_force)
    if onset is None:
        return None
    found = detect_convergence([s[onset:] for s in ensemble.detection_series()], cfg)
    return None if found is None else onset + found
