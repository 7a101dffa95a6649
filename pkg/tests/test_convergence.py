import numpy as np
import pytest

from pihlab.control import LinearAccommodationController, NonlinearAccommodationController, run_episode
from pihlab.convergence import (
    ConvergenceCriterionConfig,
    contact_onset,
    convergence_stop,
    detect_convergence,
    detect_episode_convergence,
    ensemble_detect,
    ensemble_statistics,
    snapshot_features,
    snapshot_window,
    window_statistics,
    window_statistics_array,
)
from pihlab.core import PlanarMisalignment, derive_seed, seeded_rng
from pihlab.errors import ConfigError, InsufficientDataError


# per-window fz levels of a synthetic episode: three free-space windows, a
# rise, then a plateau
LEVELS = [0.0, 0.0, 0.0, 5.0, 8.0, 9.0, 9.02, 9.03, 9.03, 9.03]


def levels_to_fz(levels, window_ticks=50):
    return np.repeat(np.asarray(levels, dtype=float), window_ticks)


@pytest.fixture
def criterion():
    return ConvergenceCriterionConfig()


def test_window_statistics_array():
    means, two_sigmas = window_statistics_array(np.arange(120.0), 50)
    np.testing.assert_allclose(means, [24.5, 74.5])
    np.testing.assert_allclose(two_sigmas, 2.0 * np.std(np.arange(50.0), ddof=1) * np.ones(2))


def test_window_statistics_needs_a_full_window():
    with pytest.raises(InsufficientDataError):
        window_statistics_array(np.zeros(30), 50)
    with pytest.raises(InsufficientDataError):
        window_statistics_array(np.zeros(120), 50, min_windows=3)


def test_window_statistics_on_log(make_fz_log):
    stats = window_statistics(make_fz_log(levels_to_fz(LEVELS)), window_len=1.0)
    assert [s.window_index for s in stats] == list(range(10))
    np.testing.assert_allclose([s.mean_fz for s in stats], LEVELS)
    np.testing.assert_allclose([s.two_sigma_fz for s in stats], np.zeros(10), atol=1e-12)


def test_detect_convergence_requires_consecutive_passes(criterion):
    assert detect_convergence([[10.0, 5.0, 5.05, 5.02, 5.01]], criterion) == 3
    strict = criterion.replace(consecutive_required=3)
    assert detect_convergence([[10.0, 5.0, 5.05, 5.02, 5.01]], strict) == 4


def test_detect_convergence_checks_every_statistic(criterion):
    settled = [1.0, 1.0, 1.0, 1.0, 1.0]
    moving = [0.0, 1.0, 2.0, 3.0, 3.05]
    assert detect_convergence([settled, moving], criterion) is None
    assert detect_convergence([settled, settled], criterion) == 2


def test_detect_convergence_edge_cases(criterion):
    assert detect_convergence([[1.0, 1.0]], criterion) is None
    assert detect_convergence([[0.0, 1.0, 0.0, 1.0, 0.0]], criterion) is None
    # a change equal to the threshold does not count as settled
    assert detect_convergence([[0.0, 0.5, 1.0, 1.5]], ConvergenceCriterionConfig(eta_th=0.5)) is None


def test_contact_onset():
    assert contact_onset(LEVELS, 0.5) == 3
    assert contact_onset(np.zeros(5), 0.5) is None


def test_free_space_never_settles(make_fz_log, criterion):
    log = make_fz_log(np.zeros(500))
    assert detect_episode_convergence(log, criterion) is None
    assert snapshot_features(log, criterion) is None
    assert not convergence_stop(criterion)(log)

    ensemble = ensemble_statistics([make_fz_log(np.zeros(500)) for _ in range(3)], criterion.window_len)
    assert ensemble_detect(ensemble, criterion) is None


def test_peg_in_hole_settles_without_contact(make_fz_log, criterion):
    log = make_fz_log(np.zeros(500), in_hole=True)
    assert detect_episode_convergence(log, criterion) == 2
    np.testing.assert_allclose(snapshot_features(log, criterion), np.zeros(6))


def test_episode_detection_skips_free_space(make_fz_log, criterion):
    log = make_fz_log(levels_to_fz(LEVELS))
    means = np.asarray(LEVELS)
    assert detect_convergence([means, np.zeros(10)], criterion) == 2
    assert detect_episode_convergence(log, criterion) == 7
    assert snapshot_window(log, criterion) == 8
    np.testing.assert_allclose(snapshot_features(log, criterion), [0, 0, 9.03, 0, 0, 0])


def test_snapshot_uses_last_window_when_detection_is_last(make_fz_log, criterion):
    log = make_fz_log(levels_to_fz(LEVELS[:8]))
    assert detect_episode_convergence(log, criterion) == 7
    assert snapshot_window(log, criterion) == 7


def test_snapshot_features_of_aborted_log(make_fz_log, criterion):
    log = make_fz_log(levels_to_fz(LEVELS))
    log.annotate_abort("fault", 12)
    assert snapshot_features(log, criterion) is None


def test_short_log_has_no_detection(make_fz_log, criterion):
    assert detect_episode_convergence(make_fz_log(np.ones(20)), criterion) is None
    assert snapshot_features(make_fz_log(np.ones(20)), criterion) is None


def test_convergence_stop(make_fz_log, criterion):
    stop = convergence_stop(criterion)
    fz = levels_to_fz(LEVELS)
    assert not stop(make_fz_log(fz[:400]))
    assert not stop(make_fz_log(fz[:449]))
    assert stop(make_fz_log(fz[:450]))


def test_ensemble_statistics(make_fz_log):
    rng = seeded_rng(9)
    logs = [make_fz_log(levels_to_fz(LEVELS) + rng.normal(0, 0.05, 500)) for _ in range(8)]
    ensemble = ensemble_statistics(logs)
    assert len(ensemble) == 10
    assert ensemble.n_episodes == 8
    np.testing.assert_allclose(ensemble.mean, LEVELS, atol=0.02)
    np.testing.assert_allclose(ensemble.ci_half, 1.96 * ensemble.mean_std / np.sqrt(8))
    np.testing.assert_allclose(ensemble.esig, 0.1, atol=0.02)
    assert list(ensemble.rows())[3][0] == 3


def test_ensemble_statistics_truncates_to_shortest(make_fz_log):
    logs = [make_fz_log(levels_to_fz(LEVELS)), make_fz_log(levels_to_fz(LEVELS[:6]))]
    assert len(ensemble_statistics(logs)) == 6


def test_ensemble_needs_two_episodes(make_fz_log):
    with pytest.raises(InsufficientDataError):
        ensemble_statistics([make_fz_log(np.zeros(100))])


def test_criterion_validation():
    with pytest.raises(ConfigError):
        ConvergenceCriterionConfig(eta_th=0.0)
    with pytest.raises(ConfigError):
        ConvergenceCriterionConfig(consecutive_required=0)


def run(controller, env_cfg, traj, seed):
    return run_episode(controller, env_cfg, traj, PlanarMisalignment(2.0, 0.0), seeded_rng(seed))


def test_nonlinear_episode_settles_quickly(env_cfg, traj, criterion):
    detected = detect_episode_convergence(run(NonlinearAccommodationController(), env_cfg, traj, 1), criterion)
    assert detected is not None
    assert 3 <= detected <= 12


def test_linear_episode_settles_later(env_cfg, traj, criterion):
    detected = detect_episode_convergence(run(LinearAccommodationController(), env_cfg, traj, 1), criterion)
    assert detected is not None
    assert 10 <= detected <= 30


def test_ensemble_detection(env_cfg, traj, criterion):
    rng = seeded_rng(21)
    logs = [run(NonlinearAccommodationController(), env_cfg, traj, derive_seed(rng)) for _ in range(5)]
    detected = ensemble_detect(ensemble_statistics(logs), criterion)
    assert detected is not None
    assert detected < len(ensemble_statistics(logs))


def test_online_stop_ends_episode_after_snapshot_window(env_cfg, traj, criterion):
    episode = run_episode(
        NonlinearAccommodationController(), env_cfg, traj, PlanarMisalignment(2.0, 0.0), seeded_rng(1),
        stop=convergence_stop(criterion),
    )
    assert episode.metadata.get("stopped_early")
    detected = detect_episode_convergence(episode, criterion)
    assert (detected + 2) * 50 == len(episode)
    assert snapshot_features(episode, criterion) is not None


def test_nonlinear_settles_before_linear(env_cfg, traj, criterion):
    rng = seeded_rng(22)
    for _ in range(5):
        seed = derive_seed(rng)
        nonlinear = detect_episode_convergence(run(NonlinearAccommodationController(), env_cfg, traj, seed), criterion)
        linear = detect_episode_convergence(run(LinearAccommodationController(), env_cfg, traj, seed), criterion)
        assert nonlinear < linear
