import math

import numpy as np
import pytest

from pihlab.control import (
    LinearAccommodationConfig,
    LinearAccommodationController,
    NonlinearAccommodationConfig,
    NonlinearAccommodationController,
    StiffnessPassthrough,
    explicit_feedback_sum,
    initial_linear_state,
    linear_command,
    nonlinear_command,
    run_episode,
    sigmoid_alpha,
    steady_state_force_linear,
)
from pihlab.core import PlanarMisalignment, Position3, TrajectoryConfig, Wrench, seeded_rng
from pihlab.errors import ConfigError, SensorFaultError
from pihlab.log import WARNING, RecordingLogger


def force(fz, fx=0.0, fy=0.0):
    return Wrench(fx, fy, fz, 0.0, 0.0, 0.0)


def test_linear_command_single_step():
    cfg = LinearAccommodationConfig(Ka=0.1, gamma=0.5)
    x_c, state = linear_command(initial_linear_state((0, 0, 0)), (0.0, 0.0, -0.01), force(2.0), cfg)
    assert state.e[2] == pytest.approx(0.1)
    assert x_c.z == pytest.approx(0.09)
    assert state.x_c_prev == x_c


def test_recursive_feedback_matches_explicit_sum():
    cfg = LinearAccommodationConfig(Ka=(0.02, 0.03, 0.05), gamma=0.45)
    forces = seeded_rng(5).normal(0.0, 3.0, size=(40, 3))
    state = initial_linear_state((0, 0, 0))
    for k, f in enumerate(forces, start=1):
        _, state = linear_command(state, (0, 0, 0), force(f[2], f[0], f[1]), cfg)
        for axis in range(3):
            expected = explicit_feedback_sum(forces[:k, axis], cfg.Ka[axis], cfg.gamma)
            assert state.e[axis] == pytest.approx(expected, rel=1e-9, abs=1e-12)


def test_steady_state_force():
    assert steady_state_force_linear(0.1, 0.01, 0.35) == pytest.approx(-18.5714, abs=1e-4)
    assert steady_state_force_linear(-0.01, 1e-3, 0.35) == pytest.approx(18.571, abs=1e-3)


@pytest.mark.parametrize("gamma, Ka", [(0.0, 1e-3), (1.0, 1e-3), (0.5, 0.0), (0.5, -1.0)])
def test_steady_state_force_rejects_bad_gains(gamma, Ka):
    with pytest.raises(ConfigError):
        steady_state_force_linear(-0.01, Ka, gamma)


def test_linear_config_validation():
    with pytest.raises(ConfigError):
        LinearAccommodationConfig(gamma=1.2)
    assert LinearAccommodationConfig(gamma=0.35).in_working_interval
    assert not LinearAccommodationConfig(gamma=0.9).in_working_interval


def test_sigmoid_alpha():
    assert sigmoid_alpha(5.0, 5.0, 5.0) == 0.5
    assert sigmoid_alpha(1e6, 5.0, 5.0) == 1.0
    assert sigmoid_alpha(-1e6, 5.0, 5.0) == 0.0
    assert 0.0 < sigmoid_alpha(4.0, 5.0, 5.0) < 0.5


def test_nonlinear_command_passes_reference_in_free_space():
    cfg = NonlinearAccommodationConfig(Ka=5.0, f_sat=5.0)
    x_c = nonlinear_command(Position3(0, 0, 1.0), (0, 0, -0.01), force(0.0), cfg)
    assert x_c.z == pytest.approx(1.0 - 0.01 * cfg.free_space_advance())
    assert cfg.free_space_advance() > 0.9999


def test_nonlinear_command_stalls_at_high_force():
    cfg = NonlinearAccommodationConfig(Ka=5.0, f_sat=5.0)
    x_c = nonlinear_command(Position3(0, 0, 0.0), (0, 0, -0.01), force(-20.0), cfg)
    assert abs(x_c.z) < 1e-30


def test_controllers_reject_non_finite_force():
    for controller in (LinearAccommodationController(), NonlinearAccommodationController(), StiffnessPassthrough()):
        controller.reset((0, 0, 0))
        with pytest.raises(SensorFaultError):
            controller.command((0, 0, -0.01), force(float("nan")))


def run(controller, env, misalignment=(2.0, 0.0), num_ticks=2000, **kwargs):
    traj = TrajectoryConfig(num_ticks=num_ticks).build(env)
    return run_episode(controller, env, traj, PlanarMisalignment(*misalignment), seeded_rng(0), **kwargs)


def test_linear_episode_settles_at_steady_force(quiet_env):
    episode = run(LinearAccommodationController(), quiet_env)
    assert len(episode) == 2001
    expected = steady_state_force_linear(-0.01, 1e-3, 0.35)
    assert episode.fz[-1] == pytest.approx(expected, rel=1e-3)
    assert episode.fz.max() <= 1.5 * expected


def test_nonlinear_episode_holds_near_saturation(quiet_env):
    episode = run(NonlinearAccommodationController(), quiet_env)
    assert 5.5 < episode.fz[-1] < 7.0


def test_stiffness_passthrough_force_grows(quiet_env):
    episode = run(StiffnessPassthrough(), quiet_env)
    assert episode.fz[-1] == pytest.approx(190.0, rel=1e-9)
    assert np.all(np.diff(episode.fz) >= 0)


def test_episode_metadata(env_cfg):
    controller = LinearAccommodationController()
    episode = run(controller, env_cfg, misalignment=(1.0, -2.0), num_ticks=100)
    assert episode.metadata["misalignment"] == pytest.approx([1.0, -2.0])
    assert episode.metadata["controller"]["kind"] == "linear"
    assert episode.metadata["ticks"] == 100
    assert not episode.aborted
    assert episode[0].x == Position3(1.0, -2.0, 1.0)


def test_episode_is_reproducible(env_cfg):
    a = run(NonlinearAccommodationController(), env_cfg, num_ticks=300)
    b = run(NonlinearAccommodationController(), env_cfg, num_ticks=300)
    np.testing.assert_array_equal(a.wrenches, b.wrenches)


def test_sensor_fault_aborts_episode(env_cfg):
    def hook(tick, wrench):
        return force(float("nan")) if tick == 300 else wrench

    logger = RecordingLogger()
    episode = run(LinearAccommodationController(), env_cfg, sensor_hook=hook, logger=logger)
    assert episode.aborted
    assert episode.metadata["abort_tick"] == 300
    assert len(episode) == 301
    assert len(logger.messages(WARNING)) == 1


def test_stop_predicate_ends_episode(env_cfg):
    episode = run(NonlinearAccommodationController(), env_cfg, stop=lambda log: len(log) >= 10)
    assert len(episode) == 10
    assert episode.metadata["stopped_early"]


def test_resume_keeps_linear_feedback(quiet_env):
    controller = LinearAccommodationController()
    first = run(controller, quiet_env, num_ticks=500)
    e_before = controller.state.e
    assert e_before[2] > 0
    controller.resume(first.last.x_c)
    assert controller.state.e == e_before
    controller.reset(first.last.x_c)
    assert controller.state.e == (0.0, 0.0, 0.0)


def force_settles(episode, tolerance=0.01):
    steps = np.linalg.norm(np.diff(episode.wrenches[:, :3], axis=0), axis=1)
    late = np.flatnonzero(steps > tolerance)
    return late.size == 0 or late[-1] < len(episode) - 50


@pytest.mark.parametrize("seed", range(6))
def test_linear_force_settles_for_working_gains(quiet_env, seed):
    rng = seeded_rng(100 + seed)
    cfg = LinearAccommodationConfig(
        Ka=(1e-5, 1e-5, rng.uniform(5e-4, 5e-3)),
        gamma=rng.uniform(0.3, 0.6),
    )
    episode = run(LinearAccommodationController(cfg), quiet_env, misalignment=(2.0, 1.0), num_ticks=3000)
    assert force_settles(episode)
    steady = steady_state_force_linear(-0.01, cfg.Ka[2], cfg.gamma)
    assert episode.fz.max() <= 1.5 * steady


@pytest.mark.parametrize("seed", range(6))
def test_nonlinear_force_settles(quiet_env, seed):
    rng = seeded_rng(200 + seed)
    Ka = rng.uniform(1.0, 5.0)
    f_sat = rng.uniform(2.0, 10.0)
    cfg = NonlinearAccommodationConfig(Ka=Ka, f_sat=f_sat)
    episode = run(NonlinearAccommodationController(cfg), quiet_env, misalignment=(2.0, 1.0), num_ticks=3000)
    assert force_settles(episode)
    assert episode.fz.max() <= f_sat + 10.0 / Ka
    assert math.isfinite(episode.fz[-1])


def test_sigmoid_three_quarter_point():
    Ka, f_sat = 2.5, 7.0
    assert sigmoid_alpha(f_sat + math.log(3.0) / Ka, Ka, f_sat) == pytest.approx(0.75, abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_linear_steady_force_matches_closed_form(quiet_env, seed):
    rng = seeded_rng(300 + seed)
    cfg = LinearAccommodationConfig(Ka=(1e-5, 1e-5, rng.uniform(5e-4, 5e-3)), gamma=rng.uniform(0.3, 0.6))
    episode = run(LinearAccommodationController(cfg), quiet_env, num_ticks=3000)
    expected = steady_state_force_linear(-0.01, cfg.Ka[2], cfg.gamma)
    assert episode.fz[-1] == pytest.approx(expected, rel=0.05)
