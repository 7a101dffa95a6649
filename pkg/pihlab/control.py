"""Accommodation controllers and the closed-loop episode runner.

Both controllers reshape a constant-velocity reference x_r into the command
x_c sent to the robot's stiffness controller, so that contact forces settle
instead of growing with the reference.

Linear law, per axis:

    x_c[k] = x_c[k-1] + dx_r + e[k],   e[k] = gamma * (e[k-1] + Ka * f[k-1])

which unrolls to the discounted sum e[k] = sum_{i<k} gamma**(k-i) * Ka * f[i].
The measured force is the environment's reaction on the peg, so a contact
pushing up (+fz) against a downward reference retracts the command.

Nonlinear law, per axis:

    x_c[k] = x_c[k-1] + (1 - alpha[k]) * dx_r,
    alpha[k] = 1 / (1 + exp(-Ka * (|f[k]| - f_sat)))

Lateral reference increments are zero for a straight-down insertion, so in
practice only the insertion axis is affected.
"""
import collections
import math
from typing import Optional, Sequence, Tuple

from pihlab import log
from pihlab._common import ConfigObject, vector
from pihlab.core import PlanarMisalignment, Position3, TrajectorySpec, Wrench
from pihlab.episode import EpisodeLog
from pihlab.errors import ConfigError, SensorFaultError
from pihlab.sim import ContactEnv, EnvConfig


__all__ = (
    "LinearAccommodationConfig",
    "NonlinearAccommodationConfig",
    "LinearState",
    "linear_command",
    "explicit_feedback_sum",
    "steady_state_force_linear",
    "sigmoid_alpha",
    "nonlinear_command",
    "LinearAccommodationController",
    "NonlinearAccommodationController",
    "StiffnessPassthrough",
    "CONTROLLER_KINDS",
    "run_episode",
)


# interval of gamma over which the linear law is known to settle well
GAMMA_WORKING_INTERVAL = (0.3, 0.6)


class LinearAccommodationConfig(ConfigObject):
    """Gains for the linear (discounted-integral) accommodation law.

    Attributes:
        Ka (tuple of 3 float): Diagonal accommodation gain, mm/N. The lateral
            entries default to a tiny value: lateral forces in the contact
            model come from friction on the rim, and a large lateral gain
            would slide the peg while its signature is being measured.
        gamma (float): Discount in (0, 1). Works well in (0.3, 0.6).
    """

    SECTION = "controller.linear"
    FIELDS = ("Ka", "gamma")

    def __init__(self, Ka=(1e-5, 1e-5, 1e-3), gamma=0.35):
        self.Ka = vector(Ka, 3, "Ka")
        self.gamma = float(gamma)
        if not 0 < self.gamma < 1:
            raise ConfigError("gamma must lie in (0, 1)", gamma=self.gamma)
        if any(not k > 0 for k in self.Ka):
            raise ConfigError("Ka components must be positive", Ka=self.Ka)

    @property
    def in_working_interval(self):
        low, high = GAMMA_WORKING_INTERVAL
        return low < self.gamma < high


class NonlinearAccommodationConfig(ConfigObject):
    """Gains for the sigmoid accommodation law.

    Attributes:
        Ka (tuple of 3 float): Sigmoid slope per axis, 1/N. A scalar is
            broadcast to all axes.
        f_sat (tuple of 3 float): Force per axis around which the command
            stops advancing, N.
    """

    SECTION = "controller.nonlinear"
    FIELDS = ("Ka", "f_sat")

    def __init__(self, Ka=5.0, f_sat=5.0):
        self.Ka = vector(Ka, 3, "Ka")
        self.f_sat = vector(f_sat, 3, "f_sat")
        if any(not k > 0 for k in self.Ka):
            raise ConfigError("Ka must be positive", Ka=self.Ka)
        if any(not f > 0 for f in self.f_sat):
            raise ConfigError("f_sat must be positive", f_sat=self.f_sat)

    def free_space_advance(self, axis=2):
        """Fraction of the reference increment passed through at zero force."""
        return 1.0 - sigmoid_alpha(0.0, self.Ka[axis], self.f_sat[axis])


LinearState = collections.namedtuple("LinearState", ("e", "x_c_prev"))


def initial_linear_state(x_c0) -> LinearState:
    return LinearState((0.0, 0.0, 0.0), Position3(*x_c0))


def check_force(f: Wrench, where):
    if not all(math.isfinite(c) for c in f.force):
        raise SensorFaultError("non-finite force reading", where=where)


def linear_command(state: LinearState, delta_xr, f_prev: Wrench, cfg: LinearAccommodationConfig) -> Tuple[Position3, LinearState]:
    check_force(f_prev, "linear_command")
    gamma = cfg.gamma
    e = tuple(
        gamma * (e_i + ka_i * f_i)
        for e_i, ka_i, f_i in zip(state.e, cfg.Ka, f_prev.force)
    )
    prev = state.x_c_prev
    x_c = Position3(
        prev.x + delta_xr[0] + e[0],
        prev.y + delta_xr[1] + e[1],
        prev.z + delta_xr[2] + e[2],
    )
    return x_c, LinearState(e, x_c)


def explicit_feedback_sum(forces: Sequence[float], Ka, gamma):
    """Discounted sum sum_{i=0}^{k-1} gamma**(k-i) * Ka * f[i] for one axis,
    with k = len(forces). Evaluated term by term, as a reference for the
    recursive form."""
    k = len(forces)
    return sum(gamma ** (k - i) * Ka * f for i, f in enumerate(forces))


def steady_state_force_linear(delta_xr, Ka, gamma):
    """Force at which the linear law stops advancing the command.

    Setting x_c[k] = x_c[k-1] gives e = -dx_r, and the fixed point of
    e = gamma * (e + Ka * f) then yields f = -dx_r * (1 - gamma) / (Ka * gamma).
    """
    if not 0 < gamma < 1:
        raise ConfigError("gamma must lie in (0, 1)", gamma=gamma)
    if not Ka > 0:
        raise ConfigError("Ka must be positive", Ka=Ka)
    return -delta_xr * (1.0 - gamma) / (Ka * gamma)


def sigmoid_alpha(f, Ka, f_sat):
    """Logistic 1 / (1 + exp(-Ka * (f - f_sat))), evaluated without overflow
    on either side."""
    z = Ka * (f - f_sat)
    if z >= 0:
        return 1.0 / (1.0 + math.exp(-z))
    ez = math.exp(z)
    return ez / (1.0 + ez)


def nonlinear_command(x_c_prev, delta_xr, f: Wrench, cfg: NonlinearAccommodationConfig) -> Position3:
    check_force(f, "nonlinear_command")
    return Position3(*(
        p + (1.0 - sigmoid_alpha(abs(f_i), ka_i, fs_i)) * d
        for p, d, f_i, ka_i, fs_i in zip(x_c_prev, delta_xr, f.force, cfg.Ka, cfg.f_sat)
    ))


class LinearAccommodationController(object):
    kind = "linear"

    def __init__(self, cfg: Optional[LinearAccommodationConfig] = None):
        self.cfg = cfg if cfg is not None else LinearAccommodationConfig()
        self.state = None

    def reset(self, x_c0):
        self.state = initial_linear_state(x_c0)

    def resume(self, x_c0):
        """Continue from `x_c0` keeping the accumulated feedback term."""
        if self.state is None:
            self.reset(x_c0)
        else:
            self.state = LinearState(self.state.e, Position3(*x_c0))

    def command(self, delta_xr, f_prev: Wrench) -> Position3:
        x_c, self.state = linear_command(self.state, delta_xr, f_prev, self.cfg)
        return x_c

    def snapshot(self):
        return dict(kind=self.kind, **self.cfg.to_dict())


class NonlinearAccommodationController(object):
    kind = "nonlinear"

    def __init__(self, cfg: Optional[NonlinearAccommodationConfig] = None):
        self.cfg = cfg if cfg is not None else NonlinearAccommodationConfig()
        self.x_c_prev = None

    def reset(self, x_c0):
        self.x_c_prev = Position3(*x_c0)

    resume = reset

    def command(self, delta_xr, f: Wrench) -> Position3:
        self.x_c_prev = nonlinear_command(self.x_c_prev, delta_xr, f, self.cfg)
        return self.x_c_prev

    def snapshot(self):
        return dict(kind=self.kind, **self.cfg.to_dict())


class StiffnessPassthrough(object):
    """The stock compliant controller: the reference goes straight through,
    so contact force grows with every tick the reference advances."""

    kind = "stiffness"

    def __init__(self, cfg=None):
        self.x_c_prev = None

    def reset(self, x_c0):
        self.x_c_prev = Position3(*x_c0)

    resume = reset

    def command(self, delta_xr, f: Wrench) -> Position3:
        check_force(f, "stiffness")
        self.x_c_prev = self.x_c_prev + delta_xr
        return self.x_c_prev

    def snapshot(self):
        return dict(kind=self.kind)


CONTROLLER_KINDS = {
    LinearAccommodationController.kind: LinearAccommodationController,
    NonlinearAccommodationController.kind: NonlinearAccommodationController,
    StiffnessPassthrough.kind: StiffnessPassthrough,
}


def identity_hook(_tick, wrench):
    return wrench


def run_episode(
    controller,
    env_cfg: EnvConfig,
    traj: TrajectorySpec,
    misalignment: Optional[PlanarMisalignment],
    rng,
    logger=None,
    stop=None,
    sensor_hook=None,
    reset=True,
) -> EpisodeLog:
    """Run one closed-loop episode: command, resolve, observe, log.

    Args:
        controller: A controller object (see CONTROLLER_KINDS).
        env_cfg (EnvConfig): The environment.
        traj (TrajectorySpec): Reference trajectory. With a misalignment, its
            start is moved laterally to hole_center + misalignment.
        misalignment (PlanarMisalignment or None): Lateral placement of the
            peg relative to the true hole center. None keeps traj.start.
        rng: Noise stream for the environment.
        logger (log.Logger or None): Receives debug and abort messages.
        stop (callable or None): Called with the log after each tick; a True
            result ends the episode early.
        sensor_hook (callable or None): (tick, wrench) -> wrench applied to
            each observation, used to inject sensor faults.
        reset (bool): If False the controller keeps its internal feedback
            state and only re-anchors on the new start.

    Returns:
        EpisodeLog with num_ticks + 1 records unless stopped or aborted.
        Sensor faults end the episode and are recorded in the log's
        metadata rather than raised.
    """
    traj.validate()
    logger = log.ensure_logger(logger)
    hook = sensor_hook if sensor_hook is not None else identity_hook

    start = traj.start
    if misalignment is not None:
        start = Position3(
            env_cfg.hole_center[0] + misalignment[0],
            env_cfg.hole_center[1] + misalignment[1],
            start.z,
        )
    delta = traj.increment
    offset = env_cfg.offset_of(start)

    episode = EpisodeLog(dt=traj.dt, metadata=dict(
        controller=controller.snapshot(),
        env_seed=env_cfg.seed,
        misalignment=[offset[0], offset[1]],
        num_ticks=traj.num_ticks,
    ))

    env = ContactEnv(env_cfg, rng)
    state, wrench = env.step(start)
    wrench = hook(0, wrench)
    episode.append(0.0, start, start, state.position, wrench, state.in_hole)

    if reset:
        controller.reset(start)
    else:
        controller.resume(start)

    tick = 0
    try:
        if not wrench.is_finite():
            raise SensorFaultError("non-finite wrench observed", tick=0)

        for tick in range(1, traj.num_ticks + 1):
            x_r = Position3(
                start.x + tick * delta[0],
                start.y + tick * delta[1],
                start.z + tick * delta[2],
            )
            x_c = controller.command(delta, wrench)
            state, wrench = env.step(x_c)
            wrench = hook(tick, wrench)
            episode.append(tick * traj.dt, x_r, x_c, state.position, wrench, state.in_hole)

            if not wrench.is_finite():
                raise SensorFaultError("non-finite wrench observed", tick=tick)

            if stop is not None and stop(episode):
                episode.metadata["stopped_early"] = True
                break

    except SensorFaultError as fault:
        episode.annotate_abort(fault, tick)
        logger.warning("episode aborted at tick {tick}: {fault!s}", tick=tick, fault=fault)

    episode.metadata["ticks"] = len(episode) - 1
    logger.debug(
        "{kind} episode: offset=({dx:.3f}, {dy:.3f}) ticks={ticks} in_hole={in_hole}",
        kind=controller.kind, dx=offset[0], dy=offset[1],
        ticks=len(episode) - 1, in_hole=episode.last.in_hole,
    )
    return episode
