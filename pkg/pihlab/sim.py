"""Synthetic planar peg-in-hole environment.

The robot side is a stiffness controller: the observed normal force is
Ks_z * (x.z - x_c.z), with x the actual and x_c the commanded position. The
environment is a rigid surface at `surface_z` with a round hole. A peg whose
axis is closer to the hole center than the radial clearance falls in freely;
otherwise the rim holds it on the surface and it follows the command
laterally.

Lateral force and moment signatures are smooth, bounded and sign-preserving
in the planar offset (dx, dy) = x_c.xy - hole_center:

    fx = -mu * N * tanh(dx / s)      mx = +c * N * tanh(dy / s)
    fy = -mu * N * tanh(dy / s)      my = -c * N * tanh(dx / s)
    fz = N                           mz = 0

plus independent zero-mean Gaussian noise on every channel.
"""
import collections
import math
from typing import Optional, Tuple

import numpy as np

from pihlab._common import ConfigObject, vector
from pihlab.core import Position3, Wrench, seeded_rng
from pihlab.errors import ConfigError


__all__ = (
    "EnvConfig",
    "EnvState",
    "ContactEnv",
    "resolve_position",
    "observe_wrench",
    "step",
)


class EnvConfig(ConfigObject):
    """Contact environment parameters.

    Attributes:
        stiffness (tuple of 3 float): Diagonal of the robot stiffness
            controller Ks, N/mm. Only the z entry generates force; laterally
            the peg follows its command.
        peg_radius (float): mm. Sets the lever arm of the default moment gain.
        hole_clearance (float): Radial gap between peg and hole, mm. The peg
            enters only when its lateral offset is strictly below this.
        surface_z (float): Height of the part surface, mm.
        hole_center (tuple of 2 float): True hole center (x, y), mm.
        friction_gain (float): mu, scales lateral forces.
        moment_gain (float): c, mm, scales lateral moments.
        lateral_shape (float): s, mm, the offset over which the lateral
            signature saturates.
        noise_sigma (float): Std of the additive noise, applied in N to forces
            and in N*mm to moments.
        seed (int): Seed of the environment's own noise stream.
    """

    SECTION = "env"
    FIELDS = (
        "stiffness", "peg_radius", "hole_clearance", "surface_z", "hole_center",
        "friction_gain", "moment_gain", "lateral_shape", "noise_sigma", "seed",
    )

    def __init__(
        self,
        stiffness=(10.0, 10.0, 10.0),
        peg_radius=10.0,
        hole_clearance=0.5,
        surface_z=0.0,
        hole_center=(0.0, 0.0),
        friction_gain=0.3,
        moment_gain=10.0,
        lateral_shape=2.0,
        noise_sigma=0.05,
        seed=0,
    ):
        self.stiffness = vector(stiffness, 3, "stiffness")
        self.peg_radius = float(peg_radius)
        self.hole_clearance = float(hole_clearance)
        self.surface_z = float(surface_z)
        self.hole_center = vector(hole_center, 2, "hole_center")
        self.friction_gain = float(friction_gain)
        self.moment_gain = float(moment_gain)
        self.lateral_shape = float(lateral_shape)
        self.noise_sigma = float(noise_sigma)
        self.seed = int(seed)
        self.validate()

    def validate(self):
        if any(not k > 0 for k in self.stiffness):
            raise ConfigError("stiffness components must be positive", stiffness=self.stiffness)
        if not self.hole_clearance > 0:
            raise ConfigError("hole clearance must be positive", hole_clearance=self.hole_clearance)
        if not self.lateral_shape > 0:
            raise ConfigError("lateral shape must be positive", lateral_shape=self.lateral_shape)
        if self.noise_sigma < 0:
            raise ConfigError("noise sigma must not be negative", noise_sigma=self.noise_sigma)
        return self

    def offset_of(self, position):
        """Planar offset of `position` from the true hole center."""
        return (position[0] - self.hole_center[0], position[1] - self.hole_center[1])

    def noiseless(self):
        return self.replace(noise_sigma=0.0)


class EnvState(collections.namedtuple("EnvState", ("position", "in_hole", "contact_depth"))):
    """Resolved peg state for one commanded position.

    `contact_depth` is how far the command sits below the surface while the
    rim supports the peg; zero when not rim-supported.
    """

    __slots__ = ()


def resolve_position(cfg: EnvConfig, x_c: Position3) -> EnvState:
    dx, dy = cfg.offset_of(x_c)
    offset = math.hypot(dx, dy)

    # offset == clearance counts as blocked
    if offset < cfg.hole_clearance:
        return EnvState(
            position=Position3(x_c.x, x_c.y, x_c.z),
            in_hole=x_c.z < cfg.surface_z,
            contact_depth=0.0,
        )

    return EnvState(
        position=Position3(x_c.x, x_c.y, max(x_c.z, cfg.surface_z)),
        in_hole=False,
        contact_depth=max(0.0, cfg.surface_z - x_c.z),
    )


def observe_wrench(cfg: EnvConfig, state: EnvState, x_c: Position3, rng: Optional[np.random.Generator]) -> Wrench:
    """F/T observation for a resolved state.

    `rng` may be None when `cfg.noise_sigma` is zero.
    """
    normal = max(0.0, cfg.stiffness[2] * (state.position.z - x_c.z))
    dx, dy = cfg.offset_of(x_c)
    tx = math.tanh(dx / cfg.lateral_shape)
    ty = math.tanh(dy / cfg.lateral_shape)

    mu_n = cfg.friction_gain * normal
    c_n = cfg.moment_gain * normal
    values = [
        -mu_n * tx,
        -mu_n * ty,
        normal,
        c_n * ty,
        -c_n * tx,
        0.0,
    ]

    if cfg.noise_sigma > 0:
        noise = rng.normal(0.0, cfg.noise_sigma, size=6)
        values = [v + n for v, n in zip(values, noise.tolist())]

    return Wrench(*values)


def step(cfg: EnvConfig, x_c: Position3, rng) -> Tuple[Position3, Wrench]:
    state = resolve_position(cfg, x_c)
    return state.position, observe_wrench(cfg, state, x_c, rng)


class ContactEnv(object):
    """One environment instance: a config plus its own noise stream.

    An instance is meant for a single episode on a single thread; run
    episodes concurrently by giving each its own instance.
    """

    def __init__(self, cfg: EnvConfig, rng=None):
        self.cfg = cfg
        self.rng = rng if rng is not None else seeded_rng(cfg.seed)
        self.state = None

    def step(self, x_c: Position3) -> Tuple[EnvState, Wrench]:
        self.state = resolve_position(self.cfg, x_c)
        return self.state, observe_wrench(self.cfg, self.state, x_c, self.rng)
