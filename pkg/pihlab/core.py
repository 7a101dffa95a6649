"""Shared geometric and signal types, the reference trajectory generator and
seeded random streams.

Frame conventions: z is the insertion axis, positive up, so insertion
advances in -z. Lengths in mm, forces in N, moments in N*mm.
"""
import collections
import math
from typing import List, Sequence

import numpy as np

from pihlab._common import ConfigObject
from pihlab.errors import InvalidSpecError
from pihlab.units import DEFAULT_DT


__all__ = (
    "Position3",
    "Wrench",
    "PlanarMisalignment",
    "TrajectorySpec",
    "TrajectoryConfig",
    "make_constant_velocity_trajectory",
    "seeded_rng",
    "derive_seed",
    "CSV_COLUMNS",
    "float_text",
    "format_csv_row",
    "parse_csv_row",
)


UNIT_TOLERANCE = 1e-9
SEED_MODULUS = 2 ** 64


class Position3(collections.namedtuple("Position3", ("x", "y", "z"))):
    __slots__ = ()

    def __add__(self, other):
        return Position3(self.x + other[0], self.y + other[1], self.z + other[2])

    def __sub__(self, other):
        return Position3(self.x - other[0], self.y - other[1], self.z - other[2])

    def is_finite(self):
        return all(math.isfinite(c) for c in self)


class Wrench(collections.namedtuple("Wrench", ("fx", "fy", "fz", "mx", "my", "mz"))):
    """Six-axis force/torque observation. Forces in N, moments in N*mm."""

    __slots__ = ()

    @classmethod
    def zero(cls):
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, values):
        if len(values) != 6:
            raise InvalidSpecError("a wrench needs 6 components", got=len(values))
        return cls(*(float(v) for v in values))

    @property
    def force(self):
        return (self.fx, self.fy, self.fz)

    def norm(self):
        """Euclidean norm of the force triple; moments don't contribute."""
        return math.sqrt(self.fx * self.fx + self.fy * self.fy + self.fz * self.fz)

    def is_finite(self):
        return all(math.isfinite(c) for c in self)


class PlanarMisalignment(collections.namedtuple("PlanarMisalignment", ("dx", "dy"))):
    """Offset of the peg axis from the true hole center, in mm."""

    __slots__ = ()

    # training data is drawn from [-LIMIT, LIMIT] on each axis
    LIMIT = 3.0

    def within_limit(self, limit=None):
        limit = self.LIMIT if limit is None else limit
        return abs(self.dx) <= limit and abs(self.dy) <= limit

    def radial(self):
        return math.hypot(self.dx, self.dy)

    def component(self, axis):
        return self[axis_index(axis)]


def axis_index(axis):
    if axis in (0, "x", "X"):
        return 0
    if axis in (1, "y", "Y"):
        return 1
    raise InvalidSpecError("axis must be x or y", axis=axis)


TrajectoryFields = collections.namedtuple(
    "TrajectoryFields",
    ("start", "direction", "speed", "num_ticks", "dt"),
)


class TrajectorySpec(TrajectoryFields):
    """A straight, constant-velocity reference trajectory.

    Attributes:
        start (Position3): First reference point.
        direction (tuple of 3 float): Unit direction of travel.
        speed (float): Distance advanced per tick, mm.
        num_ticks (int): Number of increments; the trajectory has
            num_ticks + 1 points.
        dt (float): Seconds per tick.
    """

    __slots__ = ()

    def __new__(cls, start, direction=(0.0, 0.0, -1.0), speed=0.01, num_ticks=2000, dt=DEFAULT_DT):
        return super().__new__(
            cls,
            Position3(*(float(c) for c in start)),
            tuple(float(c) for c in direction),
            float(speed),
            int(num_ticks),
            float(dt),
        )

    @property
    def increment(self):
        """Per-tick reference increment, direction * speed. Computed once from
        the same floats every time, so every tick sees a bit-identical value."""
        return tuple(c * self.speed for c in self.direction)

    @property
    def duration(self):
        return self.num_ticks * self.dt

    def validate(self):
        if not self.speed > 0:
            raise InvalidSpecError("trajectory speed must be positive", speed=self.speed)
        if self.num_ticks < 1:
            raise InvalidSpecError("trajectory needs at least one tick", num_ticks=self.num_ticks)
        if not self.dt > 0:
            raise InvalidSpecError("tick length must be positive", dt=self.dt)
        norm = math.sqrt(sum(c * c for c in self.direction))
        if abs(norm - 1.0) > UNIT_TOLERANCE:
            raise InvalidSpecError("trajectory direction must be a unit vector", norm=norm)
        if not self.start.is_finite():
            raise InvalidSpecError("trajectory start must be finite", start=self.start)
        return self

    def with_ticks(self, num_ticks):
        return TrajectorySpec(self.start, self.direction, self.speed, num_ticks, self.dt)

    def to_dict(self):
        return dict(
            start=list(self.start),
            direction=list(self.direction),
            speed=self.speed,
            num_ticks=self.num_ticks,
            dt=self.dt,
        )

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


class TrajectoryConfig(ConfigObject):
    """Run-config section describing the insertion approach.

    Attributes:
        approach_height (float): Start height above the part surface, mm.
        speed (float): Reference advance per tick, mm.
        num_ticks (int): Episode horizon.
        dt (float): Seconds per tick.
    """

    SECTION = "trajectory"
    FIELDS = ("approach_height", "speed", "num_ticks", "dt")

    def __init__(self, approach_height=1.0, speed=0.01, num_ticks=2000, dt=DEFAULT_DT):
        self.approach_height = float(approach_height)
        self.speed = float(speed)
        self.num_ticks = int(num_ticks)
        self.dt = float(dt)

    def build(self, env_cfg) -> TrajectorySpec:
        """Straight-down reference starting above the true hole center. The
        lateral start is replaced per episode by the misalignment."""
        start = Position3(
            env_cfg.hole_center[0],
            env_cfg.hole_center[1],
            env_cfg.surface_z + self.approach_height,
        )
        return TrajectorySpec(start, (0.0, 0.0, -1.0), self.speed, self.num_ticks, self.dt).validate()


def make_constant_velocity_trajectory(spec: TrajectorySpec) -> List[Position3]:
    """Sample the reference trajectory.

    Points are computed as start + k * increment rather than by accumulation,
    so rounding error doesn't grow with k.

    Returns:
        list of num_ticks + 1 Position3.

    Raises:
        InvalidSpecError: non-positive speed, no ticks, or a direction whose
            norm differs from 1 by more than 1e-9.
    """
    spec.validate()
    sx, sy, sz = spec.start
    ix, iy, iz = spec.increment
    return [
        Position3(sx + k * ix, sy + k * iy, sz + k * iz)
        for k in range(spec.num_ticks + 1)
    ]


def seeded_rng(seed) -> np.random.Generator:
    """Deterministic random stream for `seed`.

    The bit generator is numpy's PCG64 (PCG XSL RR 128/64), whose output for
    a given seed is fixed across platforms and numpy releases. Any integer is
    accepted; it is reduced modulo 2**64.
    """
    return np.random.Generator(np.random.PCG64(int(seed) % SEED_MODULUS))


def derive_seed(rng: np.random.Generator) -> int:
    """Draw a child seed, used to give each episode its own stream."""
    return int(rng.integers(0, 2 ** 63 - 1))


CSV_COLUMNS = ("t", "x", "y", "z", "fx", "fy", "fz", "mx", "my", "mz")


def float_text(value):
    # repr is the shortest string that round-trips, independent of locale
    return repr(float(value))


def format_csv_row(t, position: Position3, wrench: Wrench) -> List[str]:
    return [float_text(t)] + [float_text(c) for c in position] + [float_text(c) for c in wrench]


def parse_csv_row(row: Sequence[str]):
    if len(row) != len(CSV_COLUMNS):
        raise InvalidSpecError("expected %d columns" % len(CSV_COLUMNS), got=len(row))
    values = [float(v) for v in row]
    return values[0], Position3(*values[1:4]), Wrench(*values[4:10])
