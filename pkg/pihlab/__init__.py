"""
Simulation laboratory for force-bounded peg-in-hole insertion: accommodation
controllers, convergence detection, misalignment learning and a corrective
insertion policy.
"""

__version__ = "0.1.0"


from pihlab.control import (
    LinearAccommodationController,
    NonlinearAccommodationController,
    StiffnessPassthrough,
    run_episode,
)
from pihlab.core import (
    PlanarMisalignment,
    Position3,
    TrajectorySpec,
    Wrench,
)
from pihlab.sim import EnvConfig
