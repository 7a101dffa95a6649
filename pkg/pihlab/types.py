import os
from typing import Callable, Optional, Tuple, Union

import numpy as np

AnyPath = Union[str, bytes, os.PathLike]
Vector3 = Tuple[float, float, float]
FloatArray = np.ndarray

# (tick, wrench) -> wrench, applied to each observation before the controller sees it
SensorHook = Callable[[int, "Wrench"], "Wrench"]
# called with the episode log after every tick; True ends the episode early
StopPredicate = Optional[Callable[["EpisodeLog"], bool]]
