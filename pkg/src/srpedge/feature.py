"""Network input assembly: SRP map plus the broadcast argmax coordinates, stacked over time."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .srp import SrpFrame


@dataclass
class FeatureTensor:
    """Real tensor shaped (3, T, Res1, Res2).

    Channel 0 is the SRP power map; channels 1 and 2 hold the normalized argmax
    elevation and azimuth, constant over the spatial plane at each time step.
    """

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 4 or self.values.shape[0] != 3:
            raise ValueError(f"feature tensor must be (3, T, Res1, Res2), got {self.values.shape}")

    @property
    def T(self) -> int:
        return self.values.shape[1]

    @property
    def grid_shape(self) -> tuple[int, int]:
        return self.values.shape[2], self.values.shape[3]

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape


def assemble(frames: Sequence[SrpFrame]) -> FeatureTensor:
    if len(frames) == 0:
        raise ValueError("need at least one SRP frame")
    shape = frames[0].power.shape
    for f in frames:
        if f.power.shape != shape:
            raise ValueError(f"mixed grid sizes: {shape} and {f.power.shape}")
    T = len(frames)
    out = np.empty((3, T) + shape)
    for t, f in enumerate(frames):
        out[0, t] = f.power
        el, az = f.argmax_coords
        out[1, t] = el
        out[2, t] = az
    return FeatureTensor(out)
