"""Microphone array geometry, spherical candidate grids and far-field TDOA tables."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

SPEED_OF_SOUND = 343.0


@dataclass(frozen=True, eq=False)
class MicArray:
    """Microphone positions in meters, shape (N, 3).

    Pairs are enumerated as ``(m, m')`` with ``m > m'``, ordered by ``m`` then ``m'``.
    """

    positions: np.ndarray
    speed_of_sound: float = SPEED_OF_SOUND

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 2:
            raise ValueError(f"positions must be (N>=2, 3), got {pos.shape}")
        d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
        d[np.diag_indices(len(pos))] = np.inf
        if d.min() < 1e-9:
            raise ValueError("two microphones coincide")
        if self.speed_of_sound <= 0:
            raise ValueError("speed of sound must be positive")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def n_mics(self) -> int:
        return len(self.positions)

    @cached_property
    def pairs(self) -> np.ndarray:
        return np.array([(m, mp) for m in range(1, self.n_mics) for mp in range(m)], dtype=np.intp)

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)

    @cached_property
    def pair_distances(self) -> np.ndarray:
        m, mp = self.pairs.T
        return np.linalg.norm(self.positions[m] - self.positions[mp], axis=1)

    @property
    def center(self) -> np.ndarray:
        return self.positions.mean(axis=0)

    def translated(self, offset) -> "MicArray":
        return MicArray(self.positions + np.asarray(offset, dtype=np.float64), self.speed_of_sound)


def load_array(path) -> MicArray:
    """Read ``positions = [[x, y, z], ...]`` (and optional ``speed_of_sound``) from a TOML file."""
    with open(Path(path), "rb") as fh:
        doc = tomllib.load(fh)
    if "positions" not in doc:
        raise ValueError(f"{path}: missing 'positions'")
    return MicArray(np.array(doc["positions"], dtype=np.float64), float(doc.get("speed_of_sound", SPEED_OF_SOUND)))


def default_array() -> MicArray:
    ref = resources.files("srpedge") / "data" / "default_array.toml"
    with resources.as_file(ref) as p:
        return load_array(p)


def dump_array(array: MicArray) -> str:
    rows = ",\n".join("  [%.6f, %.6f, %.6f]" % tuple(p) for p in array.positions)
    return f"speed_of_sound = {array.speed_of_sound!r}\npositions = [\n{rows},\n]\n"


def unit_vector(elevation, azimuth) -> np.ndarray:
    elevation = np.asarray(elevation, dtype=np.float64)
    azimuth = np.asarray(azimuth, dtype=np.float64)
    ce = np.cos(elevation)
    return np.stack([ce * np.cos(azimuth), ce * np.sin(azimuth), np.sin(elevation)], axis=-1)


def to_angles(v) -> tuple[np.ndarray, np.ndarray]:
    """(elevation, azimuth) in radians; azimuth wrapped to [0, 2π)."""
    v = np.asarray(v, dtype=np.float64)
    r = np.linalg.norm(v, axis=-1)
    el = np.arcsin(np.clip(v[..., 2] / r, -1.0, 1.0))
    az = np.mod(np.arctan2(v[..., 1], v[..., 0]), 2 * np.pi)
    return el, az


@dataclass(frozen=True, eq=False)
class CandidateGrid:
    """Res1 x Res2 cell-center directions, flattened elevation-major (q = i_el * Res2 + i_az)."""

    res_elevation: int
    res_azimuth: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.res_elevation, self.res_azimuth

    @property
    def Q(self) -> int:
        return self.res_elevation * self.res_azimuth

    @cached_property
    def elevations(self) -> np.ndarray:
        step = np.pi / self.res_elevation
        return -np.pi / 2 + (np.arange(self.res_elevation) + 0.5) * step

    @cached_property
    def azimuths(self) -> np.ndarray:
        step = 2 * np.pi / self.res_azimuth
        return (np.arange(self.res_azimuth) + 0.5) * step

    @cached_property
    def directions(self) -> np.ndarray:
        el, az = np.meshgrid(self.elevations, self.azimuths, indexing="ij")
        return unit_vector(el, az).reshape(-1, 3)

    @property
    def azimuth_step_deg(self) -> float:
        return 360.0 / self.res_azimuth

    @property
    def elevation_step_deg(self) -> float:
        return 180.0 / self.res_elevation

    @property
    def srp_grid_deg(self) -> float:
        """Adjacent-candidate spacing: the azimuth step on the equator."""
        return self.azimuth_step_deg

    def cell_of(self, direction) -> tuple[int, int]:
        el, az = to_angles(direction)
        i = int(np.clip(np.floor((el + np.pi / 2) / (np.pi / self.res_elevation)), 0, self.res_elevation - 1))
        j = int(np.floor(az / (2 * np.pi / self.res_azimuth))) % self.res_azimuth
        return i, j

    def cell_distance(self, a: tuple[int, int], b: tuple[int, int]) -> int:
        """Chebyshev distance between cells, azimuth taken circularly."""
        de = abs(a[0] - b[0])
        da = abs(a[1] - b[1]) % self.res_azimuth
        return max(de, min(da, self.res_azimuth - da))


def build_grid(res_elevation: int, res_azimuth: int) -> CandidateGrid:
    if res_elevation < 2 or res_azimuth < 2:
        raise ValueError(f"grid resolution must be at least 2x2, got {res_elevation}x{res_azimuth}")
    return CandidateGrid(int(res_elevation), int(res_azimuth))


@dataclass(frozen=True, eq=False)
class TdoaTable:
    """Per-pair, per-candidate TDOA ``seconds`` shaped (P, Q) and the sampling rate it is paired with."""

    seconds: np.ndarray
    fs: float
    grid_shape: tuple[int, int]

    @property
    def lags(self) -> np.ndarray:
        """TDOA in samples (τ/T)."""
        return self.seconds * self.fs

    @property
    def n_pairs(self) -> int:
        return self.seconds.shape[0]

    @property
    def Q(self) -> int:
        return self.seconds.shape[1]


def tdoa_table(array: MicArray, grid: CandidateGrid, fs: float) -> TdoaTable:
    """Far-field arrival-time differences τ_m − τ_m' for a source in each candidate direction.

    A plane wave from unit direction u reaches microphone m at −u·p_m / c, so the pair
    difference is u·(p_m' − p_m) / c.
    """
    m, mp = array.pairs.T
    baseline = array.positions[mp] - array.positions[m]
    seconds = baseline @ grid.directions.T / array.speed_of_sound
    seconds.setflags(write=False)
    return TdoaTable(seconds, float(fs), grid.shape)


@dataclass(frozen=True)
class NSampBounds:
    per_pair: np.ndarray  # floor(dist * fs / c) for each pair
    fs: float

    @property
    def total(self) -> int:
        """Two-sided interpolation index count, Σ (2·N_p + 1)."""
        return int(np.sum(2 * self.per_pair + 1))

    @property
    def one_sided_total(self) -> int:
        """Σ (N_p + 1): rows of the one-sided paired table."""
        return int(np.sum(self.per_pair + 1))

    @property
    def max(self) -> int:
        return int(self.per_pair.max())

    @property
    def n_pairs(self) -> int:
        return len(self.per_pair)


def n_samp(array: MicArray, fs: float) -> NSampBounds:
    if fs <= 0:
        raise ValueError("fs must be positive")
    # tolerate rounding when dist*fs/c is an exact integer
    ratio = array.pair_distances * fs / array.speed_of_sound
    per_pair = np.floor(ratio + 1e-9).astype(np.intp)
    return NSampBounds(per_pair, float(fs))


def max_pair_distance(array: MicArray) -> float:
    return float(array.pair_distances.max())


def pair_count(n_mics: int) -> int:
    return n_mics * (n_mics - 1) // 2

