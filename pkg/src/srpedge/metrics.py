"""Localization scoring: angular error, RMSAE, MAE and the SRP-grid ratio."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import CandidateGrid, to_angles, unit_vector

UNIT_TOL = 1e-9


def _check_unit(v: np.ndarray, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v, axis=-1)
    if np.any(np.abs(n - 1.0) > UNIT_TOL):
        raise ValueError(f"{name} must be unit vectors (norm deviates by {np.max(np.abs(n - 1.0)):.3g})")
    return v


def angular_error(u, v) -> np.ndarray:
    """Great-circle angle between unit vectors, in degrees (broadcasts over leading axes)."""
    u = _check_unit(u, "u")
    v = _check_unit(v, "v")
    dot = np.clip(np.sum(u * v, axis=-1), -1.0, 1.0)
    return np.degrees(np.arccos(dot))


@dataclass
class DoaSeries:
    truth: np.ndarray  # (T, 3) unit vectors
    estimate: np.ndarray  # (T, 3) unit vectors
    vad: np.ndarray | None = None  # (T,) bool

    def __post_init__(self):
        self.truth = _check_unit(np.atleast_2d(self.truth), "truth")
        self.estimate = _check_unit(np.atleast_2d(self.estimate), "estimate")
        if self.truth.shape != self.estimate.shape:
            raise ValueError(f"truth {self.truth.shape} and estimate {self.estimate.shape} differ in length")
        if self.vad is not None:
            self.vad = np.asarray(self.vad, dtype=bool)
            if self.vad.shape != (len(self.truth),):
                raise ValueError("VAD mask length must equal the number of frames")

    @classmethod
    def from_angles(cls, truth_deg, estimate_deg, vad=None) -> "DoaSeries":
        """Build from (elevation_deg, azimuth_deg) rows."""
        t = np.radians(np.asarray(truth_deg, dtype=np.float64))
        e = np.radians(np.asarray(estimate_deg, dtype=np.float64))
        return cls(unit_vector(t[:, 0], t[:, 1]), unit_vector(e[:, 0], e[:, 1]), vad)

    def __len__(self) -> int:
        return len(self.truth)

    def selection(self, masked: bool) -> np.ndarray:
        if not masked:
            return np.ones(len(self), dtype=bool)
        if self.vad is None:
            raise ValueError("masked scoring needs a VAD mask")
        if not self.vad.any():
            raise ValueError("VAD mask selects no active frames")
        return self.vad

    def errors(self, masked: bool = False) -> np.ndarray:
        sel = self.selection(masked)
        if not sel.any():
            raise ValueError("no frames to score")
        return angular_error(self.truth[sel], self.estimate[sel])


def rmsae(series: DoaSeries, masked: bool = False, combine: str = "great-circle") -> float:
    """Root-mean-square angular error in degrees.

    ``combine="great-circle"`` (default) squares the great-circle error; ``"per-axis"``
    squares the elevation and wrapped azimuth differences separately and sums them.
    """
    if combine == "great-circle":
        e = series.errors(masked)
        return float(np.sqrt(np.mean(e**2)))
    if combine == "per-axis":
        sel = series.selection(masked)
        te, ta = to_angles(series.truth[sel])
        ee, ea = to_angles(series.estimate[sel])
        de = np.degrees(ee - te)
        da = np.degrees(np.angle(np.exp(1j * (ea - ta))))
        return float(np.sqrt(np.mean(de**2 + da**2)))
    raise ValueError(f"unknown combination {combine!r}")


def mae(series: DoaSeries, masked: bool = False) -> float:
    return float(np.mean(series.errors(masked)))


def srp_grid_ratio(rmsae_deg: float, grid: CandidateGrid) -> float:
    """RMSAE over the adjacent-candidate spacing (equatorial azimuth step)."""
    return float(rmsae_deg) / grid.srp_grid_deg


def resolves_adjacent_cells(rmsae_deg: float, grid: CandidateGrid) -> bool:
    return srp_grid_ratio(rmsae_deg, grid) <= 1.0


def score(series: DoaSeries, grid: CandidateGrid | None = None, masked: bool | None = None) -> dict:
    """Metrics dictionary used by the CLI; masked scoring is the default when a VAD mask is present."""
    if masked is None:
        masked = series.vad is not None
    out = {
        "frames": int(len(series)),
        "scored_frames": int(series.selection(masked).sum()),
        "masked": bool(masked),
        "rmsae_deg": rmsae(series, masked),
        "rmsae_per_axis_deg": rmsae(series, masked, "per-axis"),
        "mae_deg": mae(series, masked),
    }
    if grid is not None:
        out["srp_grid_deg"] = grid.srp_grid_deg
        out["srp_grid_ratio"] = srp_grid_ratio(out["rmsae_deg"], grid)
        out["resolves_adjacent_cells"] = out["srp_grid_ratio"] <= 1.0
    return out
