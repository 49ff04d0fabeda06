"""GCC-PHAT and the SRP-PHAT variants.

All four variants evaluate the same quantity, the per-pair GCC-PHAT steered to each
candidate TDOA and summed over pairs:

* ``fd_srp``      direct sum over frequency bins (the exact reference),
* ``td_srp``      inverse FFT then integer-lag lookup (lossy),
* ``lc_srp``      Whittaker-Shannon interpolation from 2·N_p+1 lag samples per pair,
* ``lc_srp_edge`` the same interpolation folded onto n >= 0 by pairing ±n.

Real-signal bin weighting: DC and Nyquist count once, interior bins twice, i.e.
``Σ_k w_k · 2·Re[G(k)·e^{jωτ}]`` with ``w_0 = w_{K/2} = 1/2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .geometry import CandidateGrid, MicArray, NSampBounds, TdoaTable, n_samp, tdoa_table
from .signal import AudioClip, FrameSpec, SpectralFrame, spectra

METHODS = ("fd", "td", "lc", "lc-edge")
PHAT_EPS = 1e-12
SINGULAR_TOL = 1e-8


@dataclass
class GccPhatSpectrum:
    values: np.ndarray  # (P, K/2+1) complex, pair order of MicArray.pairs
    K: int
    eps: float = PHAT_EPS
    frame_index: int = 0

    @property
    def n_pairs(self) -> int:
        return self.values.shape[0]

    @classmethod
    def zeros(cls, n_pairs: int, K: int) -> "GccPhatSpectrum":
        return cls(np.zeros((n_pairs, K // 2 + 1), dtype=np.complex128), K)


@dataclass
class SrpFrame:
    power: np.ndarray  # (Res1, Res2)
    frame_index: int = 0

    @property
    def argmax(self) -> tuple[int, int]:
        # np.argmax returns the first maximum: ties resolve to the lowest flat index
        i, j = np.unravel_index(int(np.argmax(self.power)), self.power.shape)
        return int(i), int(j)

    @property
    def argmax_coords(self) -> tuple[float, float]:
        i, j = self.argmax
        r1, r2 = self.power.shape
        return (i + 0.5) / r1, (j + 0.5) / r2

    def argmax_angles_deg(self) -> tuple[float, float]:
        e, a = self.argmax_coords
        return 180.0 * e - 90.0, 360.0 * a


def bin_weights(K: int) -> np.ndarray:
    w = np.ones(K // 2 + 1)
    w[0] = w[-1] = 0.5
    return w


def gcc_phat(frame: SpectralFrame, array: MicArray, eps: float = PHAT_EPS) -> GccPhatSpectrum:
    """PHAT-whitened cross-spectra X_m·conj(X_m') / max(|X_m·conj(X_m')|, eps) for every pair."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if frame.channel_count != array.n_mics:
        raise ValueError(f"frame has {frame.channel_count} channels, array has {array.n_mics} microphones")
    m, mp = array.pairs.T
    cross = frame.bins[m] * np.conj(frame.bins[mp])
    return GccPhatSpectrum(cross / np.maximum(np.abs(cross), eps), frame.K, eps, frame.frame_index)


def _check(gcc: GccPhatSpectrum, tdoa: TdoaTable) -> None:
    if gcc.n_pairs != tdoa.n_pairs:
        raise ValueError(f"spectrum has {gcc.n_pairs} pairs, TDOA table has {tdoa.n_pairs}")


def _frame(values: np.ndarray, tdoa_shape: tuple[int, int], index: int) -> SrpFrame:
    return SrpFrame(np.asarray(values, dtype=np.float64).reshape(tdoa_shape), index)


def fd_srp(gcc: GccPhatSpectrum, tdoa: TdoaTable) -> SrpFrame:
    """Reference SRP: explicit sum over all K/2+1 bins at the exact (fractional) TDOAs."""
    _check(gcc, tdoa)
    K = gcc.K
    k = np.arange(K // 2 + 1)
    gw = gcc.values * bin_weights(K)
    lags = tdoa.lags
    out = np.zeros(tdoa.Q)
    for p in range(gcc.n_pairs):
        theta = (2.0 * np.pi / K) * np.outer(lags[p], k)
        out += 2.0 * (np.cos(theta) @ gw[p].real - np.sin(theta) @ gw[p].imag)
    return _frame(out, tdoa.grid_shape, gcc.frame_index)


def time_domain_gcc(gcc: GccPhatSpectrum) -> np.ndarray:
    """Half-spectrum time-domain GCC, (P, K), scaled so that 2·gcc_td[n] equals the reference at lag n."""
    return 0.5 * gcc.K * np.fft.irfft(gcc.values, n=gcc.K, axis=-1)


def td_lags(tdoa: TdoaTable, K: int) -> np.ndarray:
    """Nearest-integer lag indices, negative lags wrapped modulo K."""
    return np.mod(np.rint(tdoa.lags).astype(np.intp), K)


def td_srp(gcc: GccPhatSpectrum, tdoa: TdoaTable, lags: np.ndarray | None = None) -> SrpFrame:
    _check(gcc, tdoa)
    if lags is None:
        lags = td_lags(tdoa, gcc.K)
    out = kernels.td_gather(np.ascontiguousarray(time_domain_gcc(gcc)), np.ascontiguousarray(lags, dtype=np.intp))
    return _frame(out, tdoa.grid_shape, gcc.frame_index)


@lru_cache(maxsize=16)
def fourier_tables(K: int, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    """Weighted 2·w_k·cos(2πkn/K) and 2·w_k·sin(2πkn/K), shaped (n_max+1, K/2+1)."""
    k = np.arange(K // 2 + 1)
    theta = 2.0 * np.pi * np.outer(np.arange(n_max + 1), k) / K
    w = 2.0 * bin_weights(K)
    cos_w, sin_w = w * np.cos(theta), w * np.sin(theta)
    cos_w.setflags(write=False)
    sin_w.setflags(write=False)
    return cos_w, sin_w


def _split(gcc: GccPhatSpectrum) -> tuple[np.ndarray, np.ndarray]:
    return np.ascontiguousarray(gcc.values.real), np.ascontiguousarray(gcc.values.imag)


@dataclass(frozen=True, eq=False)
class SincTable:
    """Two-sided interpolation table: one row per (pair, n), n in [-N_p, N_p]."""

    row_pair: np.ndarray
    row_n: np.ndarray
    values: np.ndarray  # (rows, Q): sinc(τ/T − n)
    grid_shape: tuple[int, int]
    n_max: int

    @property
    def coefficient_count(self) -> int:
        return self.values.size


def build_sinc_table(tdoa: TdoaTable, bounds: NSampBounds) -> SincTable:
    rows = [(p, n) for p, N in enumerate(bounds.per_pair) for n in range(-N, N + 1)]
    row_pair, row_n = (np.array(c, dtype=np.intp) for c in zip(*rows))
    values = np.sinc(tdoa.lags[row_pair] - row_n[:, None])
    return SincTable(row_pair, row_n, np.ascontiguousarray(values), tdoa.grid_shape, bounds.max)


def lc_srp(gcc: GccPhatSpectrum, tdoa: TdoaTable, bounds: NSampBounds, table: SincTable | None = None) -> SrpFrame:
    """Truncated Whittaker-Shannon interpolation of the lag-domain GCC at each candidate TDOA."""
    _check(gcc, tdoa)
    if table is None:
        table = build_sinc_table(tdoa, bounds)
    cos_w, sin_w = fourier_tables(gcc.K, table.n_max)
    re_g, im_g = _split(gcc)
    out = kernels.lc_accumulate(re_g, im_g, cos_w, sin_w, table.row_pair, table.row_n, table.values)
    return _frame(out, tdoa.grid_shape, gcc.frame_index)


def _sin_pi(x: np.ndarray) -> np.ndarray:
    # reduce the argument first so sin(πx) keeps full relative accuracy near integers
    m = np.rint(x)
    return np.sin(np.pi * (x - m)) * np.where(np.mod(m, 2) == 0, 1.0, -1.0)


def edge_common_factor(x: np.ndarray, n: int) -> np.ndarray:
    """(−1)^n · 2·sin(πx) / (π·(x − n)·(x + n)) for n >= 1, with the removable poles at x = ±n filled in."""
    if n < 1:
        raise ValueError("the common factor is defined for n >= 1; the n = 0 row stores sinc(x)")
    x = np.asarray(x, dtype=np.float64)
    sign = -1.0 if n % 2 else 1.0
    near = (np.abs(x - n) < SINGULAR_TOL) | (np.abs(x + n) < SINGULAR_TOL)
    denom = np.pi * (x - n) * (x + n)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = sign * 2.0 * _sin_pi(x) / denom
    if near.any():
        xs = x[near]
        c[near] = (np.sinc(xs - n) + np.sinc(xs + n)) / xs
    return c


@dataclass(frozen=True, eq=False)
class SincTableEdge:
    """One-sided paired interpolation table, one row per (pair, n) with n in [0, N_p].

    Rows with n >= 1 hold the common factor ``C = (−1)^n·2·sin(πx)/(π(x−n)(x+n))``
    (x = τ/T); the real-branch weight is ``x·C`` and the imaginary-branch weight
    ``−n·C``. Rows with n = 0 hold ``sinc(x)`` and have no imaginary branch.
    """

    row_pair: np.ndarray
    row_n: np.ndarray
    coef: np.ndarray  # (rows, Q)
    lags: np.ndarray  # (P, Q) τ/T, shared with the TDOA table
    grid_shape: tuple[int, int]
    n_max: int

    @property
    def Q(self) -> int:
        return self.coef.shape[1]

    @property
    def n_rows(self) -> int:
        return len(self.row_pair)

    @property
    def coefficient_count(self) -> int:
        return self.coef.size

    def real_branch(self) -> np.ndarray:
        x = self.lags[self.row_pair]
        return np.where((self.row_n == 0)[:, None], self.coef, x * self.coef)

    def imag_branch(self) -> np.ndarray:
        return -self.row_n[:, None] * self.coef


def build_sinc_table_edge(tdoa: TdoaTable, bounds: NSampBounds) -> SincTableEdge:
    if bounds.n_pairs != tdoa.n_pairs:
        raise ValueError("bounds and TDOA table disagree on the number of pairs")
    lags = np.ascontiguousarray(tdoa.lags)
    row_pair, row_n, coef = [], [], []
    for p, N in enumerate(bounds.per_pair):
        row_pair.append(p)
        row_n.append(0)
        coef.append(np.sinc(lags[p]))
        for n in range(1, N + 1):
            row_pair.append(p)
            row_n.append(n)
            coef.append(edge_common_factor(lags[p], n))
    return SincTableEdge(
        np.array(row_pair, dtype=np.intp),
        np.array(row_n, dtype=np.intp),
        np.ascontiguousarray(np.array(coef)),
        lags,
        tdoa.grid_shape,
        bounds.max,
    )


def lc_srp_edge(gcc: GccPhatSpectrum, table: SincTableEdge) -> SrpFrame:
    if gcc.n_pairs != table.lags.shape[0]:
        raise ValueError(f"spectrum has {gcc.n_pairs} pairs, table was built for {table.lags.shape[0]}")
    cos_w, sin_w = fourier_tables(gcc.K, table.n_max)
    re_g, im_g = _split(gcc)
    out = kernels.edge_accumulate(re_g, im_g, cos_w, sin_w, table.row_pair, table.row_n, table.coef, table.lags)
    return _frame(out, table.grid_shape, gcc.frame_index)


@dataclass
class SrpConfig:
    array: MicArray
    grid: CandidateGrid
    fs: int = 16000
    frame: FrameSpec = field(default_factory=FrameSpec)
    method: str = "lc-edge"
    eps: float = PHAT_EPS

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown SRP method {self.method!r}; choose from {METHODS}")

    @property
    def frames_per_second(self) -> float:
        return self.fs / self.frame.hop


class SrpProcessor:
    """Precomputes the TDOA/lag/sinc tables for one configuration and maps spectra to SRP frames."""

    def __init__(self, config: SrpConfig):
        self.config = config
        self.tdoa = tdoa_table(config.array, config.grid, config.fs)
        self.bounds = n_samp(config.array, config.fs)
        method = config.method
        self._lags = td_lags(self.tdoa, config.frame.window_len) if method == "td" else None
        self._table = build_sinc_table(self.tdoa, self.bounds) if method == "lc" else None
        self._edge = build_sinc_table_edge(self.tdoa, self.bounds) if method == "lc-edge" else None

    def gcc(self, frame: SpectralFrame) -> GccPhatSpectrum:
        return gcc_phat(frame, self.config.array, self.config.eps)

    def map(self, gcc: GccPhatSpectrum) -> SrpFrame:
        method = self.config.method
        if method == "fd":
            return fd_srp(gcc, self.tdoa)
        if method == "td":
            return td_srp(gcc, self.tdoa, self._lags)
        if method == "lc":
            return lc_srp(gcc, self.tdoa, self.bounds, self._table)
        return lc_srp_edge(gcc, self._edge)

    def __call__(self, frame: SpectralFrame) -> SrpFrame:
        return self.map(self.gcc(frame))


def srp_sequence(clip: AudioClip, method: str, config: SrpConfig) -> list[SrpFrame]:
    """One SRP frame per windowed analysis frame of ``clip``."""
    if clip.sample_rate_hz != config.fs:
        raise ValueError(f"clip is {clip.sample_rate_hz} Hz, config expects {config.fs} Hz")
    if clip.channel_count != config.array.n_mics:
        raise ValueError(f"clip has {clip.channel_count} channels, array has {config.array.n_mics}")
    if method != config.method:
        config = SrpConfig(config.array, config.grid, config.fs, config.frame, method, config.eps)
    proc = SrpProcessor(config)
    return [proc(f) for f in spectra(clip, config.frame)]
