"""Synthetic test scenes: far-field plane-wave delays, shoebox image-source RIRs, SNR-controlled noise.

Moving sources are modelled as piecewise-static segments: each segment is rendered with
its own RIR set and neighbouring segments are crossfaded over 10 ms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import fftconvolve

from .geometry import MicArray, to_angles
from .signal import AudioClip, FrameSpec

FRACTIONAL_TAPS = 81
CROSSFADE_S = 0.010
MIN_SOURCE_DISTANCE = 1.0
ROOM_MARGIN = 0.1


def sabine_beta(room, t60: float) -> float:
    """Uniform wall reflection coefficient for a target T60, via Sabine's formula.

    ``alpha = 0.161 V / (S T60)`` and ``beta = sqrt(1 - alpha)``.
    """
    Lx, Ly, Lz = map(float, room)
    if t60 <= 0:
        return 0.0
    V = Lx * Ly * Lz
    S = 2.0 * (Lx * Ly + Lx * Lz + Ly * Lz)
    alpha = 0.161 * V / (S * t60)
    if alpha > 1.0:
        raise ValueError(f"T60 of {t60} s is too short for a {Lx}x{Ly}x{Lz} m room (alpha={alpha:.2f} > 1)")
    return math.sqrt(1.0 - alpha)


@dataclass
class Scene:
    """A shoebox room, one piecewise-static source and an array placed at ``array_center``.

    ``segments`` is a list of ``(start_time_s, (x, y, z))``; the first segment must start at 0.
    Set ``beta`` directly or let it follow from ``t60`` (``t60 = 0`` means anechoic walls).
    """

    room: tuple
    segments: list
    array: MicArray
    array_center: tuple
    t60: float = 0.0
    beta: float | None = None
    snr_db: float = math.inf
    seed: int = 0
    fs: int = 16000
    max_order: int | None = None

    def __post_init__(self):
        self.room = tuple(float(v) for v in self.room)
        self.array_center = np.asarray(self.array_center, dtype=np.float64)
        self.segments = sorted((float(t), np.asarray(p, dtype=np.float64)) for t, p in self.segments)
        if not self.segments or self.segments[0][0] != 0.0:
            raise ValueError("the first source segment must start at t = 0")
        dims = np.array(self.room)
        if np.any(dims <= 0):
            raise ValueError("room dimensions must be positive")
        lo, hi = ROOM_MARGIN * dims, (1 - ROOM_MARGIN) * dims
        for pos in [p for _, p in self.segments] + list(self.mic_positions):
            if np.any(pos < lo - 1e-12) or np.any(pos > hi + 1e-12):
                raise ValueError(f"position {pos.round(3).tolist()} is within the 10% wall margin of the room")
        for _, p in self.segments:
            d = np.linalg.norm(p - self.array_center)
            if d < MIN_SOURCE_DISTANCE:
                raise ValueError(f"source is {d:.2f} m from the array; far field needs >= {MIN_SOURCE_DISTANCE} m")
        if self.beta is None:
            self.beta = sabine_beta(self.room, self.t60)
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")

    @property
    def mic_positions(self) -> np.ndarray:
        return self.array.positions + self.array_center

    @property
    def order(self) -> int:
        if self.max_order is not None:
            return self.max_order
        return 0 if self.beta == 0 else self._auto_order()

    def _auto_order(self) -> int:
        # reach roughly the -60 dB point of the decay
        reach = self.rir_length() / self.fs * self.array.speed_of_sound
        return int(math.ceil(reach / min(self.room)))

    def rir_length(self) -> int:
        if self.beta == 0:
            far = max(np.linalg.norm(p - self.array_center) for _, p in self.segments) + 1.0
            return int(math.ceil(far / self.array.speed_of_sound * self.fs)) + FRACTIONAL_TAPS
        t60 = self.t60 if self.t60 > 0 else _eyring_t60(self.room, self.beta)
        return int(math.ceil(1.1 * t60 * self.fs))

    def source_at(self, t: float) -> np.ndarray:
        pos = self.segments[0][1]
        for start, p in self.segments:
            if t >= start:
                pos = p
        return pos

    def doa_at(self, t: float) -> np.ndarray:
        v = self.source_at(t) - self.array_center
        return v / np.linalg.norm(v)


def _eyring_t60(room, beta: float) -> float:
    Lx, Ly, Lz = room
    V = Lx * Ly * Lz
    S = 2.0 * (Lx * Ly + Lx * Lz + Ly * Lz)
    alpha = 1.0 - beta * beta
    return 0.161 * V / (-S * math.log(max(1.0 - alpha, 1e-12))) if alpha > 0 else math.inf


@dataclass
class Rir:
    taps: np.ndarray  # (n_mics, length)
    fs: int
    length: int = field(init=False)

    def __post_init__(self):
        self.taps = np.atleast_2d(self.taps)
        self.length = self.taps.shape[1]


def _fractional_taps(delays: np.ndarray, gains: np.ndarray, length: int) -> np.ndarray:
    """Sum of Hann-windowed sinc pulses, one per (delay in samples, gain)."""
    half = FRACTIONAL_TAPS // 2
    base = np.floor(delays).astype(np.int64)
    offsets = np.arange(-half, half + 1)
    idx = base[:, None] + offsets
    x = idx - delays[:, None]
    win = 0.5 * (1.0 + np.cos(np.pi * x / (half + 1)))
    vals = gains[:, None] * np.sinc(x) * win
    keep = (idx >= 0) & (idx < length)
    return np.bincount(idx[keep], weights=vals[keep], minlength=length)[:length]


def image_sources(room, source, max_order: int, beta: float):
    """All shoebox image positions with at most ``max_order`` wall reflections and their gains β^order."""
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    n = np.arange(-(max_order // 2) - 1, max_order // 2 + 2)
    axes = []
    for L, s in zip(room, source):
        pos = np.concatenate([2 * n * L + s, 2 * n * L - s])
        refl = np.concatenate([np.abs(2 * n), np.abs(2 * n - 1)])
        ok = refl <= max_order
        axes.append((pos[ok], refl[ok]))
    (px, rx), (py, ry), (pz, rz) = axes
    order = rx[:, None, None] + ry[None, :, None] + rz[None, None, :]
    mask = order <= max_order
    X, Y, Z = np.meshgrid(px, py, pz, indexing="ij")
    images = np.stack([X[mask], Y[mask], Z[mask]], axis=1)
    return images, float(beta) ** order[mask]


def ism_rir_point(room, source, mic, beta: float, fs: int, max_order: int, length: int, c: float = 343.0) -> np.ndarray:
    """Single-microphone image-source impulse response of ``length`` taps."""
    images, gains = image_sources(room, np.asarray(source, dtype=np.float64), max_order, beta)
    d = np.linalg.norm(images - np.asarray(mic, dtype=np.float64), axis=1)
    delays = d / c * fs
    keep = (delays < length + FRACTIONAL_TAPS // 2) & (gains > 0)
    return _fractional_taps(delays[keep], gains[keep] / (4.0 * np.pi * d[keep]), length)


def ism_rir(scene: Scene, mic, max_order: int | None = None, length: int | None = None, source=None) -> Rir:
    order = scene.order if max_order is None else max_order
    if order < 0:
        raise ValueError("max_order must be >= 0")
    length = scene.rir_length() if length is None else length
    src = scene.segments[0][1] if source is None else source
    h = ism_rir_point(scene.room, src, mic, scene.beta, scene.fs, order, length, scene.array.speed_of_sound)
    return Rir(h, scene.fs)


def schroeder_t60(h: np.ndarray, fs: int, fit_db: tuple = (-5.0, -25.0)) -> float:
    """Reverberation time from a line fit to the Schroeder backward-integrated decay curve."""
    e = np.cumsum(np.asarray(h, dtype=np.float64)[::-1] ** 2)[::-1]
    edc = 10.0 * np.log10(e / e[0] + 1e-300)
    hi, lo = fit_db
    sel = (edc <= hi) & (edc >= lo)
    if sel.sum() < 2:
        raise ValueError("decay curve does not span the fit range")
    t = np.nonzero(sel)[0] / fs
    slope, _ = np.polyfit(t, edc[sel], 1)
    return -60.0 / slope


def anechoic_far_field(direction, dry, array: MicArray, fs: int) -> AudioClip:
    """Plane wave from ``direction``: channel m is ``dry`` delayed by -u.p_m / c (fractional, via FFT)."""
    u = np.asarray(direction, dtype=np.float64)
    if abs(np.linalg.norm(u) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    dry = np.asarray(dry, dtype=np.float64).ravel()
    tau = -(array.positions @ u) / array.speed_of_sound * fs  # samples
    margin = int(np.ceil(np.abs(tau).max())) + 64
    L = len(dry)
    n = 1 << int(np.ceil(np.log2(L + 2 * margin)))
    buf = np.zeros(n)
    buf[margin : margin + L] = dry
    spec = np.fft.rfft(buf)
    f = np.fft.rfftfreq(n)
    shifted = np.fft.irfft(spec[None, :] * np.exp(-2j * np.pi * f[None, :] * tau[:, None]), n=n, axis=1)
    return AudioClip(shifted[:, margin : margin + L], fs)


def mix_at_snr(signal: AudioClip, snr_db: float, seed: int = 0) -> AudioClip:
    """Add white Gaussian noise scaled so the realized clip-level SNR is exactly ``snr_db``."""
    if math.isinf(snr_db) and snr_db > 0:
        return AudioClip(signal.samples.copy(), signal.sample_rate_hz)
    p_sig = float(np.mean(signal.samples**2))
    if p_sig <= 0:
        raise ValueError("cannot set an SNR on a zero-power signal")
    noise = np.random.default_rng(seed).standard_normal(signal.samples.shape)
    noise *= math.sqrt(p_sig / 10.0 ** (snr_db / 10.0) / np.mean(noise**2))
    return AudioClip(signal.samples + noise, signal.sample_rate_hz)


def measured_snr_db(clean: AudioClip, noisy: AudioClip) -> float:
    noise = noisy.samples - clean.samples
    return 10.0 * math.log10(np.mean(clean.samples**2) / np.mean(noise**2))


def _segment_gains(starts: Sequence[float], n: int, fs: int) -> np.ndarray:
    """Per-segment gain envelopes summing to one, with linear 10 ms crossfades at boundaries."""
    t = np.arange(n) / fs
    half = CROSSFADE_S / 2
    edges = list(starts[1:])
    # fraction of "next segment" at each boundary
    ramps = [np.clip((t - (b - half)) / CROSSFADE_S, 0.0, 1.0) for b in edges]
    gains = np.empty((len(starts), n))
    prev = np.ones(n)
    for i, r in enumerate(ramps):
        gains[i] = prev * (1.0 - r)
        prev = prev * r
    gains[-1] = prev
    return gains


def render(scene: Scene, dry) -> AudioClip:
    """Convolve ``dry`` with the scene's per-segment RIRs, crossfade segments, then add noise."""
    dry = np.asarray(dry, dtype=np.float64).ravel()
    n = len(dry)
    mics = scene.mic_positions
    length = scene.rir_length()
    gains = _segment_gains([s for s, _ in scene.segments], n, scene.fs)
    out = np.zeros((len(mics), n))
    for g, (_, src) in zip(gains, scene.segments):
        if not g.any():
            continue
        for m, mic in enumerate(mics):
            h = ism_rir_point(scene.room, src, mic, scene.beta, scene.fs, scene.order, length, scene.array.speed_of_sound)
            out[m] += g * fftconvolve(dry, h)[:n]
    clip = AudioClip(out, scene.fs)
    return mix_at_snr(clip, scene.snr_db, scene.seed) if not math.isinf(scene.snr_db) else clip


def frame_truth(scene: Scene, n_frames: int, spec: FrameSpec) -> np.ndarray:
    """Ground-truth (frame_index, elevation_deg, azimuth_deg) rows, sampled at each frame center."""
    rows = []
    for t in range(n_frames):
        center = (t * spec.hop + spec.window_len / 2) / scene.fs
        el, az = to_angles(scene.doa_at(center))
        rows.append((t, math.degrees(el), math.degrees(az)))
    return np.array(rows, dtype=np.float64).reshape(-1, 3)


def white_noise(n: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal(n)
