"""Audio clips, framing/windowing and the real FFT contract shared by every SRP variant."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

STANDARD_SAMPLE_RATES = (8000, 12000, 16000)


class FormatError(ValueError):
    """Raised for audio input that cannot be represented as an AudioClip."""


def is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass
class AudioClip:
    """Multichannel audio, ``samples`` shaped (channels, length), amplitudes in [-1, 1]."""

    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        self.samples = np.atleast_2d(np.asarray(self.samples, dtype=np.float64))
        if self.samples.shape[0] < 2:
            raise FormatError(f"needs ≥2 channels, got {self.samples.shape[0]}")
        if self.sample_rate_hz < 4000:
            raise FormatError(f"sample rate {self.sample_rate_hz} Hz is below 4000 Hz")

    @property
    def channel_count(self) -> int:
        return self.samples.shape[0]

    def __len__(self) -> int:
        return self.samples.shape[1]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz


@dataclass(frozen=True)
class FrameSpec:
    window_len: int = 4096
    overlap_ratio: float = 0.25
    window_kind: str = "hann"

    def __post_init__(self):
        if not is_power_of_two(self.window_len):
            raise ValueError(f"window length {self.window_len} is not a power of two")
        if not 0.0 <= self.overlap_ratio < 1.0:
            raise ValueError(f"overlap ratio {self.overlap_ratio} outside [0, 1)")
        hop = self.window_len * (1.0 - self.overlap_ratio)
        if abs(hop - round(hop)) > 1e-9 or round(hop) < 1:
            raise ValueError(f"hop {hop} is not a positive integer")
        if self.window_kind not in ("hann", "rect"):
            raise ValueError(f"unknown window kind {self.window_kind!r}")

    @property
    def hop(self) -> int:
        return int(round(self.window_len * (1.0 - self.overlap_ratio)))

    def frame_count(self, n_samples: int) -> int:
        if n_samples < self.window_len:
            return 0
        return (n_samples - self.window_len) // self.hop + 1


@dataclass
class SpectralFrame:
    """One-sided spectrum of a windowed frame, ``bins`` shaped (channels, K/2+1)."""

    bins: np.ndarray
    K: int
    frame_index: int = 0

    @property
    def channel_count(self) -> int:
        return self.bins.shape[0]


def hann_window(K: int) -> np.ndarray:
    # symmetric form: w[0] = w[K-1] = 0
    n = np.arange(K)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / (K - 1))


def window(kind: str, K: int) -> np.ndarray:
    if kind == "hann":
        return hann_window(K)
    if kind == "rect":
        return np.ones(K)
    raise ValueError(f"unknown window kind {kind!r}")


def load_wav(path) -> AudioClip:
    """Read a PCM16 or float32 RIFF/WAVE file with at least two channels."""
    path = Path(path)
    try:
        fs, data = wavfile.read(path)
    except (ValueError, OSError) as exc:
        if not path.exists():
            raise
        raise FormatError(f"{path}: unreadable WAV ({exc})") from exc
    if data.ndim == 1:
        raise FormatError(f"{path}: needs ≥2 channels, got 1")
    if data.shape[1] == 0:
        raise FormatError(f"{path}: file has zero channels")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise FormatError(f"{path}: unsupported sample format {data.dtype}")
    return AudioClip(samples.T.copy(), int(fs))


def save_wav(path, clip: AudioClip, pcm16: bool = False) -> None:
    data = clip.samples.T
    if pcm16:
        data = np.clip(np.round(data * 32768.0), -32768, 32767).astype(np.int16)
    else:
        data = data.astype(np.float32)
    wavfile.write(Path(path), clip.sample_rate_hz, data)


def frame_and_window(clip: AudioClip, spec: FrameSpec) -> np.ndarray:
    """Cut ``clip`` into windowed frames shaped (frames, channels, K).

    Frame ``t`` covers samples ``[t*hop, t*hop + K)``; trailing samples that do not
    fill a whole frame are dropped.
    """
    K = spec.window_len
    count = spec.frame_count(len(clip))
    if count == 0:
        raise ValueError(f"clip of {len(clip)} samples is shorter than one frame (K={K})")
    view = np.lib.stride_tricks.sliding_window_view(clip.samples, K, axis=1)
    frames = view[:, : (count - 1) * spec.hop + 1 : spec.hop, :]
    return np.ascontiguousarray(frames.transpose(1, 0, 2)) * window(spec.window_kind, K)


def rfft(frame: np.ndarray, K: int, frame_index: int = 0) -> SpectralFrame:
    if not is_power_of_two(K):
        raise ValueError(f"transform length {K} is not a power of two")
    frame = np.atleast_2d(np.asarray(frame, dtype=np.float64))
    if frame.shape[-1] != K:
        raise ValueError(f"frame length {frame.shape[-1]} does not match K={K}")
    return SpectralFrame(np.fft.rfft(frame, n=K, axis=-1), K, frame_index)


def irfft(spectral: SpectralFrame, K: int | None = None) -> np.ndarray:
    K = spectral.K if K is None else K
    if not is_power_of_two(K):
        raise ValueError(f"transform length {K} is not a power of two")
    return np.fft.irfft(spectral.bins, n=K, axis=-1)


def spectra(clip: AudioClip, spec: FrameSpec) -> list[SpectralFrame]:
    frames = frame_and_window(clip, spec)
    bins = np.fft.rfft(frames, axis=-1)
    return [SpectralFrame(bins[t], spec.window_len, t) for t in range(len(frames))]
