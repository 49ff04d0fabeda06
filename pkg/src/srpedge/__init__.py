"""SRP-PHAT feature extraction (FD / TD / LC / LC-Edge), causal 3D-CNN inference,
shoebox scene synthesis and an analytic hardware-cost model for edge sound-source localization."""
from .geometry import MicArray, CandidateGrid, build_grid, default_array, load_array, n_samp, tdoa_table
from .kernels import BACKEND
from .signal import AudioClip, FrameSpec, SpectralFrame, load_wav, save_wav

__version__ = "0.1.0"

__all__ = [
    "AudioClip",
    "BACKEND",
    "CandidateGrid",
    "FrameSpec",
    "MicArray",
    "SpectralFrame",
    "build_grid",
    "default_array",
    "load_array",
    "load_wav",
    "n_samp",
    "save_wav",
    "tdoa_table",
]
