"""The single TOML run configuration that drives every CLI stage."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

from .geometry import MicArray, default_array, load_array, tomllib
from .net import VARIANTS
from .signal import is_power_of_two
from .srp import METHODS

CONFIG_VERSION = 1


class ConfigError(ValueError):
    pass


@dataclass
class SceneConfig:
    room: tuple = (6.0, 5.0, 3.0)
    center: tuple | None = None  # array center; defaults to the room center
    sources: list = field(default_factory=lambda: [(0.0, 4.6, 3.9, 1.9)])  # (start_s, x, y, z)
    t60: float = 0.0
    snr_db: float = math.inf
    duration_s: float = 3.0
    dry: str = ""  # mono WAV; empty means seeded white noise
    max_order: int | None = None

    @property
    def array_center(self) -> tuple:
        return tuple(self.center) if self.center is not None else tuple(v / 2 for v in self.room)


@dataclass
class RunConfig:
    array: str = "default"
    grid: tuple = (8, 16)
    fs: int = 16000
    K: int = 4096
    overlap: float = 0.25
    window: str = "hann"
    method: str = "lc-edge"
    variant: str = "EM"
    weights: str = ""
    seed: int = 0
    out_dir: str = "run_out"
    cost_variants: list = field(default_factory=list)
    cost_methods: list = field(default_factory=list)
    scene: SceneConfig = field(default_factory=SceneConfig)
    base_dir: Path = field(default=Path("."), repr=False)

    def __post_init__(self):
        self.grid = tuple(int(v) for v in self.grid)
        if len(self.grid) != 2 or min(self.grid) < 2:
            raise ConfigError(f"grid must be two resolutions >= 2, got {self.grid}")
        if not is_power_of_two(self.K):
            raise ConfigError(f"K={self.K} is not a power of two")
        if not 0.0 <= self.overlap < 1.0:
            raise ConfigError(f"overlap {self.overlap} outside [0, 1)")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {sorted(VARIANTS)}, got {self.variant!r}")
        for v in self.cost_variants:
            if v not in VARIANTS:
                raise ConfigError(f"unknown cost variant {v!r}")
        for m in self.cost_methods:
            if m not in METHODS:
                raise ConfigError(f"unknown cost method {m!r}")

    @property
    def C(self) -> int:
        return VARIANTS[self.variant][0]

    @property
    def depthwise(self) -> bool:
        return VARIANTS[self.variant][1]

    def resolve(self, p: str) -> Path:
        path = Path(p)
        return path if path.is_absolute() else self.base_dir / path

    def load_array(self) -> MicArray:
        if self.array in ("", "default"):
            return default_array()
        return load_array(self.resolve(self.array))

    @property
    def output_dir(self) -> Path:
        return self.resolve(self.out_dir)


def _scene(doc: dict) -> SceneConfig:
    known = {f for f in SceneConfig.__dataclass_fields__}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown [scene] keys: {sorted(unknown)}")
    sc = SceneConfig(**doc)
    sc.room = tuple(float(v) for v in sc.room)
    sc.sources = [tuple(float(v) for v in s) for s in sc.sources]
    if any(len(s) != 4 for s in sc.sources):
        raise ConfigError("each scene source is [start_s, x, y, z]")
    return sc


def parse_config(doc: dict, base_dir: Path = Path(".")) -> RunConfig:
    doc = dict(doc)
    version = doc.pop("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"config version {version} is not supported (expected {CONFIG_VERSION})")
    scene = _scene(doc.pop("scene", {}))
    known = {f for f in RunConfig.__dataclass_fields__} - {"scene", "base_dir"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return RunConfig(**doc, scene=scene, base_dir=base_dir)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(doc, path.parent)


EXAMPLE_CONFIG = """\
version = 1
array = "default"        # or a TOML file with positions = [[x, y, z], ...]
grid = [8, 16]           # Res1 (elevation) x Res2 (azimuth)
fs = 16000
K = 4096
overlap = 0.25
method = "lc-edge"       # fd | td | lc | lc-edge
variant = "EM"           # baseline | EL | EM | ES
weights = ""             # empty: seeded random weights (with a warning)
seed = 0
out_dir = "run_out"

[scene]
room = [6.0, 5.0, 3.0]
sources = [[0.0, 4.6, 3.9, 1.9]]   # [start_s, x, y, z] per static segment
t60 = 0.0                           # 0 gives anechoic walls
snr_db = 30.0
duration_s = 3.0
"""
