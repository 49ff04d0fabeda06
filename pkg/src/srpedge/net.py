"""Causal 3D-CNN localization network (baseline and Edge variants): graph, weights, inference.

Tensors are laid out channel-first, ``(C, T, Res1, Res2)`` for the 3D part and ``(F, T)``
for the 1D head. Time is causal everywhere: convolutions pad on the left by
``(kt - 1) * dilation`` and never look ahead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import tensorio
from .feature import FeatureTensor

STEM_CHANNELS = 32
VARIANTS = {
    "baseline": (32, False),
    "EL": (32, True),
    "EM": (16, True),
    "ES": (8, True),
}

CONV3D = "Conv3dCausal"
PRELU = "PReLU"
MAXPOOL = "MaxPool3d"
FLATTEN = "FlattenConcat"
CONV1D = "Conv1dCausalDilated"
DSCONV1D = "DepthwiseSeparableConv1d"


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str
    in_channels: int
    out_channels: int
    kernel: tuple = ()
    dilation: int = 1
    pool: tuple = ()
    bias: bool = True
    branch: str = "trunk"  # trunk | A | B | head
    source: str = ""  # name of the tensor this layer reads
    spatial: tuple = ()  # (Res1, Res2) at this layer's input

    @property
    def history(self) -> int:
        """Frames of input a causal layer must retain: (kt - 1) * dilation + 1."""
        if self.kind not in (CONV3D, CONV1D, DSCONV1D):
            return 1
        return (self.kernel[0] - 1) * self.dilation + 1

    @property
    def is_conv(self) -> bool:
        return self.kind in (CONV3D, CONV1D, DSCONV1D)


@dataclass(frozen=True)
class GraphConfig:
    res1: int
    res2: int
    C: int
    depthwise: bool
    stem_channels: int = STEM_CHANNELS

    def as_fields(self) -> dict:
        return {
            "res1": self.res1,
            "res2": self.res2,
            "C": self.C,
            "depthwise": int(self.depthwise),
            "stem_channels": self.stem_channels,
        }


@dataclass
class NetworkGraph:
    config: GraphConfig
    layers: list = field(default_factory=list)

    @property
    def depth(self) -> int:
        """Convolution blocks per branch."""
        return sum(1 for l in self.layers if l.branch == "A" and l.kind == CONV3D)

    def by_branch(self, branch: str) -> list:
        return [l for l in self.layers if l.branch == branch]

    def layer(self, name: str) -> LayerSpec:
        for l in self.layers:
            if l.name == name:
                return l
        raise KeyError(name)

    @property
    def concat_channels(self) -> int:
        return self.layer("flatten").out_channels

    def __iter__(self) -> Iterator[LayerSpec]:
        return iter(self.layers)


def branch_depth(res1: int, res2: int) -> int:
    return min(4, int(math.log2(min(res1, res2))))


def _is_pow2(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


def build_graph(res1: int, res2: int, C: int, depthwise: bool, stem_channels: int = STEM_CHANNELS) -> NetworkGraph:
    """Trunk conv, two pooling branches (azimuth / elevation), flatten-concat, dilated causal head.

    The stem keeps ``stem_channels`` outputs independently of the branch width ``C``.
    """
    if not (_is_pow2(res1) and _is_pow2(res2)):
        raise ValueError(f"resolutions must be powers of two >= 2, got {res1}x{res2}")
    if C < 1 or stem_channels < 1:
        raise ValueError("channel counts must be positive")
    cfg = GraphConfig(int(res1), int(res2), int(C), bool(depthwise), int(stem_channels))
    N = branch_depth(res1, res2)
    S = stem_channels
    L = [
        LayerSpec("input_conv", CONV3D, 3, S, (5, 5, 5), source="input", spatial=(res1, res2)),
        LayerSpec("input_prelu", PRELU, S, S, source="input_conv", spatial=(res1, res2)),
    ]
    widths = {}
    for br, pool in (("A", (1, 1, 2)), ("B", (1, 2, 1))):
        e, a, cin, src = res1, res2, S, "input_prelu"
        for i in range(1, N + 1):
            tag = f"{br.lower()}{i}"
            L.append(LayerSpec(f"{tag}_conv", CONV3D, cin, C, (5, 3, 3), branch=br, source=src, spatial=(e, a)))
            L.append(LayerSpec(f"{tag}_prelu", PRELU, C, C, branch=br, source=f"{tag}_conv", spatial=(e, a)))
            L.append(LayerSpec(f"{tag}_pool", MAXPOOL, C, C, pool=pool, branch=br, source=f"{tag}_prelu", spatial=(e, a)))
            e //= pool[1]
            a //= pool[2]
            cin, src = C, f"{tag}_pool"
        widths[br] = (src, C * e * a)
    F = widths["A"][1] + widths["B"][1]
    L.append(LayerSpec("flatten", FLATTEN, F, F, branch="head", source=f"{widths['A'][0]}+{widths['B'][0]}"))
    kind = DSCONV1D if depthwise else CONV1D
    L.append(LayerSpec("out_conv1", kind, F, 4 * C, (5,), dilation=2, branch="head", source="flatten"))
    L.append(LayerSpec("out_prelu", PRELU, 4 * C, 4 * C, branch="head", source="out_conv1"))
    L.append(LayerSpec("out_conv2", CONV1D, 4 * C, 3, (5,), dilation=2, branch="head", source="out_prelu"))
    return NetworkGraph(cfg, L)


def variant_graph(variant: str, res1: int, res2: int) -> NetworkGraph:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; choose from {sorted(VARIANTS)}")
    C, dw = VARIANTS[variant]
    return build_graph(res1, res2, C, dw)


# ---------------------------------------------------------------------------
# shapes and counting


def tensor_shapes(graph: NetworkGraph) -> dict:
    """Expected weight tensor shapes, keyed ``<layer>.<param>``."""
    shapes = {}
    for l in graph:
        if l.kind == CONV3D:
            shapes[f"{l.name}.weight"] = (l.out_channels, l.in_channels) + tuple(l.kernel)
            shapes[f"{l.name}.bias"] = (l.out_channels,)
        elif l.kind == CONV1D:
            shapes[f"{l.name}.weight"] = (l.out_channels, l.in_channels, l.kernel[0])
            shapes[f"{l.name}.bias"] = (l.out_channels,)
        elif l.kind == DSCONV1D:
            shapes[f"{l.name}.dw_weight"] = (l.in_channels, l.kernel[0])
            shapes[f"{l.name}.dw_bias"] = (l.in_channels,)
            shapes[f"{l.name}.pw_weight"] = (l.out_channels, l.in_channels)
            shapes[f"{l.name}.pw_bias"] = (l.out_channels,)
        elif l.kind == PRELU:
            shapes[f"{l.name}.alpha"] = (l.out_channels,)
    return shapes


def count_params(graph: NetworkGraph) -> dict:
    """Per-layer weight counts plus ``"total"``."""
    per = {}
    for key, shape in tensor_shapes(graph).items():
        layer = key.split(".")[0]
        per[layer] = per.get(layer, 0) + int(np.prod(shape))
    per["total"] = sum(per.values())
    return per


def _output_elements(l: LayerSpec) -> int:
    """Output elements of one layer for a single time step."""
    if l.kind in (CONV3D, PRELU) and l.spatial:
        return l.out_channels * l.spatial[0] * l.spatial[1]
    if l.kind == MAXPOOL:
        return l.out_channels * (l.spatial[0] // l.pool[1]) * (l.spatial[1] // l.pool[2])
    return l.out_channels


def count_flops(graph: NetworkGraph, T: int = 1) -> dict:
    """Per-layer and total FLOPs for ``T`` frames.

    A multiply-accumulate is two operations; PReLU and max-pool cost one operation per
    output element; biases and the flatten are free.
    """
    per = {}
    for l in graph:
        out = _output_elements(l)
        if l.kind == CONV3D:
            f = 2 * out * l.in_channels * int(np.prod(l.kernel))
        elif l.kind == CONV1D:
            f = 2 * out * l.in_channels * l.kernel[0]
        elif l.kind == DSCONV1D:
            f = 2 * l.in_channels * l.kernel[0] + 2 * l.in_channels * l.out_channels
        elif l.kind in (PRELU, MAXPOOL):
            f = out
        else:
            f = 0
        per[l.name] = f * T
    per["total"] = sum(per.values())
    return per


def _input_feature_size(graph: NetworkGraph, l: LayerSpec) -> int:
    if l.kind == CONV3D:
        return l.in_channels * l.spatial[0] * l.spatial[1]
    return l.in_channels


def causal_buffers(graph: NetworkGraph) -> dict:
    """Elements kept on chip per source tensor: history x input feature size.

    Layers reading the same tensor (both branch entries read the stem output) share one buffer.
    """
    bufs = {}
    for l in graph:
        if l.is_conv:
            size = l.history * _input_feature_size(graph, l)
            bufs[l.source] = max(bufs.get(l.source, 0), size)
    return bufs


def weight_staging_elements(graph: NetworkGraph) -> int:
    """Largest single-layer weight set, staged on chip while that layer runs."""
    per = count_params(graph)
    return max(v for k, v in per.items() if k != "total")


# ---------------------------------------------------------------------------
# weights


@dataclass
class WeightBundle:
    config: GraphConfig
    tensors: dict

    def check(self, graph: NetworkGraph) -> None:
        expected = tensor_shapes(graph)
        missing = sorted(set(expected) - set(self.tensors))
        extra = sorted(set(self.tensors) - set(expected))
        if missing:
            raise ValueError(f"layer {missing[0].split('.')[0]}: missing tensor {missing[0]}")
        if extra:
            raise ValueError(f"layer {extra[0].split('.')[0]}: unexpected tensor {extra[0]}")
        for k, shape in expected.items():
            got = tuple(self.tensors[k].shape)
            if got != shape:
                raise ValueError(f"layer {k.split('.')[0]}: {k} has shape {got}, graph expects {shape}")

    @property
    def n_values(self) -> int:
        return sum(int(t.size) for t in self.tensors.values())


def init_weights(graph: NetworkGraph, seed: int = 0, scale: float = 0.1, prelu_slope: float = 0.25) -> WeightBundle:
    """Seeded uniform weights in [-scale, scale]; PReLU slopes set to ``prelu_slope``."""
    rng = np.random.default_rng(seed)
    tensors = {}
    for key, shape in tensor_shapes(graph).items():
        if key.endswith(".alpha"):
            tensors[key] = np.full(shape, prelu_slope, dtype=np.float32)
        else:
            tensors[key] = rng.uniform(-scale, scale, size=shape).astype(np.float32)
    return WeightBundle(graph.config, tensors)


def save_weights(path, bundle: WeightBundle) -> None:
    tensorio.write(path, bundle.tensors, bundle.config.as_fields())


def load_weights(path, graph: NetworkGraph | None = None) -> WeightBundle:
    tensors, fields = tensorio.read(path)
    try:
        cfg = GraphConfig(
            int(fields["res1"]), int(fields["res2"]), int(fields["C"]), bool(fields["depthwise"]),
            int(fields.get("stem_channels", STEM_CHANNELS)),
        )
    except KeyError as exc:
        raise ValueError(f"weight file header lacks {exc.args[0]!r}") from None
    bundle = WeightBundle(cfg, tensors)
    if graph is not None:
        bundle.check(graph)
    return bundle


# ---------------------------------------------------------------------------
# numerics


def prelu(x: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    a = np.asarray(alpha, dtype=np.float64).reshape((-1,) + (1,) * (x.ndim - 1))
    return np.where(x > 0, x, a * x)


def _conv3d_valid_time(xp: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Conv over (Cin, T + kt - 1, E, A) input already padded in time; zero same-padding in space."""
    cout, cin, kt, ke, ka = w.shape
    T = xp.shape[1] - kt + 1
    E, A = xp.shape[2], xp.shape[3]
    xs = np.pad(xp, ((0, 0), (0, 0), (ke // 2, ke // 2), (ka // 2, ka // 2)))
    out = np.zeros((cout, T, E, A))
    for i in range(kt):
        for j in range(ke):
            for k in range(ka):
                out += np.tensordot(w[:, :, i, j, k], xs[:, i : i + T, j : j + E, k : k + A], axes=(1, 0))
    return out + b[:, None, None, None]


def _conv1d_valid_time(xp: np.ndarray, w: np.ndarray, b: np.ndarray, d: int) -> np.ndarray:
    cout, cin, kt = w.shape
    T = xp.shape[1] - (kt - 1) * d
    out = np.zeros((cout, T))
    for i in range(kt):
        out += w[:, :, i] @ xp[:, i * d : i * d + T]
    return out + b[:, None]


def _dsconv1d_valid_time(xp: np.ndarray, dw: np.ndarray, db: np.ndarray, pw: np.ndarray, pb: np.ndarray, d: int) -> np.ndarray:
    kt = dw.shape[1]
    T = xp.shape[1] - (kt - 1) * d
    h = np.zeros((xp.shape[0], T))
    for i in range(kt):
        h += dw[:, i : i + 1] * xp[:, i * d : i * d + T]
    h += db[:, None]
    return pw @ h + pb[:, None]


def _maxpool(x: np.ndarray, pool: tuple) -> np.ndarray:
    _, pe, pa = pool
    C, T, E, A = x.shape
    return x[:, :, : E - E % pe, : A - A % pa].reshape(C, T, E // pe, pe, A // pa, pa).max(axis=(3, 5))


def _flatten(x: np.ndarray) -> np.ndarray:
    # (C, T, E, A) -> (C*E*A, T), channel-major
    C, T, E, A = x.shape
    return x.transpose(0, 2, 3, 1).reshape(C * E * A, T)


class _Runner:
    """Evaluates the graph on time-padded inputs; shared by batch and streaming paths."""

    def __init__(self, graph: NetworkGraph, weights: WeightBundle):
        weights.check(graph)
        self.graph = graph
        self.w = {k: np.asarray(v, dtype=np.float64) for k, v in weights.tensors.items()}

    def conv(self, l: LayerSpec, xp: np.ndarray) -> np.ndarray:
        w = self.w
        if l.kind == CONV3D:
            return _conv3d_valid_time(xp, w[f"{l.name}.weight"], w[f"{l.name}.bias"])
        if l.kind == CONV1D:
            return _conv1d_valid_time(xp, w[f"{l.name}.weight"], w[f"{l.name}.bias"], l.dilation)
        return _dsconv1d_valid_time(
            xp, w[f"{l.name}.dw_weight"], w[f"{l.name}.dw_bias"], w[f"{l.name}.pw_weight"], w[f"{l.name}.pw_bias"], l.dilation
        )

    def pointwise(self, l: LayerSpec, x: np.ndarray) -> np.ndarray:
        if l.kind == PRELU:
            return prelu(x, self.w[f"{l.name}.alpha"])
        if l.kind == MAXPOOL:
            return _maxpool(x, l.pool)
        raise ValueError(f"layer {l.name}: {l.kind} is not pointwise in time")


def _left_pad(x: np.ndarray, n: int) -> np.ndarray:
    pad = [(0, 0)] * x.ndim
    pad[1] = (n, 0)
    return np.pad(x, pad)


def _check_input(graph: NetworkGraph, x) -> np.ndarray:
    v = x.values if isinstance(x, FeatureTensor) else np.asarray(x, dtype=np.float64)
    cfg = graph.config
    if v.ndim != 4 or v.shape[0] != 3 or v.shape[2:] != (cfg.res1, cfg.res2):
        raise ValueError(f"layer input_conv: input shape {v.shape} does not match (3, T, {cfg.res1}, {cfg.res2})")
    return v


def infer_raw(graph: NetworkGraph, weights: WeightBundle, x) -> np.ndarray:
    """Whole-sequence forward pass; returns un-normalized (T, 3) outputs."""
    v = _check_input(graph, x)
    run = _Runner(graph, weights)
    acts = {"input": v}
    for l in graph:
        if l.kind == FLATTEN:
            a, b = l.source.split("+")
            acts[l.name] = np.concatenate([_flatten(acts[a]), _flatten(acts[b])], axis=0)
        elif l.is_conv:
            src = acts[l.source]
            acts[l.name] = run.conv(l, _left_pad(src, l.history - 1))
        else:
            acts[l.name] = run.pointwise(l, acts[l.source])
    return acts["out_conv2"].T.copy()


def normalize_rows(y: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(y, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(n > 0, y / n, 0.0)


def infer(graph: NetworkGraph, weights: WeightBundle, x, normalize: bool = True) -> np.ndarray:
    """DOA estimates as (T, 3) Cartesian vectors, unit-normalized unless ``normalize=False``."""
    y = infer_raw(graph, weights, x)
    return normalize_rows(y) if normalize else y


class StreamingInference:
    """Frame-at-a-time inference with one causal history buffer per source tensor.

    Each buffer holds ``(kt - 1) * dilation + 1`` frames of the tensor it mirrors, so the
    per-frame output equals the matching row of :func:`infer_raw`.
    """

    def __init__(self, graph: NetworkGraph, weights: WeightBundle):
        self.graph = graph
        self._run = _Runner(graph, weights)
        self._hist = {}
        for l in graph:
            if l.is_conv:
                self._hist[l.source] = max(self._hist.get(l.source, 1), l.history)
        self.reset()

    def reset(self) -> None:
        self._buf = {}
        self.frames_seen = 0

    def buffer_elements(self) -> int:
        return sum(int(b.size) for b in self._buf.values())

    def _push(self, name: str, frame: np.ndarray) -> np.ndarray:
        """Append ``frame`` (C, 1, ...) to the named buffer and return the full window."""
        n = self._hist[name]
        buf = self._buf.get(name)
        if buf is None:
            shape = list(frame.shape)
            shape[1] = n
            buf = np.zeros(shape)
        buf = np.concatenate([buf[:, 1:], frame], axis=1)
        self._buf[name] = buf
        return buf

    def step(self, frame: np.ndarray) -> np.ndarray:
        """Consume one (3, Res1, Res2) feature frame; return the raw (3,) output."""
        cfg = self.graph.config
        frame = np.asarray(frame, dtype=np.float64)
        if frame.shape != (3, cfg.res1, cfg.res2):
            raise ValueError(f"layer input_conv: frame shape {frame.shape} does not match (3, {cfg.res1}, {cfg.res2})")
        acts = {"input": frame[:, None]}
        windows = {}
        for l in self.graph:
            if l.kind == FLATTEN:
                a, b = l.source.split("+")
                acts[l.name] = np.concatenate([_flatten(acts[a]), _flatten(acts[b])], axis=0)
            elif l.is_conv:
                # both branch entries read the stem output: push it once per frame
                if l.source not in windows:
                    windows[l.source] = self._push(l.source, acts[l.source])
                acts[l.name] = self._run.conv(l, windows[l.source])
            else:
                acts[l.name] = self._run.pointwise(l, acts[l.source])
        self.frames_seen += 1
        return acts["out_conv2"][:, 0].copy()

    def run(self, x) -> np.ndarray:
        v = _check_input(self.graph, x)
        return np.stack([self.step(v[:, t]) for t in range(v.shape[1])])
