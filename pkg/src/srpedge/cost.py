"""Analytic hardware-overhead model: FLOPs, on-chip bytes, bandwidth and roofline records.

Nothing here runs a kernel. Every quantity is a closed form in the array size, FFT
length, candidate count and per-pair interpolation bounds, sized at 4 bytes per value.

SRP on-chip model (values, not bytes)::

    common  N*K input window + K analysis window + K FFT twiddles
    td      + P*Q integer-lag table
    lc      + 2*P*Q TDOA/partial-sum working set + (2*maxN + 1)*P*Q sinc table
    lc-edge + 2*P*Q TDOA/partial-sum working set + (maxN + 1)*P*Q paired table

The dense tables are padded to the largest per-pair bound ``maxN`` so every pair uses the
same row stride. DNN on-chip bytes are the causal history buffers plus one staging area
sized to the largest single layer's weights.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .geometry import MicArray, NSampBounds, build_grid, n_samp
from .net import NetworkGraph, causal_buffers, count_flops, count_params, variant_graph, weight_staging_elements

BYTES_PER_VALUE = 4
SRP_METHODS = ("fd", "td", "lc", "lc-edge")


def frames_per_second(fs: float, K: int, overlap: float) -> float:
    return fs / (K * (1.0 - overlap))


@dataclass
class CostReport:
    label: str = ""
    srp_flops_per_frame: float = 0.0
    dnn_flops_per_frame: float = 0.0
    frames_per_second: float = 0.0
    weight_bytes: float = 0.0  # DNN weights, refetched every frame
    coeff_bytes: float = 0.0  # SRP tables held on chip
    srp_onchip_bytes: float = 0.0
    dnn_onchip_bytes: float = 0.0
    srp_bandwidth: float = 0.0  # bytes/s
    dnn_bandwidth: float = 0.0  # bytes/s

    @property
    def flops_per_frame(self) -> float:
        return self.srp_flops_per_frame + self.dnn_flops_per_frame

    @property
    def flops_per_second(self) -> float:
        return self.flops_per_frame * self.frames_per_second

    @property
    def onchip_bytes(self) -> float:
        return self.srp_onchip_bytes + self.dnn_onchip_bytes

    @property
    def bandwidth_bytes_per_second(self) -> float:
        return self.srp_bandwidth + self.dnn_bandwidth

    @property
    def operational_intensity(self) -> float:
        bw = self.bandwidth_bytes_per_second
        return self.flops_per_second / bw if bw > 0 else math.inf

    def as_record(self) -> dict:
        rec = asdict(self)
        rec.update(
            flops_per_frame=self.flops_per_frame,
            flops_per_second=self.flops_per_second,
            onchip_bytes=self.onchip_bytes,
            bandwidth_bytes_per_second=self.bandwidth_bytes_per_second,
            operational_intensity=self.operational_intensity,
        )
        return rec


def combine(*reports: CostReport, label: str | None = None) -> CostReport:
    """Sum additive fields; the frame rate must agree."""
    rates = {r.frames_per_second for r in reports if r.frames_per_second}
    if len(rates) > 1:
        raise ValueError(f"cannot combine reports at different frame rates {sorted(rates)}")
    out = CostReport(label=label if label is not None else "+".join(r.label for r in reports if r.label))
    out.frames_per_second = rates.pop() if rates else 0.0
    for f in fields(CostReport):
        if f.name in ("label", "frames_per_second"):
            continue
        setattr(out, f.name, sum(getattr(r, f.name) for r in reports))
    return out


# ---------------------------------------------------------------------------
# SRP


def srp_flops(method: str, n_mics: int, K: int, Q: int, n_samp_total: int) -> float:
    """Per-frame SRP operation count.

    ``n_samp_total`` is the two-sided interpolation index count Σ(2·N_p + 1).
    """
    if method not in SRP_METHODS:
        raise ValueError(f"unknown SRP method {method!r}")
    N, P = n_mics, n_mics * (n_mics - 1) // 2
    B = K // 2 + 1
    lg = math.log2(K)
    common = 2 * N * K * lg + 4 * P * B + 10 * N * B
    if method == "td":
        return common + 2 * P * K * lg + P * Q
    if method == "lc":
        return common + n_samp_total * (2 * K + 4) + n_samp_total * 2 * Q
    if method == "lc-edge":
        return common + (n_samp_total - P / 2) * (K + 2 + 2 * Q)
    # direct steering of all bins for every candidate
    return common + P * Q * B * 8


def srp_onchip_values(method: str, n_mics: int, K: int, Q: int, max_n: int) -> dict:
    """Itemized on-chip values for the SRP stage (see the module docstring)."""
    P = n_mics * (n_mics - 1) // 2
    items = {"input": n_mics * K, "window": K, "twiddles": K}
    if method == "td":
        items["lag_table"] = P * Q
    elif method == "lc":
        items["working_set"] = 2 * P * Q
        items["sinc_table"] = (2 * max_n + 1) * P * Q
    elif method == "lc-edge":
        items["working_set"] = 2 * P * Q
        items["sinc_table"] = (max_n + 1) * P * Q
    elif method == "fd":
        items["steering_table"] = 2 * P * Q * (K // 2 + 1)
    else:
        raise ValueError(f"unknown SRP method {method!r}")
    return items


def srp_cost(method: str, n_mics: int, K: int, Q: int, bounds: NSampBounds, fs: float, overlap: float,
             label: str | None = None) -> CostReport:
    fps = frames_per_second(fs, K, overlap)
    items = srp_onchip_values(method, n_mics, K, Q, bounds.max)
    coeff = sum(v for k, v in items.items() if k in ("lag_table", "sinc_table", "steering_table"))
    hop = K * (1.0 - overlap)
    return CostReport(
        label=label or method,
        srp_flops_per_frame=srp_flops(method, n_mics, K, Q, bounds.total),
        frames_per_second=fps,
        coeff_bytes=coeff * BYTES_PER_VALUE,
        srp_onchip_bytes=sum(items.values()) * BYTES_PER_VALUE,
        # fresh multichannel samples fetched for every window
        srp_bandwidth=n_mics * hop * BYTES_PER_VALUE * fps,
    )


def sinc_amount(n_mics: int, distance: float, fs: float, Q: int, c: float = 343.0, floor: bool = False) -> float:
    """Sinc-coefficient bytes for ``n_mics`` with a common pair distance: N_samp·P·Q·4.

    With ``floor=False`` the bound is the unrounded ``distance·fs/c``.
    """
    ns = distance * fs / c
    if floor:
        ns = math.floor(ns)
    P = n_mics * (n_mics - 1) // 2
    return ns * P * Q * BYTES_PER_VALUE


# ---------------------------------------------------------------------------
# DNN


def dnn_onchip_values(graph: NetworkGraph) -> dict:
    return {"causal_buffers": sum(causal_buffers(graph).values()), "weight_staging": weight_staging_elements(graph)}


def dnn_cost(graph: NetworkGraph, fps: float, label: str | None = None) -> CostReport:
    weights = count_params(graph)["total"] * BYTES_PER_VALUE
    cfg = graph.config
    return CostReport(
        label=label or f"C{cfg.C}{'-dw' if cfg.depthwise else ''}-{cfg.res1}x{cfg.res2}",
        dnn_flops_per_frame=count_flops(graph)["total"],
        frames_per_second=fps,
        weight_bytes=weights,
        dnn_onchip_bytes=sum(dnn_onchip_values(graph).values()) * BYTES_PER_VALUE,
        dnn_bandwidth=weights * fps,
    )


def system_cost(variant: str, res1: int, res2: int, method: str, array: MicArray, fs: float = 16000,
                K: int = 4096, overlap: float = 0.25) -> CostReport:
    """SRP front end plus network for one configuration."""
    bounds = n_samp(array, fs)
    grid = build_grid(res1, res2)
    s = srp_cost(method, array.n_mics, K, grid.Q, bounds, fs, overlap)
    d = dnn_cost(variant_graph(variant, res1, res2), s.frames_per_second)
    return combine(s, d, label=f"{variant}+{method}@{res1}x{res2},fs={int(fs)}")


# ---------------------------------------------------------------------------
# roofline output

ROOFLINE_FIELDS = (
    "label",
    "flops_per_frame",
    "frames_per_second",
    "flops_per_second",
    "bandwidth_bytes_per_second",
    "operational_intensity",
    "onchip_bytes",
    "srp_flops_per_frame",
    "dnn_flops_per_frame",
    "weight_bytes",
    "coeff_bytes",
    "srp_onchip_bytes",
    "dnn_onchip_bytes",
)


def roofline_records(reports) -> list:
    return [{k: r.as_record()[k] for k in ROOFLINE_FIELDS} for r in reports]


def roofline_emit(reports, fmt: str = "csv") -> str:
    """Serialize one record per report, in input order."""
    records = roofline_records(reports)
    if fmt == "json":
        return json.dumps(records, indent=2, default=_jsonable) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=ROOFLINE_FIELDS, lineterminator="\n")
    w.writeheader()
    for rec in records:
        w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in rec.items()})
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    raise TypeError(type(v))
