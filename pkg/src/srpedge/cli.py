"""``srpedge`` command line: synth, srp, infer, eval, cost, bench and run.

Exit codes: 0 success, 1 internal error, 2 usage or input error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from . import cost, kernels, metrics, net, simroom, srp, tensorio
from .config import EXAMPLE_CONFIG, ConfigError, RunConfig, SceneConfig, load_config
from .feature import assemble
from .geometry import build_grid, default_array, load_array, to_angles
from .signal import FormatError, FrameSpec, load_wav, save_wav, spectra

log = logging.getLogger("srpedge")


class UsageError(Exception):
    """Bad user input; reported with exit code 2."""


def _floats(text: str, n: int | None = None) -> tuple:
    try:
        vals = tuple(float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise UsageError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def _grid(text: str) -> tuple:
    try:
        r1, r2 = (int(v) for v in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"grid must look like 8x16, got {text!r}") from None
    return r1, r2


def _array(path: str | None):
    return default_array() if path in (None, "", "default") else load_array(path)


# ---------------------------------------------------------------------------
# stage functions (shared by the subcommands and ``run``)


def do_synth(scene_cfg: SceneConfig, array, fs: int, seed: int, frame: FrameSpec, base_dir: Path = Path(".")):
    segs = [(s[0], s[1:]) for s in scene_cfg.sources]
    scene = simroom.Scene(
        scene_cfg.room, segs, array, scene_cfg.array_center, t60=scene_cfg.t60, snr_db=scene_cfg.snr_db,
        seed=seed, fs=fs, max_order=scene_cfg.max_order,
    )
    if scene_cfg.dry:
        dry_path = Path(scene_cfg.dry)
        dry_path = dry_path if dry_path.is_absolute() else base_dir / dry_path
        from scipy.io import wavfile

        rate, data = wavfile.read(dry_path)
        if rate != fs:
            raise UsageError(f"dry signal is {rate} Hz, scene runs at {fs} Hz (resampling is not supported)")
        dry = data.astype(np.float64)
        if dry.ndim > 1:
            dry = dry[:, 0]
        if data.dtype == np.int16:
            dry /= 32768.0
    else:
        dry = simroom.white_noise(int(round(scene_cfg.duration_s * fs)), seed) * 0.1
    clip = simroom.render(scene, dry)
    n_frames = frame.frame_count(len(clip))
    truth = simroom.frame_truth(scene, n_frames, frame)
    return clip, truth


def write_truth(path, truth: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame_index", "elevation_deg", "azimuth_deg"])
        for t, el, az in truth:
            w.writerow([int(t), f"{el:.6f}", f"{az:.6f}"])


def do_srp(clip, array, grid, fs, frame: FrameSpec, method: str):
    cfg = srp.SrpConfig(array, grid, fs, frame, method)
    return srp.srp_sequence(clip, method, cfg)


def write_srp(path, frames, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "bin")
    power = np.stack([f.power for f in frames])
    argmax = np.array([f.argmax for f in frames], dtype=np.int64).reshape(-1, 2)
    if fmt == "bin":
        tensorio.write(path, {"power": power, "argmax": argmax}, {"res1": power.shape[1], "res2": power.shape[2]})
        return
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        Q = power.shape[1] * power.shape[2]
        w.writerow(["frame_index", "argmax_elevation_deg", "argmax_azimuth_deg"] + [f"p{q}" for q in range(Q)])
        for f in frames:
            el, az = f.argmax_angles_deg()
            w.writerow([f.frame_index, f"{el:.6f}", f"{az:.6f}"] + [f"{v:.9g}" for v in f.power.ravel()])


def read_srp(path):
    path = Path(path)
    if path.suffix.lower() == ".csv":
        raise UsageError("infer needs the binary SRP tensor file written by `srpedge srp --out FILE.bin`")
    tensors, _ = tensorio.read(path)
    if "power" not in tensors:
        raise UsageError(f"{path}: no 'power' tensor")
    return [srp.SrpFrame(p, t) for t, p in enumerate(tensors["power"])]


def srp_estimates(frames, grid) -> np.ndarray:
    rows = []
    for f in frames:
        i, j = f.argmax
        rows.append((f.frame_index, np.degrees(grid.elevations[i]), np.degrees(grid.azimuths[j])))
    return np.array(rows).reshape(-1, 3)


def get_weights(graph, weights_path: str | None, seed: int):
    if weights_path:
        p = Path(weights_path)
        if not p.exists():
            raise FileNotFoundError("infer: weights not found")
        return net.load_weights(p, graph)
    log.warning("*** no weight file given: using SEEDED RANDOM weights (seed=%d); DOA outputs are not meaningful ***", seed)
    return net.init_weights(graph, seed)


def do_infer(frames, variant: str, weights_path: str | None, seed: int):
    features = assemble(frames)
    r1, r2 = features.grid_shape
    graph = net.variant_graph(variant, r1, r2)
    weights = get_weights(graph, weights_path, seed)
    return net.infer(graph, weights, features)


def write_doa(path, doa: np.ndarray) -> None:
    el, az = to_angles(np.where(np.linalg.norm(doa, axis=1, keepdims=True) > 0, doa, [[1.0, 0, 0]]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame_index", "x", "y", "z", "elevation_deg", "azimuth_deg"])
        for t, (v, e, a) in enumerate(zip(doa, el, az)):
            w.writerow([t, *(f"{c:.9f}" for c in v), f"{math.degrees(e):.6f}", f"{math.degrees(a):.6f}"])


def read_angles_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """(frame_index, (elevation_deg, azimuth_deg)) from a CSV with those named columns."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise UsageError(f"{path}: no rows")
    el_key = "elevation_deg" if "elevation_deg" in rows[0] else "argmax_elevation_deg"
    az_key = "azimuth_deg" if "azimuth_deg" in rows[0] else "argmax_azimuth_deg"
    if el_key not in rows[0] or az_key not in rows[0]:
        raise UsageError(f"{path}: needs frame_index, elevation_deg and azimuth_deg columns")
    idx = np.array([int(r["frame_index"]) for r in rows])
    ang = np.array([(float(r[el_key]), float(r[az_key])) for r in rows])
    return idx, ang


def read_vad_csv(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    key = "vad" if rows and "vad" in rows[0] else "active"
    return np.array([int(r["frame_index"]) for r in rows]), np.array([int(float(r[key])) != 0 for r in rows])


def do_eval(est_idx, est_ang, truth_idx, truth_ang, grid=None, vad=None) -> dict:
    common = np.intersect1d(est_idx, truth_idx)
    if len(common) == 0:
        raise UsageError("estimate and truth share no frame indices")
    est_row = {int(i): r for r, i in enumerate(est_idx)}
    truth_row = {int(i): r for r, i in enumerate(truth_idx)}
    e = est_ang[[est_row[int(i)] for i in common]]
    t = truth_ang[[truth_row[int(i)] for i in common]]
    mask = None
    if vad is not None:
        vi, vm = vad
        lookup = dict(zip(vi.tolist(), vm.tolist()))
        mask = np.array([lookup.get(int(i), False) for i in common])
    return metrics.score(metrics.DoaSeries.from_angles(t, e, mask), grid)


def cost_reports(cfg: RunConfig) -> list:
    array = cfg.load_array()
    variants = cfg.cost_variants or [cfg.variant]
    methods = cfg.cost_methods or [cfg.method]
    return [
        cost.system_cost(v, cfg.grid[0], cfg.grid[1], m, array, cfg.fs, cfg.K, cfg.overlap)
        for v in variants
        for m in methods
    ]


def _dump_json(obj, path=None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# bench


def bench_schema() -> dict:
    ref = resources.files("srpedge") / "schemas" / "bench.schema.json"
    return json.loads(ref.read_text())


def do_bench(cfg: RunConfig, n_frames: int = 8, repeats: int = 3) -> dict:
    array = cfg.load_array()
    grid = build_grid(*cfg.grid)
    frame = FrameSpec(cfg.K, cfg.overlap, cfg.window)
    n = cfg.K + frame.hop * (n_frames - 1)
    rng = np.random.default_rng(cfg.seed)
    u = rng.standard_normal(3)
    clip = simroom.anechoic_far_field(u / np.linalg.norm(u), rng.standard_normal(n), array, cfg.fs)

    stages = {}
    t0 = time.perf_counter()
    specs = spectra(clip, frame)
    stages["stft"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    gccs = [srp.gcc_phat(s, array) for s in specs]
    stages["gcc_phat"] = time.perf_counter() - t0

    methods = {}
    maps = {}
    for m in srp.METHODS:
        t0 = time.perf_counter()
        proc = srp.SrpProcessor(srp.SrpConfig(array, grid, cfg.fs, frame, m))
        setup = time.perf_counter() - t0
        best = math.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            out = [proc.map(g) for g in gccs]
            best = min(best, time.perf_counter() - t0)
        maps[m] = np.stack([f.power for f in out])
        methods[m] = {"setup_s": setup, "wall_s": best, "frames_per_s": n_frames / best, "backend": kernels.BACKEND}
    ref = maps["lc"]
    dev = float(np.max(np.abs(maps["lc-edge"] - ref) / (1.0 + np.abs(ref))))

    backends = {}
    edge = srp.build_sinc_table_edge(srp.tdoa_table(array, grid, cfg.fs), srp.n_samp(array, cfg.fs))
    cos_w, sin_w = srp.fourier_tables(cfg.K, edge.n_max)
    for name, mod in kernels.available_backends().items():
        best = math.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            for g in gccs:
                mod.edge_accumulate(np.ascontiguousarray(g.values.real), np.ascontiguousarray(g.values.imag), cos_w, sin_w,
                                    edge.row_pair, edge.row_n, edge.coef, edge.lags)
            best = min(best, time.perf_counter() - t0)
        backends[name] = {"wall_s": best, "frames_per_s": n_frames / best}

    graph = net.variant_graph(cfg.variant, *cfg.grid)
    feats = assemble([srp.SrpFrame(p, t) for t, p in enumerate(maps[cfg.method])])
    w = net.init_weights(graph, cfg.seed)
    t0 = time.perf_counter()
    net.infer(graph, w, feats)
    stages["infer"] = time.perf_counter() - t0
    return {
        "schema_version": 1,
        "config": {"grid": list(cfg.grid), "fs": cfg.fs, "K": cfg.K, "overlap": cfg.overlap, "n_mics": array.n_mics,
                   "variant": cfg.variant, "frames": n_frames},
        "stages": stages,
        "methods": methods,
        "kernel_backends": backends,
        "lc_edge_vs_lc_max_rel_dev": dev,
        "lc_edge_matches_lc": dev <= 1e-9,
    }


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(a) -> int:
    scene = SceneConfig(
        room=_floats(a.room, 3), t60=a.t60, snr_db=a.snr,
        sources=[(0.0,) + _floats(a.src[0], 3)] if len(a.src) == 1 and "@" not in a.src[0] else [_segment(s) for s in a.src],
        center=_floats(a.center, 3) if a.center else None, duration_s=a.duration, dry=a.dry or "",
        max_order=a.max_order,
    )
    frame = FrameSpec(a.k, a.overlap)
    clip, truth = do_synth(scene, _array(a.array), a.fs, a.seed, frame)
    save_wav(a.out, clip, pcm16=a.pcm16)
    truth_path = a.truth or str(Path(a.out).with_suffix(".truth.csv"))
    write_truth(truth_path, truth)
    print(f"wrote {a.out} ({clip.channel_count} ch, {len(clip)} samples) and {truth_path}")
    return 0


def _segment(text: str) -> tuple:
    if "@" in text:
        t, pos = text.split("@", 1)
        return (float(t),) + _floats(pos, 3)
    return (0.0,) + _floats(text, 3)


def cmd_srp(a) -> int:
    clip = load_wav(a.input)
    fs = a.fs or clip.sample_rate_hz
    if fs != clip.sample_rate_hz:
        raise UsageError(f"--fs {fs} does not match the file's {clip.sample_rate_hz} Hz")
    frames = do_srp(clip, _array(a.array), build_grid(*_grid(a.grid)), fs, FrameSpec(a.k, a.overlap), a.method)
    write_srp(a.out, frames, a.format)
    print(f"wrote {len(frames)} SRP frames to {a.out}")
    return 0


def cmd_infer(a) -> int:
    frames = read_srp(a.input)
    doa = do_infer(frames, a.variant, a.weights, a.seed)
    write_doa(a.out, doa)
    print(f"wrote {len(doa)} DOA estimates to {a.out}")
    return 0


def cmd_eval(a) -> int:
    ei, ea = read_angles_csv(a.estimate)
    ti, ta = read_angles_csv(a.truth)
    vad = read_vad_csv(a.vad) if a.vad else None
    grid = build_grid(*_grid(a.grid)) if a.grid else None
    _dump_json(do_eval(ei, ea, ti, ta, grid, vad), a.out)
    return 0


def cmd_cost(a) -> int:
    cfg = load_config(a.config) if a.config else RunConfig()
    text = cost.roofline_emit(cost_reports(cfg), a.out)
    if a.output:
        Path(a.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_bench(a) -> int:
    cfg = load_config(a.config) if a.config else RunConfig()
    report = do_bench(cfg, a.frames, a.repeats)
    _dump_json(report, a.out)
    return 0


def run_pipeline(cfg: RunConfig) -> dict:
    """synth -> srp -> infer -> eval; every artifact lands in ``cfg.output_dir``."""
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    array = cfg.load_array()
    grid = build_grid(*cfg.grid)
    frame = FrameSpec(cfg.K, cfg.overlap, cfg.window)
    stage = "synth"
    try:
        clip, truth = do_synth(cfg.scene, array, cfg.fs, cfg.seed, frame, cfg.base_dir)
        save_wav(out / "scene.wav", clip)
        write_truth(out / "truth.csv", truth)
        stage = "srp"
        frames = do_srp(clip, array, grid, cfg.fs, frame, cfg.method)
        write_srp(out / "srp.bin", frames)
        write_srp(out / "srp.csv", frames)
        stage = "infer"
        doa = do_infer(frames, cfg.variant, str(cfg.resolve(cfg.weights)) if cfg.weights else None, cfg.seed)
        write_doa(out / "doa.csv", doa)
        stage = "eval"
        idx = truth[:, 0].astype(int)
        est_idx, est_ang = read_angles_csv(out / "doa.csv")
        result = {
            "network": do_eval(est_idx, est_ang, idx, truth[:, 1:], grid),
            "srp_argmax": do_eval(idx, srp_estimates(frames, grid)[:, 1:], idx, truth[:, 1:], grid),
            "random_weights": not bool(cfg.weights),
            "srp_method": cfg.method,
            "variant": cfg.variant,
        }
        cells = [grid.cell_distance(f.argmax, grid.cell_of(_unit(el, az))) for f, (_, el, az) in zip(frames, truth)]
        result["srp_argmax"]["max_cell_distance"] = int(max(cells))
        _dump_json(result, out / "metrics.json")
        stage = "cost"
        (out / "cost.json").write_text(cost.roofline_emit(cost_reports(cfg), "json"))
    except FileNotFoundError as exc:
        raise _StageError(stage, str(exc).removeprefix(f"{stage}: "), 2) from exc
    except (ValueError, UsageError) as exc:
        raise _StageError(stage, str(exc), 2) from exc
    return result


def _unit(el_deg, az_deg):
    e, a = math.radians(el_deg), math.radians(az_deg)
    return np.array([math.cos(e) * math.cos(a), math.cos(e) * math.sin(a), math.sin(e)])


class _StageError(Exception):
    def __init__(self, stage, msg, code):
        super().__init__(f"{stage}: {msg}")
        self.code = code


def cmd_run(a) -> int:
    cfg = load_config(a.config)
    if a.out_dir:
        cfg.out_dir = str(Path(a.out_dir).resolve())
    result = run_pipeline(cfg)
    print(json.dumps({"out_dir": str(cfg.output_dir), "srp_argmax_rmsae_deg": result["srp_argmax"]["rmsae_deg"]}))
    return 0


def cmd_init_config(a) -> int:
    if a.out:
        Path(a.out).write_text(EXAMPLE_CONFIG)
    else:
        sys.stdout.write(EXAMPLE_CONFIG)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="srpedge", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="render a shoebox scene to a multichannel WAV plus per-frame truth CSV")
    s.add_argument("--room", required=True, help="X,Y,Z in meters")
    s.add_argument("--t60", type=float, default=0.0, help="target reverberation time in seconds (0 = anechoic)")
    s.add_argument("--src", action="append", required=True,
                   help="source x,y,z; repeat as T@x,y,z for piecewise-static segments starting at T seconds")
    s.add_argument("--center", help="array center x,y,z (default: room center)")
    s.add_argument("--array", default="default")
    s.add_argument("--snr", type=float, default=math.inf, help="SNR in dB (default: no noise)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--dry", help="mono dry WAV (default: seeded white noise)")
    s.add_argument("--duration", type=float, default=3.0, help="white-noise duration in seconds")
    s.add_argument("--fs", type=int, default=16000)
    s.add_argument("--k", type=int, default=4096)
    s.add_argument("--overlap", type=float, default=0.25)
    s.add_argument("--max-order", type=int, default=None)
    s.add_argument("--pcm16", action="store_true", help="write 16-bit PCM instead of float32")
    s.add_argument("--out", required=True)
    s.add_argument("--truth", help="truth CSV path (default: <out>.truth.csv)")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("srp", help="compute SRP-PHAT maps from a multichannel WAV")
    s.add_argument("--input", required=True)
    s.add_argument("--method", choices=srp.METHODS, default="lc-edge")
    s.add_argument("--grid", default="8x16")
    s.add_argument("--fs", type=int, default=None)
    s.add_argument("--k", type=int, default=4096)
    s.add_argument("--overlap", type=float, default=0.25)
    s.add_argument("--array", default="default")
    s.add_argument("--format", choices=("csv", "bin"), default=None, help="default: from the --out suffix")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_srp)

    s = sub.add_parser("infer", help="run the localization network on an SRP tensor file")
    s.add_argument("--input", required=True, help="binary SRP tensor file from `srp`")
    s.add_argument("--weights", help="C3DE weight file (default: seeded random weights)")
    s.add_argument("--variant", choices=sorted(net.VARIANTS), default="EM")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_infer)

    s = sub.add_parser("eval", help="score DOA estimates against ground truth")
    s.add_argument("--estimate", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--vad", help="CSV with frame_index,vad columns")
    s.add_argument("--grid", help="R1xR2, adds the SRP-grid ratio")
    s.add_argument("--out", help="metrics JSON (default: stdout)")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("cost", help="emit the analytic hardware-cost roofline records")
    s.add_argument("--config")
    s.add_argument("--out", choices=("csv", "json"), default="csv", help="output format")
    s.add_argument("--output", help="file to write (default: stdout)")
    s.set_defaults(func=cmd_cost)

    s = sub.add_parser("bench", help="time every SRP method and kernel backend")
    s.add_argument("--config")
    s.add_argument("--frames", type=int, default=8)
    s.add_argument("--repeats", type=int, default=3)
    s.add_argument("--out", help="report JSON (default: stdout)")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("run", help="synth -> srp -> infer -> eval from one config file")
    s.add_argument("--config", required=True)
    s.add_argument("--out-dir", help="override out_dir from the config")
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("init-config", help="print an example run configuration")
    s.add_argument("--out")
    s.set_defaults(func=cmd_init_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except _StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except FileNotFoundError as exc:
        msg = str(exc) if str(exc).startswith(f"{args.command}:") else f"{args.command}: {exc}"
        print(f"error: {msg}", file=sys.stderr)
        return 2
    except (UsageError, ConfigError, FormatError, tensorio.ChecksumError, ValueError) as exc:
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"error: {args.command}: internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
