"""Command-line front end: ``specfuse simulate|fuse|evaluate|sweep``.

Every command writes into ``--out`` and finishes with ``manifest.json``
listing each artifact and its SHA-256.  Settings can also come from a
``key = value`` file given with ``--config``; flags on the command line win.
Independent channels and sweep cells run in worker processes, at most
``SPECFUSE_THREADS`` (default: number of CPUs) at a time.
"""

import argparse
import csv
import hashlib
import itertools
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence

from . import imageio
from .core import geometry_from
from .errors import SpecfuseError, ShapeMismatch
from .forward import clip_boundary
from .metrics import similarity_report
from .regularizers import DtvParams
from .solvers import ALGORITHMS, FusionProblem, SolverParams, SolverTrace
from .synth import KERNEL_KINDS, SynthSpec, make_problem, make_scene

__all__ = ["main", "build_parser", "EVALUATE_COLUMNS", "SWEEP_COLUMNS"]

EVALUATE_COLUMNS = ("channel", "ssim", "mse", "psnr", "hpsi", "final_objective")
SWEEP_COLUMNS = ("lambda_u", "lambda_k", "gamma", "ssim", "mse", "psnr", "final_objective",
                 "status")

# defaults of every option that may also appear in a config file
DEFAULTS = {
    "lambda_u": 0.1,
    "lambda_k": 10.0,
    "gamma": 0.9995,
    "epsilon": 0.003,
    "alpha": 0.0,
    "theta": 1.1,
    "eta": 2.0,
    "iterations": 2000,
    "kernel_size": (41, 41),
    "sampling": 4,
    "algorithm": "palm",
    "seed": 0,
    "out": "specfuse-run",
    # simulate
    "kernel": "disk",
    "kernel_param": None,
    "offset": (5.0, 5.0),
    "shift": (0, 0),
    "data_size": (100, 100),
    "noise": 0.001,
    "rgb": None,
    "crop": (0, 0),
    # fuse / sweep inputs
    "bundle": None,
    "data": None,
    "side_info": None,
    "channels": None,
    "truth": None,
    "run": None,
}

_PAIR_KEYS = {"kernel_size", "offset", "shift", "data_size", "crop"}
_LIST_KEYS = {"data", "truth", "channels"}
_GRID_KEYS = {"lambda_u", "lambda_k", "gamma"}


# ----------------------------------------------------------------------------
# configuration


def read_config(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment, keys use ``-`` or ``_``."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SpecfuseError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in DEFAULTS:
                raise SpecfuseError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = value.split()
    return values


def _coerce(key, tokens, grid=False):
    """Turn config tokens (or argparse values) into the typed setting."""
    if tokens is None:
        return None
    if isinstance(tokens, str):
        tokens = tokens.split()
    if key in _PAIR_KEYS:
        values = [float(t) if key == "offset" else int(t) for t in tokens]
        if len(values) == 1:
            values = values * 2
        if len(values) != 2:
            raise SpecfuseError(f"{key} takes one or two values, got {tokens}")
        return tuple(values)
    if key in _LIST_KEYS:
        return [int(t) for t in tokens] if key == "channels" else list(tokens)
    if grid and key in _GRID_KEYS:
        return [float(t) for t in tokens]
    if len(tokens) != 1:
        raise SpecfuseError(f"{key} takes a single value, got {tokens}")
    token = tokens[0]
    default = DEFAULTS[key]
    if key in ("iterations", "sampling", "seed"):
        return int(token)
    if isinstance(default, float) or key == "kernel_param":
        return float(token)
    return token


def resolve(args: argparse.Namespace, grid_keys=()) -> dict:
    """Merge built-in defaults, the config file and the command-line flags."""
    cfg = {}
    for key, default in DEFAULTS.items():
        cfg[key] = [default] if key in grid_keys else default
    if getattr(args, "config", None):
        for key, tokens in read_config(args.config).items():
            cfg[key] = _coerce(key, tokens, grid=key in grid_keys)
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            if isinstance(value, list) and key not in _LIST_KEYS and key not in grid_keys:
                value = _coerce(key, [str(v) for v in value])
            cfg[key] = value
    return cfg


def solver_params(cfg, lambda_u=None, lambda_k=None) -> SolverParams:
    return SolverParams(
        lambda_u=cfg["lambda_u"] if lambda_u is None else lambda_u,
        lambda_k=cfg["lambda_k"] if lambda_k is None else lambda_k,
        alpha=cfg["alpha"],
        theta=cfg["theta"],
        eta=cfg["eta"],
        max_iterations=cfg["iterations"],
    )


# ----------------------------------------------------------------------------
# output helpers


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out, command, cfg, artifacts: Sequence[str], status: str) -> str:
    entries = []
    for path in sorted(set(artifacts)):
        entries.append({"path": os.path.relpath(path, out), "sha256": _sha256(path)})
    manifest = {
        "command": command,
        "status": status,
        "config": {k: (list(v) if isinstance(v, tuple) else v)
                   for k, v in sorted(cfg.items()) if not k.startswith("_")},
        "artifacts": entries,
    }
    path = os.path.join(out, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return path


def _write_matrix(path, u, artifacts, **provenance):
    imageio.write_image(path, u, "matrixText", provenance=provenance)
    artifacts += [path, path + ".meta"]


def _worker_count(tasks: int) -> int:
    env = os.environ.get("SPECFUSE_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise SpecfuseError(f"SPECFUSE_THREADS must be an integer, got {env!r}")
    return max(1, min(cap, tasks))


def _map(func, jobs: List[tuple]):
    """Run ``func(*job)`` for every job, in worker processes when allowed."""
    workers = _worker_count(len(jobs))
    if workers == 1:
        return [func(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(func, *job) for job in jobs]
        return [f.result() for f in futures]


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "NA"
        return repr(value)
    return str(value)


# ----------------------------------------------------------------------------
# simulate


def cmd_simulate(cfg) -> int:
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    r = cfg["kernel_size"]
    spec = SynthSpec(
        kernel_kind=cfg["kernel"],
        kernel_shape=r,
        sampling=cfg["sampling"],
        data_shape=cfg["data_size"],
        noise_variance=cfg["noise"],
        side_info_shift=cfg["shift"],
        random_seed=cfg["seed"],
        kernel_param=cfg["kernel_param"],
        kernel_offset=cfg["offset"],
        crop_origin=cfg["crop"],
    )
    if cfg["rgb"]:
        rgb = imageio.read_rgb(cfg["rgb"])
    else:
        rgb = make_scene(spec.geometry.image_shape, seed=cfg["seed"])
    problem = make_problem(rgb, spec)

    artifacts: List[str] = []
    prov = {"command": "simulate", "seed": cfg["seed"]}
    for name, arr in (("f", problem.f), ("v", problem.v), ("truth_image", problem.truth_image),
                      ("truth_registered", problem.registered_truth),
                      ("truth_kernel", problem.truth_kernel)):
        _write_matrix(os.path.join(out, name + ".txt"), arr, artifacts, **prov)
    for name, arr in (("f", problem.f), ("v", problem.v), ("truth_image", problem.truth_image)):
        path = os.path.join(out, name + ".png")
        artifacts.append(imageio.save_raster(path, imageio.render_image(arr)))
    path = os.path.join(out, "truth_kernel.png")
    artifacts.append(imageio.save_raster(path, imageio.render_kernel(problem.truth_kernel), 8))
    path = os.path.join(out, "bundle.json")
    with open(path, "w") as fh:
        json.dump(problem.metadata(), fh, indent=2, sort_keys=True)
    artifacts.append(path)
    write_manifest(out, "simulate", cfg, artifacts, "ok")
    return 0


# ----------------------------------------------------------------------------
# fuse


def _load_inputs(cfg):
    """Data channels, side information and kernel shape from flags or a bundle."""
    data_paths = cfg["data"]
    side = cfg["side_info"]
    if cfg["bundle"]:
        bundle = cfg["bundle"]
        data_paths = data_paths or [os.path.join(bundle, "f.txt")]
        side = side or os.path.join(bundle, "v.txt")
    if not data_paths or not side:
        raise SpecfuseError("need --data and --side-info (or --bundle)")
    channels = [imageio.read_image(p) for p in data_paths]
    v = imageio.read_image(side)
    return channels, v


def _kernel_shape_for(cfg, f_shape, v_shape):
    r = tuple(cfg["kernel_size"])
    if cfg["bundle"] and cfg.get("_kernel_from_flag") is False:
        meta_path = os.path.join(cfg["bundle"], "bundle.json")
        if os.path.exists(meta_path):
            with open(meta_path) as fh:
                r = tuple(json.load(fh)["spec"]["kernel_shape"])
    return r


def _fuse_channel(index, f, v, kernel_shape, cfg, out):
    """Solve one channel and write its artifacts; returns ``(index, paths, error)``."""
    artifacts: List[str] = []
    try:
        dtv = DtvParams(cfg["gamma"], cfg["epsilon"])
        problem = FusionProblem.build(f, v, kernel_shape, cfg["sampling"], dtv)
        params = solver_params(cfg)
        result = ALGORITHMS[cfg["algorithm"]](problem, params)
        stem = os.path.join(out, f"ch{index}")
        u = clip_boundary(result.u, problem.geometry)
        prov = {"command": "fuse", "channel": index, "algorithm": cfg["algorithm"]}
        _write_matrix(stem + "_image.txt", u, artifacts, **prov)
        _write_matrix(stem + "_kernel.txt", result.k, artifacts, **prov)
        artifacts.append(imageio.save_raster(stem + "_image.png", imageio.render_image(u)))
        artifacts.append(imageio.save_raster(stem + "_kernel.png",
                                             imageio.render_kernel(result.k), 8))
        result.trace.to_csv(stem + "_trace.csv")
        artifacts.append(stem + "_trace.csv")
        from .plotting import plot_trace

        artifacts.append(plot_trace(result.trace, stem + "_trace.png",
                                    title=f"channel {index} ({cfg['algorithm']})"))
        return index, artifacts, None
    except (SpecfuseError, RuntimeError) as exc:
        return index, artifacts, f"{type(exc).__name__}: {exc}"


def cmd_fuse(cfg) -> int:
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    channels, v = _load_inputs(cfg)
    selected = cfg["channels"] if cfg["channels"] is not None else list(range(len(channels)))
    for c in selected:
        if not 0 <= c < len(channels):
            raise SpecfuseError(f"channel {c} does not exist ({len(channels)} data files)")
    r = _kernel_shape_for(cfg, channels[0].shape, v.shape)
    # geometry errors are reported before any solve starts
    for c in selected:
        geo = geometry_from(channels[c].shape, r, cfg["sampling"])
        if v.shape != tuple(geo.image_shape):
            FusionProblem.build(channels[c], v, r, cfg["sampling"])
    jobs = [(c, channels[c], v, r, cfg, out) for c in selected]
    results = _map(_fuse_channel, jobs)
    artifacts: List[str] = []
    failed = []
    for index, paths, error in results:
        artifacts += paths
        if error:
            failed.append(index)
            print(f"channel {index} failed: {error}", file=sys.stderr)
    status = "ok" if not failed else f"failed channels {failed}"
    write_manifest(out, "fuse", cfg, artifacts, status)
    return 0 if not failed else 1


# ----------------------------------------------------------------------------
# evaluate


def _match_truth(recon, truth):
    """Clip a full-lattice truth symmetrically down to the reconstruction shape."""
    if truth.shape == recon.shape:
        return truth
    d1, d2 = truth.shape[0] - recon.shape[0], truth.shape[1] - recon.shape[1]
    if d1 < 0 or d2 < 0 or d1 % 2 or d2 % 2:
        raise ShapeMismatch(f"truth {truth.shape} does not match reconstruction {recon.shape}")
    return truth[d1 // 2 : truth.shape[0] - d1 // 2, d2 // 2 : truth.shape[1] - d2 // 2]


def evaluate_pair(recon, truth, trace: Optional[SolverTrace] = None):
    truth = _match_truth(recon, truth)
    report = similarity_report(recon, truth)
    final = float(trace.objective[-1]) if trace is not None and len(trace) else float("nan")
    return report, final


def cmd_evaluate(cfg) -> int:
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    run = cfg["run"]
    truths = cfg["truth"]
    if not run or not truths:
        raise SpecfuseError("evaluate needs --run and --truth")
    recon_paths = sorted(
        p for p in os.listdir(run) if p.startswith("ch") and p.endswith("_image.txt")
    )
    if not recon_paths:
        raise SpecfuseError(f"no reconstructions (ch*_image.txt) in {run!r}")
    indices = [int(p[2 : -len("_image.txt")]) for p in recon_paths]
    indices.sort()
    if len(truths) == 1:
        truths = truths * len(indices)
    if len(truths) != len(indices):
        raise SpecfuseError(f"{len(indices)} reconstructions but {len(truths)} truth files")
    rows = []
    for index, truth_path in zip(indices, truths):
        recon = imageio.read_image(os.path.join(run, f"ch{index}_image.txt"))
        truth = imageio.read_image(truth_path)
        trace_path = os.path.join(run, f"ch{index}_trace.csv")
        trace = SolverTrace.from_csv(trace_path) if os.path.exists(trace_path) else None
        report, final = evaluate_pair(recon, truth, trace)
        rows.append((index, report.ssim, report.mse, report.psnr, "NA", final))
    path = os.path.join(out, "evaluation.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVALUATE_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    write_manifest(out, "evaluate", cfg, [path], "ok")
    return 0


# ----------------------------------------------------------------------------
# sweep


def _sweep_cell(lambda_u, lambda_k, gamma, f, v, truth, kernel_shape, cfg):
    row = {"lambda_u": lambda_u, "lambda_k": lambda_k, "gamma": gamma}
    try:
        problem = FusionProblem.build(f, v, kernel_shape, cfg["sampling"],
                                      DtvParams(gamma, cfg["epsilon"]))
        result = ALGORITHMS[cfg["algorithm"]](problem, solver_params(cfg, lambda_u, lambda_k))
        u = clip_boundary(result.u, problem.geometry)
        report, final = evaluate_pair(u, truth, result.trace)
        row.update(ssim=report.ssim, mse=report.mse, psnr=report.psnr,
                   final_objective=final, status="ok")
    except (SpecfuseError, RuntimeError) as exc:
        row.update(ssim=float("nan"), mse=float("nan"), psnr=float("nan"),
                   final_objective=float("nan"), status=f"failed: {type(exc).__name__}")
    return row


def cmd_sweep(cfg) -> int:
    out = cfg["out"]
    os.makedirs(out, exist_ok=True)
    grids = {key: cfg[key] for key in _GRID_KEYS}
    for key, values in grids.items():
        if not values:
            raise SpecfuseError(f"sweep grid for {key} is empty")
    channels, v = _load_inputs(cfg)
    truths = cfg["truth"]
    if not truths and cfg["bundle"]:
        truths = [os.path.join(cfg["bundle"], "truth_registered.txt")]
    if not truths:
        raise SpecfuseError("sweep needs --truth (or --bundle)")
    truth = imageio.read_image(truths[0])
    f = channels[(cfg["channels"] or [0])[0]]
    r = _kernel_shape_for(cfg, f.shape, v.shape)
    cells = list(itertools.product(grids["lambda_u"], grids["lambda_k"], grids["gamma"]))
    rows = _map(_sweep_cell, [(lu, lk, g, f, v, truth, r, cfg) for lu, lk, g in cells])

    artifacts = []
    path = os.path.join(out, "sweep.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in SWEEP_COLUMNS])
    artifacts.append(path)
    from .plotting import plot_sweep

    for metric in ("ssim", "psnr"):
        artifacts.append(plot_sweep(rows, os.path.join(out, f"sweep_{metric}.png"), metric))
    failed = [row for row in rows if row["status"] != "ok"]
    for row in failed:
        print(f"cell lambda_u={row['lambda_u']} lambda_k={row['lambda_k']} "
              f"gamma={row['gamma']} {row['status']}", file=sys.stderr)
    write_manifest(out, "sweep", cfg, artifacts, "ok" if not failed else f"{len(failed)} failed")
    return 0 if not failed else 1


# ----------------------------------------------------------------------------
# argument parsing


def _add_common(p, grid=False):
    nargs = "+" if grid else None
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--out", help="output directory")
    p.add_argument("--lambda-u", dest="lambda_u", type=float, nargs=nargs)
    p.add_argument("--lambda-k", dest="lambda_k", type=float, nargs=nargs)
    p.add_argument("--gamma", type=float, nargs=nargs)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--alpha", type=float, help="inertia (ipalm)")
    p.add_argument("--theta", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--iterations", type=int)
    p.add_argument("--kernel-size", dest="kernel_size", type=int, nargs="+",
                   help="odd kernel side(s)")
    p.add_argument("--sampling", type=int)
    p.add_argument("--algorithm", choices=sorted(ALGORITHMS))
    p.add_argument("--seed", type=int)


def _add_inputs(p):
    p.add_argument("--bundle", help="directory written by 'simulate'")
    p.add_argument("--data", nargs="+", help="data image(s), one per channel")
    p.add_argument("--side-info", dest="side_info", help="side information image")
    p.add_argument("--channels", type=int, nargs="+", help="channel indices to process")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specfuse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic problem bundle")
    _add_common(p)
    p.add_argument("--kernel", choices=[k for k in KERNEL_KINDS if k != "custom"])
    p.add_argument("--kernel-param", dest="kernel_param", type=float,
                   help="disk radius or Gaussian sigma")
    p.add_argument("--offset", type=float, nargs=2, help="Gaussian kernel offset in taps")
    p.add_argument("--shift", type=int, nargs=2, help="side-information shift in pixels")
    p.add_argument("--data-size", dest="data_size", type=int, nargs="+")
    p.add_argument("--noise", type=float, help="noise variance")
    p.add_argument("--rgb", help="source RGB image (default: procedural scene)")
    p.add_argument("--crop", type=int, nargs=2, help="crop origin in the RGB image")

    p = sub.add_parser("fuse", help="reconstruct image and kernel per channel")
    _add_common(p)
    _add_inputs(p)

    p = sub.add_parser("evaluate", help="compare reconstructions with ground truth")
    _add_common(p)
    p.add_argument("--run", help="output directory of 'fuse'")
    p.add_argument("--truth", nargs="+", help="truth image(s), one per channel or shared")

    p = sub.add_parser("sweep", help="grid over lambda_u, lambda_k and gamma")
    _add_common(p, grid=True)
    _add_inputs(p)
    p.add_argument("--truth", nargs="+", help="truth image")
    return parser


COMMANDS = {"simulate": cmd_simulate, "fuse": cmd_fuse, "evaluate": cmd_evaluate,
            "sweep": cmd_sweep}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args, grid_keys=_GRID_KEYS if args.command == "sweep" else ())
        cfg["_kernel_from_flag"] = args.kernel_size is not None or bool(
            args.config and "kernel_size" in read_config(args.config))
        code = COMMANDS[args.command](cfg)
    except (SpecfuseError, RuntimeError, OSError) as exc:
        print(f"specfuse {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return code


if __name__ == "__main__":
    sys.exit(main())
