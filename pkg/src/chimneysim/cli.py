"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime or
numerical error. With ``--json-errors`` each error is printed to stderr as
a single JSON line.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .chimney import apply_chimney, chimney_mask, grow_fractures, saturation, vp_factor
from .config import ConfigError, PipelineConfig, load_config
from .grid import GridFormatError, GridIOError, read_grid, write_grid, write_image
from .pipeline import (SampleError, SampleSpec, eval_run, fracture_params, generate_dataset,
                       generate_sample, load_background, plan_samples, write_sample)
from .rtm import migrate, smooth_velocity
from .wavesim import GeometryError, InstabilityError, ShotGather, as_velocity, simulate_survey

log = logging.getLogger("chimneysim")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _globals(p, suppress):
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="pipeline configuration (.toml or .json)")
    p.add_argument("--seed", type=int, default=d, help="master seed (overrides the config)")
    p.add_argument("--workers", type=int, default=d, help="worker processes")
    p.add_argument("--out", default=d, help="output directory or file")
    p.add_argument("--verbose", action="store_true", default=d)
    p.add_argument("--json-errors", action="store_true", default=d,
                   help="report errors on stderr as single-line JSON")


def build_parser():
    p = _Parser(prog="chimneysim", description="Synthetic gas-chimney seismic datasets.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _globals(p, False)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def cmd(name, help_):
        s = sub.add_parser(name, help=help_)
        _globals(s, True)
        return s

    g = cmd("generate", "generate a dataset from a configuration")
    g.add_argument("--dry-run", action="store_true", help="write the manifest only")

    s = cmd("sample", "generate a single sample pair")
    s.add_argument("--model", help="model id (default: first configured model)")
    s.add_argument("--index", type=int, default=0)

    s = cmd("simulate", "forward-model shot gathers on a velocity grid")
    s.add_argument("velocity", help="velocity grid (.f32 with .json sidecar)")

    s = cmd("migrate", "migrate shot gathers into an image")
    s.add_argument("velocity", help="background velocity grid (smoothed per the config)")
    s.add_argument("gathers", help="directory of shot_###.f32 gathers written by 'simulate'")
    s.add_argument("--imaging", choices=("zero_lag", "adjoint"))
    s.add_argument("--postfilter", choices=("none", "laplacian"))

    s = cmd("chimney", "perturb a velocity grid with a gas chimney")
    s.add_argument("velocity", help="background velocity grid")

    s = cmd("eval", "score predictions against a dataset manifest")
    s.add_argument("manifest")
    s.add_argument("predictions", help="directory holding predictions")
    s.add_argument("--mode", choices=("detection", "enhancement"), default="enhancement")
    s.add_argument("--region", choices=("full", "mask"), default="full")
    s.add_argument("--pred-name", help="per-sample file name inside a dataset-style tree")
    s.add_argument("--split", choices=("train", "test"))

    s = cmd("render", "render a grid as a grayscale PGM or PNG image")
    s.add_argument("grid")
    s.add_argument("--lo", type=float, default=1.0, help="lower clip percentile")
    s.add_argument("--hi", type=float, default=99.0, help="upper clip percentile")
    return p


def _config(args, required=True):
    if args.config is None:
        if required:
            raise UsageError(f"'{args.command}' needs --config")
        cfg = PipelineConfig()
    else:
        cfg = load_config(args.config)
    kw = {}
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2**64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        kw["master_seed"] = args.seed
    if args.workers is not None:
        if args.workers < 1:
            raise UsageError("--workers must be >= 1")
        kw["workers"] = args.workers
    if args.out is not None:
        kw["out"] = args.out
    return cfg.with_overrides(**kw) if kw else cfg


def _progress(k, n, sid, status):
    log.info("[%d/%d] %s %s", k, n, sid, status)


def cmd_generate(args):
    cfg = _config(args)
    if args.dry_run:
        cfg = cfg.with_overrides(dry_run=True)
    manifest = generate_dataset(cfg, _progress)
    c = manifest["counts"]
    print(json.dumps({"manifest": str(Path(cfg.dataset.out) / "manifest.json"),
                      "n_samples": manifest["n_samples"], **c}))
    return 2 if c["failed"] else 0


def cmd_sample(args):
    cfg = _config(args)
    entries = {m.id: m for m in cfg.model_entries()}
    model = args.model or next(iter(entries))
    if model not in entries:
        raise UsageError(f"unknown model id {model!r}")
    spec = next((s for s in plan_samples(cfg.with_overrides(
        samples_per_model=max(cfg.dataset.samples_per_model, args.index + 1)))
        if s.velocity_model_id == model and s.index == args.index), None)
    background = load_background(entries[model], cfg)
    pair = generate_sample(background, spec, cfg, shot_workers=cfg.dataset.workers)
    d = write_sample(pair, cfg.dataset.out, cfg.dataset.preview)
    print(json.dumps({"sample_dir": str(d), **pair.meta["stats"]}))
    return 0


def _velocity(path):
    g = read_grid(path)
    return as_velocity(g)


def cmd_simulate(args):
    cfg = _config(args, required=False)
    v = _velocity(args.velocity)
    geo = cfg.geometry.acquisition(v.nx, v.dx)
    gathers = simulate_survey(v, geo, cfg.geometry.wavelet(), cfg.solver, cfg.dataset.workers)
    out = Path(args.out or "gathers")
    for g in gathers:
        write_grid(g.to_grid(), out / f"shot_{g.source_index:03d}.f32", kind="gather",
                   extra={"record_dt": g.record_dt, "source_index": g.source_index,
                          "source_position_m": geo.source_positions[g.source_index].tolist()})
    print(json.dumps({"out": str(out), "n_shots": len(gathers)}))
    return 0


def cmd_migrate(args):
    cfg = _config(args, required=False)
    v = _velocity(args.velocity)
    geo = cfg.geometry.acquisition(v.nx, v.dx)
    gathers = []
    for i in range(geo.n_sources):
        p = Path(args.gathers) / f"shot_{i:03d}.f32"
        gathers.append(ShotGather(i, read_grid(p).values, geo.record_dt))
    mig = cfg.migration
    img = migrate(smooth_velocity(v, mig.sigma_cells), gathers, geo, cfg.geometry.wavelet(),
                  cfg.solver, args.imaging or mig.imaging, args.postfilter or mig.postfilter,
                  cfg.dataset.workers)
    out = Path(args.out or "image.f32")
    write_grid(img, out)
    print(json.dumps({"out": str(out)}))
    return 0


def cmd_chimney(args):
    cfg = _config(args, required=False)
    v = _velocity(args.velocity)
    spec = SampleSpec("chimney", Path(args.velocity).stem, 0, cfg.dataset.master_seed)
    fparams = fracture_params(cfg, spec)
    gas = cfg.gas.params()
    net = grow_fractures(v.shape, fparams)
    S = saturation(net, gas, v.dx)
    factor = vp_factor(S, gas)
    vf = apply_chimney(v, factor, cfg.gas.cap)
    mask = chimney_mask(S, gas.mask_threshold, cfg.gas.dilation_cells)
    out = Path(args.out or "chimney")
    write_grid(vf, out / "v_final.f32")
    write_grid(factor, out / "vp_factor.f32")
    write_grid(S, out / "saturation.f32")
    write_grid(mask, out / "mask.u8", out / "mask.json")
    out.joinpath("fractures.json").write_text(net.to_json())
    print(json.dumps({"out": str(out), "mask_cells": mask.count,
                      "saturation_max": float(S.values.max())}))
    return 0


def cmd_eval(args):
    report = eval_run(args.manifest, args.predictions, args.mode, args.region,
                      args.pred_name, args.split)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_render(args):
    g = read_grid(args.grid)
    out = Path(args.out or Path(args.grid).with_suffix(".pgm"))
    write_image(g, out, args.lo, args.hi)
    print(json.dumps({"out": str(out)}))
    return 0


COMMANDS = {
    "generate": cmd_generate, "sample": cmd_sample, "simulate": cmd_simulate,
    "migrate": cmd_migrate, "chimney": cmd_chimney, "eval": cmd_eval, "render": cmd_render,
}

_USAGE_ERRORS = (UsageError, ConfigError)
_RUNTIME_ERRORS = (SampleError, InstabilityError, GeometryError, GridFormatError,
                   GridIOError, OSError, ValueError, RuntimeError)


def _report(exc, code, as_json):
    if as_json:
        rec = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        key = getattr(exc, "key", None)
        if key:
            rec["key"] = key
        stage = getattr(exc, "stage", None)
        if stage:
            rec["stage"] = stage
        sys.stderr.write(json.dumps(rec) + "\n")
    else:
        sys.stderr.write(f"error: {exc}\n")


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    json_errors = "--json-errors" in argv
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError("missing command; see --help")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        return COMMANDS[args.command](args)
    except _USAGE_ERRORS as exc:
        _report(exc, 1, json_errors)
        return 1
    except _RUNTIME_ERRORS as exc:
        _report(exc, 2, json_errors)
        return 2
