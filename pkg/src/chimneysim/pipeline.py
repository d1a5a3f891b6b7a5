"""Dataset generation: chimney perturbation, forward modeling and migration.

One sample takes a background velocity model through

1. fracture growth, saturation, velocity factor and the perturbed model;
2. forward modeling on the clean and on the perturbed model;
3. migration of both data sets through the same smoothed clean model,
   giving the clean image ``Y`` and the degraded image ``X``;
4. the chimney mask, then everything is written to disk with a metadata
   record complete enough to regenerate the sample.

Per-sample seeds come from a keyed hash of ``(master_seed, model_id,
index)`` so output does not depend on scheduling or worker count.
"""
from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .chimney import (FractureNetwork, apply_chimney, chimney_mask, grow_fractures,
                      saturation, vp_factor)
from .config import ModelEntry, PipelineConfig
from .grid import (GridIOError, MaskGrid, SaturationField, SeismicImage, VelocityModel,
                   VpFactorField, read_grid, write_grid, write_image)
from .metrics import aggregate, enh_scores, seg_scores
from .models import layered_model
from .rtm import migrate_datasets, smooth_velocity
from .wavesim import simulate_survey

log = logging.getLogger(__name__)

__all__ = [
    "SampleSpec", "SamplePair", "SampleError", "sample_seed", "sample_id",
    "load_background", "plan_samples", "generate_sample", "write_sample",
    "generate_dataset", "eval_run", "degradation_locality",
]

MANIFEST = "manifest.json"


class SampleError(RuntimeError):
    """Failure inside one sample, tagged with the pipeline stage."""

    def __init__(self, stage, message):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
        self.detail = message


def sample_seed(master_seed, model_id, index) -> int:
    """Stable 64-bit seed from ``(master_seed, model_id, index)``."""
    key = f"{int(master_seed)}\x1f{model_id}\x1f{int(index)}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def sample_id(model_id, index) -> str:
    return f"{model_id}_s{index:03d}"


@dataclass(frozen=True)
class SampleSpec:
    sample_id: str
    velocity_model_id: str
    index: int
    rng_seed: int
    control: bool = False


@dataclass
class SamplePair:
    """Degraded image ``X``, clean image ``Y`` and the models behind them."""

    spec: SampleSpec
    X: SeismicImage
    Y: SeismicImage
    V_background: VelocityModel
    V_final: VelocityModel
    V_p: VpFactorField
    S: SaturationField
    mask: MaskGrid
    network: FractureNetwork
    meta: dict = field(default_factory=dict)


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, et, exc, tb):
        if exc is not None and not isinstance(exc, SampleError) and isinstance(exc, Exception):
            raise SampleError(self.name, f"{type(exc).__name__}: {exc}") from exc
        return False


def load_background(entry: ModelEntry, cfg: PipelineConfig) -> VelocityModel:
    if entry.layered is not None:
        g = cfg.grid
        return layered_model(g.nz, g.nx, g.dx, entry.layered)
    path = Path(entry.path)
    if not path.is_absolute():
        path = Path(cfg.base_dir) / path
    grid = read_grid(path)
    return VelocityModel(grid.values, grid.dx)


def plan_samples(cfg: PipelineConfig):
    """Every :class:`SampleSpec` of the dataset, grouped per model in config order."""
    ds = cfg.dataset
    out = []
    for m in cfg.model_entries():
        for i in range(ds.samples_per_model):
            out.append(SampleSpec(sample_id(m.id, i), m.id, i,
                                  sample_seed(ds.master_seed, m.id, i),
                                  control=i < ds.control_samples))
    return out


def split_models(cfg: PipelineConfig):
    """``(train_ids, test_ids)``; the two sets never share a model."""
    ids = [m.id for m in cfg.model_entries()]
    ds = cfg.dataset
    if ds.test_models:
        test = set(ds.test_models)
    else:
        n_test = ds.n_test_models
        if n_test is None:
            n_test = len(ids) // 4
        order = np.random.default_rng(ds.master_seed).permutation(len(ids))
        test = {ids[k] for k in order[:n_test]}
    return [i for i in ids if i not in test], [i for i in ids if i in test]


def _draw(rng, lohi):
    lo, hi = lohi
    return int(rng.integers(lo, hi + 1))


def fracture_params(cfg, spec):
    fr = cfg.fractures
    rng = np.random.default_rng([spec.rng_seed, 1])
    n_seeds = 0 if spec.control else _draw(rng, fr.n_seeds)
    length = _draw(rng, fr.max_length_cells)
    return fr.params(n_seeds, length, spec.rng_seed)


def degradation_locality(X, Y, mask):
    """Mean ``|X - Y|`` inside and outside ``mask``."""
    d = np.abs(np.asarray(X.values) - np.asarray(Y.values))
    m = np.asarray(mask.values)
    inside = float(d[m].mean()) if m.any() else 0.0
    outside = float(d[~m].mean()) if (~m).any() else 0.0
    return inside, outside


def generate_sample(background, spec: SampleSpec, cfg: PipelineConfig, shot_workers=1):
    """Build one :class:`SamplePair` from ``background``.

    Raises :class:`SampleError` naming the failing stage.
    """
    dx = background.dx
    gas_cfg = cfg.gas
    gas = gas_cfg.params()
    with _Stage("fractures"):
        fparams = fracture_params(cfg, spec)
        network = grow_fractures(background.shape, fparams)
    with _Stage("saturation"):
        S = saturation(network, gas, dx)
    with _Stage("velocity"):
        factor = vp_factor(S, gas)
        v_final = apply_chimney(background, factor, gas_cfg.cap)
    with _Stage("geometry"):
        geometry = cfg.geometry.acquisition(background.nx, dx)
        geometry.validate(background.nz, background.nx, dx)
        wavelet = cfg.geometry.wavelet()
    with _Stage("forward_clean"):
        clean = simulate_survey(background, geometry, wavelet, cfg.solver, shot_workers)
    with _Stage("forward_gas"):
        gas_data = simulate_survey(v_final, geometry, wavelet, cfg.solver, shot_workers)
    mig = cfg.migration
    with _Stage("migration"):
        v_mig = smooth_velocity(background, mig.sigma_cells)
        Y, X = migrate_datasets(v_mig, [clean, gas_data], geometry, wavelet, cfg.solver,
                                mig.imaging, mig.postfilter, shot_workers)
    with _Stage("mask"):
        mask = chimney_mask(S, gas.mask_threshold, gas_cfg.dilation_cells)
    inside, outside = degradation_locality(X, Y, mask)
    meta = {
        "sample_id": spec.sample_id,
        "velocity_model_id": spec.velocity_model_id,
        "index": spec.index,
        "rng_seed": spec.rng_seed,
        "control": spec.control,
        "code_version": __version__,
        "grid": {"nz": background.nz, "nx": background.nx, "dx_m": dx},
        "gas": {**gas.to_dict(), "cap": gas_cfg.cap, "dilation_cells": gas_cfg.dilation_cells,
                "water_density": gas_cfg.water_density, "gravity": gas_cfg.gravity},
        "fractures": {**asdict(fparams), "n_cells": len(network.cells)},
        "solver": asdict(cfg.solver),
        "geometry": asdict(cfg.geometry),
        "migration": asdict(cfg.migration),
        "stats": {
            "saturation_max": float(S.values.max()),
            "mask_cells": mask.count,
            "factor_min": float(factor.values.min()),
            "factor_max": float(factor.values.max()),
            "mean_abs_diff_inside_mask": inside,
            "mean_abs_diff_outside_mask": outside,
        },
    }
    return SamplePair(spec, X, Y, background, v_final, factor, S, mask, network, meta)


_ARTIFACTS = (
    ("clean", "Y", "image"), ("gas", "X", "image"), ("v_bg", "V_background", "velocity"),
    ("v_final", "V_final", "velocity"), ("vp_factor", "V_p", "factor"),
    ("saturation", "S", "saturation"),
)


def sample_dir(out, spec):
    return Path(out) / spec.velocity_model_id / spec.sample_id


def write_sample(pair: SamplePair, out, preview=True):
    d = sample_dir(out, pair.spec)
    d.mkdir(parents=True, exist_ok=True)
    for name, attr, kind in _ARTIFACTS:
        write_grid(getattr(pair, attr), d / f"{name}.f32", kind=kind)
    write_grid(pair.mask, d / "mask.u8", d / "mask.json", kind="mask")
    (d / "fractures.json").write_text(pair.network.to_json())
    (d / "meta.json").write_text(json.dumps(pair.meta, indent=2, sort_keys=True) + "\n")
    if preview:
        for name, attr, _ in _ARTIFACTS:
            write_image(getattr(pair, attr), d / "preview" / f"{name}.pgm")
        write_image(pair.mask, d / "preview" / "mask.pgm")
    return d


def _run_one(args):
    cfg, entry, spec, shot_workers = args
    try:
        with _Stage("load_model"):
            background = load_background(entry, cfg)
        pair = generate_sample(background, spec, cfg, shot_workers)
        with _Stage("write"):
            write_sample(pair, cfg.dataset.out, cfg.dataset.preview)
        return {"status": "ok", "stats": pair.meta["stats"]}
    except SampleError as exc:
        return {"status": "failed", "stage": exc.stage, "error": exc.detail}


def _entry(spec, cfg, split):
    ds = cfg.dataset
    return {
        "sample_id": spec.sample_id,
        "velocity_model_id": spec.velocity_model_id,
        "index": spec.index,
        "rng_seed": spec.rng_seed,
        "control": spec.control,
        "split": split,
        "path": None if ds.dry_run else f"{spec.velocity_model_id}/{spec.sample_id}",
    }


def generate_dataset(cfg: PipelineConfig, progress=None):
    """Generate every sample of ``cfg`` and write ``manifest.json``.

    A failed sample is recorded in the manifest with its stage and error;
    the remaining samples still run. With ``dataset.dry_run`` only the
    manifest is written.

    Returns the manifest dict.
    """
    ds = cfg.dataset
    out = Path(ds.out)
    specs = plan_samples(cfg)
    train, test = split_models(cfg)
    split_of = {m: "train" for m in train} | {m: "test" for m in test}
    entries = {m.id: m for m in cfg.model_entries()}
    rows = [_entry(s, cfg, split_of[s.velocity_model_id]) for s in specs]

    if not ds.dry_run:
        shot_workers = max(1, ds.workers // max(len(specs), 1))
        jobs = [(cfg, entries[s.velocity_model_id], s, shot_workers) for s in specs]
        if ds.workers > 1 and len(jobs) > 1:
            with ProcessPoolExecutor(max_workers=min(ds.workers, len(jobs))) as pool:
                results = []
                for k, r in enumerate(pool.map(_run_one, jobs)):
                    results.append(r)
                    if progress:
                        progress(k + 1, len(jobs), specs[k].sample_id, r["status"])
        else:
            results = []
            for k, job in enumerate(jobs):
                results.append(_run_one(job))
                if progress:
                    progress(k + 1, len(jobs), specs[k].sample_id, results[-1]["status"])
        for row, r in zip(rows, results):
            row["status"] = r["status"]
            if r["status"] == "ok":
                row["stats"] = r["stats"]
            else:
                row["stage"], row["error"] = r["stage"], r["error"]
                row["path"] = None
    else:
        for row in rows:
            row["status"] = "planned"

    manifest = {
        "code_version": __version__,
        "config_hash": cfg.hash(),
        "master_seed": ds.master_seed,
        "dry_run": ds.dry_run,
        "n_samples": len(rows),
        "counts": {
            "train": sum(r["split"] == "train" for r in rows),
            "test": sum(r["split"] == "test" for r in rows),
            "failed": sum(r["status"] == "failed" for r in rows),
        },
        "splits": {"train_models": train, "test_models": test},
        "config": cfg.to_dict() | {"dataset": {k: v for k, v in asdict(ds).items()
                                               if k not in ("out", "workers", "dry_run")}},
        "samples": rows,
    }
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True,
                                               default=str) + "\n")
    except OSError as exc:
        raise GridIOError(f"failed writing manifest to {out}: {exc}") from exc
    return manifest


def _find_prediction(pred_dir, row, mode, pred_name):
    pred_dir = Path(pred_dir)
    ext = ".u8" if mode == "detection" else ".f32"
    cands = [pred_dir / f"{row['sample_id']}{ext}"]
    if pred_name:
        cands.insert(0, pred_dir / row["velocity_model_id"] / row["sample_id"] / pred_name)
    for c in cands:
        if c.exists():
            return c
    return None


def eval_run(manifest_path, predictions_dir, mode="enhancement", region="full",
             pred_name=None, split=None):
    """Score predictions against the ground truth listed in a manifest.

    Predictions are looked up as ``<predictions_dir>/<sample_id>.f32``
    (``.u8`` masks in detection mode) or, with ``pred_name``, as
    ``<predictions_dir>/<model_id>/<sample_id>/<pred_name>``. Missing
    predictions and per-sample errors are listed in the report.
    """
    if mode not in ("detection", "enhancement"):
        raise ValueError("mode must be 'detection' or 'enhancement'")
    if region not in ("full", "mask"):
        raise ValueError("region must be 'full' or 'mask'")
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text())
    root = manifest_path.parent
    per, missing, errors = [], [], []
    for row in manifest["samples"]:
        if row.get("status") != "ok" or (split and row["split"] != split):
            continue
        sid = row["sample_id"]
        p = _find_prediction(predictions_dir, row, mode, pred_name)
        if p is None:
            missing.append(sid)
            continue
        d = root / row["path"]
        try:
            pred = read_grid(p)
            if mode == "detection":
                scores = seg_scores(pred, read_grid(d / "mask.u8", d / "mask.json")).to_dict()
            else:
                m = read_grid(d / "mask.u8", d / "mask.json") if region == "mask" else None
                if m is not None and m.count == 0:
                    errors.append({"sample_id": sid, "error": "empty chimney mask"})
                    continue
                scores = enh_scores(pred, read_grid(d / "clean.f32"), m).to_dict()
        except (ValueError, OSError) as exc:
            errors.append({"sample_id": sid, "error": str(exc)})
            continue
        per.append({"sample_id": sid, **scores})
    metric_rows = [{k: v for k, v in r.items() if k != "sample_id"} for r in per]
    return {
        "mode": mode,
        "region": region,
        "dynamic_range": "truth",
        "config_hash": manifest.get("config_hash"),
        "n_scored": len(per),
        "aggregate": aggregate(metric_rows),
        "samples": per,
        "missing": missing,
        "errors": errors,
    }
