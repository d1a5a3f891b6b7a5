"""Acceptance criteria, one test each.

Every test records a single ``PASS``/``FAIL`` line with the measured
values and thresholds; the lines are printed as a block at the end of the
pytest run (and immediately when run with ``-s``).
"""
import filecmp
import time

import numpy as np
import pytest

from chimneysim import (AcquisitionGeometry, SolverConfig, SourceWavelet, VelocityModel,
                        propagate)
from chimneysim.chimney import (FractureNetwork, GasParams, mix_density, p_velocity,
                                reuss_bulk, saturation, saturation_kernel, vp_factor)
from chimneysim.config import load_config
from chimneysim.metrics import DB_CAP, seg_scores
from chimneysim.pipeline import eval_run, generate_dataset
from chimneysim.rtm import born_forward, data_dot, migrate, model_dot, smooth_velocity
from chimneysim.wavesim import ShotGather
from conftest import ACCEPTANCE, FIXTURES
from oracles import first_break, green2d_trace, ncc


def record(n, name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  AC{n:02d} {name}: {detail}"
    ACCEPTANCE[n] = line
    print(line)
    assert ok, line


# 1

def test_ac01_analytic_oracle():
    t0 = time.perf_counter()
    c, dx, rdt, nt, n = 2000.0, 4.0, 0.004, 150, 250
    r = 400.0
    m = VelocityModel(np.full((n, n), c), dx)
    mid = (n // 2) * dx
    geo = AcquisitionGeometry([[mid, mid - r / 2]], [[mid, mid + r / 2]], rdt, nt)
    w = SourceWavelet(15.0, rdt, nt)
    trace = propagate(m, geo, 0, w, SolverConfig(boundary_width=50)).traces[0]
    ref = green2d_trace(w, r, c, np.arange(nt) * rdt)
    elapsed = time.perf_counter() - t0
    score = ncc(trace, ref)
    # onset of the recorded pulse minus onset of the source pulse = travel time
    lag = first_break(trace, rdt) - first_break(w.samples, rdt)
    steps = abs(lag - r / c) / rdt
    ok = score > 0.99 and steps <= 2 and elapsed < 30
    record(1, "analytic 2D Green's function", ok,
           f"ncc={score:.5f} (>0.99), first break off by {steps:.1f} steps (<=2), "
           f"{elapsed:.1f}s (<30s)")


# 2

def test_ac02_dot_test():
    t0 = time.perf_counter()
    dx, rdt, nt = 10.0, 0.004, 120
    rng0 = np.random.default_rng(0)
    v = 2000.0 + 300.0 * rng0.random((64, 64))
    m = smooth_velocity(VelocityModel(v, dx), 3)
    geo = AcquisitionGeometry.surface_line(64, dx, 2, 300.0, 30, 20.0, rdt, nt,
                                           source_depth=30.0, receiver_depth=30.0)
    w = SourceWavelet(15.0, rdt, nt)
    cfg = SolverConfig(boundary_width=20)
    errs = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        dm = rng.standard_normal((64, 64)) * 1e-8
        d = [ShotGather(i, rng.standard_normal((geo.n_receivers, nt)), rdt) for i in range(2)]
        lhs = data_dot(born_forward(m, dm, geo, w, cfg), d)
        img = migrate(m, d, geo, w, cfg, imaging="adjoint")
        rhs = model_dot(img, img.with_values(dm))
        errs.append(abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
    elapsed = time.perf_counter() - t0
    worst = max(errs)
    ok = worst < 1e-4 and elapsed < 60
    record(2, "Born / adjoint-migration dot test", ok,
           f"max rel err over 5 seeds={worst:.2e} (<1e-4), {elapsed:.1f}s (<60s)")


# 3

def test_ac03_reciprocity():
    dx, rdt, nt = 4.0, 0.004, 200
    m = VelocityModel(np.full((80, 90), 2000.0), dx)
    a, b = np.array([[40.0, 60.0]]), np.array([[200.0, 300.0]])
    w = SourceWavelet(15.0, rdt, nt)
    ab = propagate(m, AcquisitionGeometry(a, b, rdt, nt), 0, w).traces[0]
    ba = propagate(m, AcquisitionGeometry(b, a, rdt, nt), 0, w).traces[0]
    err = np.linalg.norm(ab - ba) / np.linalg.norm(ab)
    record(3, "source/receiver reciprocity", err < 1e-5, f"relative L2={err:.2e} (<1e-5)")


# 4

def test_ac04_boundary_absorption():
    dx, rdt, nt, n = 10.0, 0.004, 250, 100
    m = VelocityModel(np.full((n, n), 2000.0), dx)
    mid = (n // 2) * dx
    geo = AcquisitionGeometry([[mid, mid]], [[mid, mid]], rdt, nt)
    g = propagate(m, geo, 0, SourceWavelet(15.0, rdt, nt), SolverConfig(boundary_width=50),
                  snapshots="record")
    energy = np.sum(g.snapshots ** 2, axis=(1, 2))
    frac = energy[-1] / energy.max()
    record(4, "sponge absorption", frac < 0.01,
           f"final/peak interior energy={frac:.2e} (<1e-2)")


# 5

def _conv_error(dx, order, dt_internal=None):
    c, rdt, nt, size = 2000.0, 0.004, 100, 800.0
    n = int(size / dx) + 1
    m = VelocityModel(np.full((n, n), c), dx)
    geo = AcquisitionGeometry([[400.0, 300.0]], [[400.0, 500.0]], rdt, nt)
    w = SourceWavelet(15.0, rdt, nt)
    cfg = SolverConfig(spatial_order=order, boundary_width=30, cfl_safety=0.7,
                       dt_internal=dt_internal)
    s = propagate(m, geo, 0, w, cfg).traces[0]
    ref = green2d_trace(w, 200.0, c, np.arange(nt) * rdt)
    return np.linalg.norm(s - ref) / np.linalg.norm(ref)


def test_ac05_convergence():
    # 2nd-order stencil, dt re-derived from the stability bound on each grid
    e1, e2 = _conv_error(10.0, 2), _conv_error(5.0, 2)
    p2 = np.log2(e1 / e2)
    # 4th-order stencil, time step held far below both bounds so the
    # spatial error dominates
    f1, f2 = _conv_error(20.0, 4, 0.004 / 32), _conv_error(10.0, 4, 0.004 / 32)
    p4 = np.log2(f1 / f2)
    # not gated: with both dx and dt refined, the order-4 stencil's spatial
    # and temporal dispersion partly cancel on the coarse grid, so the
    # pairwise ratio understates its accuracy
    g1, g2 = _conv_error(10.0, 4), _conv_error(5.0, 4)
    ok = p2 >= 1.7 and p4 >= 1.7
    record(5, "spatial convergence (dx halving)", ok,
           f"order-2 stencil with CFL dt: {e1:.4f}->{e2:.4f}, order {p2:.2f}; "
           f"order-4 stencil at fixed dt: {f1:.4f}->{f2:.4f}, order {p4:.2f} (>=1.7); "
           f"info, order-4 with CFL dt: {g1:.4f}->{g2:.4f}, order {np.log2(g1 / g2):.2f}")


# 6

def test_ac06_rock_physics():
    K_g, K_s, G, rho = 8e8, 0.045e9, 3211.0, 1900.0
    checks = []

    def rel(a, b):
        return abs(a - b) / abs(b)

    checks.append(rel(float(reuss_bulk(0.0, K_g, K_s)), K_s))
    checks.append(rel(float(reuss_bulk(1.0, K_g, K_s)), K_g))
    checks.append(rel(float(reuss_bulk(0.5, K_g, K_s)), 1.0 / (0.5 / K_s + 0.5 / K_g)))
    checks.append(rel(float(mix_density(0.0, 100.0, 1900.0)), 1900.0))
    checks.append(rel(float(mix_density(1.0, 100.0, 1900.0)), 100.0))
    checks.append(rel(float(mix_density(0.3, 100.0, 1900.0)), 1360.0))
    checks.append(rel(float(mix_density(0.7, rho, rho)), rho))
    checks.append(rel(float(p_velocity(K_s, G, rho)), ((K_s + 4 * G / 3) / rho) ** 0.5))
    checks.append(rel(float(p_velocity(5.0, 0.0, 5.0)), 1.0))
    f = vp_factor(np.array([[0.0, 1.0]]), GasParams()).values
    checks.append(rel(float(f[0, 0]), 1.0))
    checks.append(rel(float(f[0, 1]), ((K_g + 4 * G / 3) / (K_s + 4 * G / 3)) ** 0.5))
    worst = max(checks)
    near = (abs(float(reuss_bulk(0.5, K_g, K_s)) - 8.521e7) < 5e3
            and abs(float(p_velocity(K_s, G, rho)) - 153.9) < 0.05
            and abs(float(f[0, 1]) - 4.217) < 1e-3)
    record(6, "rock physics closed forms", worst <= 1e-12 and near,
           f"{len(checks)} checks, max rel err={worst:.1e} (<=1e-12); "
           f"K(0.5)={float(reuss_bulk(0.5, K_g, K_s)):.4e}, Vp(0)={float(p_velocity(K_s, G, rho)):.2f},"
           f" factor(1)={float(f[0, 1]):.4f}")


# 7

def test_ac07_saturation_properties():
    g = GasParams()
    dx = 0.1
    R = g.erfc_scale
    k1 = float(saturation_kernel(R, g, dx)) / (dx * dx * g.H0 / (8 * np.pi * g.D * R))
    shape = (32, 32)
    a = FractureNetwork(shape, [[(10, 10), (9, 10), (8, 11)]])
    b = FractureNetwork(shape, [[(20, 25), (19, 25)]])
    soft = GasParams(diffusion_length=12.0, H0=1e-4 / (8 * np.pi * 1e-12))
    sa, sb, sab = (saturation(n, soft, 4.0, clamp=False).values for n in (a, b, a.union(b)))
    sup = np.abs(sab - (sa + sb)).max() / np.abs(sab).max()
    clamped = saturation(a.union(b), GasParams(diffusion_length=40.0), 4.0).values
    clamp_ok = clamped.min() >= 0 and clamped.max() <= 1
    hard = saturation(a.union(b), g, 4.0, clamp=False).values
    far = hard[~a.union(b).indicator].max()
    decay = max(float(saturation_kernel(x * g.erfc_scale, GasParams(H0=1.0), 0.01))
                / (1e-4 * 1.0 / (8 * np.pi * g.D * x * g.erfc_scale)) for x in (6, 8, 12))
    ok = (abs(k1 - 0.15730) < 1e-5 and sup < 1e-14 and clamp_ok
          and far < len(a.union(b).cells) * 1e-16 and decay < 1e-16)
    record(7, "saturation kernel", ok,
           f"erfc(1) factor={k1:.6f} (0.15730+-1e-5), superposition err={sup:.1e}, "
           f"clamp in [0,1]={clamp_ok}, erfc factor at >=6 scales={decay:.1e} (<1e-16), "
           f"max S off-fracture={far:.1e} (<{len(a.union(b).cells)}e-16)")


# 8

def test_ac08_point_scatterer():
    t0 = time.perf_counter()
    dx, rdt, nt, n = 10.0, 0.004, 180, 80
    m = VelocityModel(np.full((n, n), 2000.0), dx)
    geo = AcquisitionGeometry.surface_line(n, dx, 5, 120.0, 60, 10.0, rdt, nt,
                                           source_depth=20.0, receiver_depth=20.0)
    w = SourceWavelet(15.0, rdt, nt)
    cfg = SolverConfig(boundary_width=40)
    true = (50, 43)
    dm = np.zeros((n, n))
    dm[true] = 1e-8
    d = born_forward(m, dm, geo, w, cfg)
    parts = []
    ok = True
    for imaging in ("zero_lag", "adjoint"):
        img = np.abs(migrate(m, d, geo, w, cfg, imaging).values)
        peak = np.unravel_index(np.argmax(img), img.shape)
        off = max(abs(peak[0] - true[0]), abs(peak[1] - true[1]))
        ratio = img.max() / np.sqrt(np.mean(img ** 2))
        ok &= off <= 2 and ratio >= 5
        parts.append(f"{imaging}: argmax off {off} cells (<=2), peak/RMS {ratio:.1f} (>=5)")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 120
    record(8, "point-scatterer localization", bool(ok),
           "; ".join(parts) + f"; {elapsed:.1f}s (<120s)")


# 9, 11, 12 share two desk-fixture runs

@pytest.fixture(scope="module")
def desk_runs(tmp_path_factory):
    base = load_config(FIXTURES / "desk.toml")
    runs = {}
    for workers in (4, 1):
        out = tmp_path_factory.mktemp(f"desk_w{workers}")
        cfg = base.with_overrides(workers=workers, out=str(out))
        t0 = time.perf_counter()
        manifest = generate_dataset(cfg)
        runs[workers] = (out, manifest, time.perf_counter() - t0)
    return runs


@pytest.mark.slow
def test_ac09_desk_dataset(desk_runs):
    out, manifest, elapsed = desk_runs[4]
    rows = manifest["samples"]
    ok = len(rows) == 10 and manifest["counts"]["failed"] == 0 and elapsed < 1200
    controls_equal = True
    ratios = []
    for r in rows:
        if r["status"] != "ok":
            continue
        sd = out / r["path"]
        if r["control"]:
            controls_equal &= (sd / "gas.f32").read_bytes() == (sd / "clean.f32").read_bytes()
        elif r["stats"]["mask_cells"]:
            s = r["stats"]
            ratios.append(s["mean_abs_diff_inside_mask"] / s["mean_abs_diff_outside_mask"])
    ok = ok and controls_equal and bool(ratios) and min(ratios) >= 2
    n_controls = sum(r["control"] for r in rows)
    record(9, "desk dataset end to end", ok,
           f"{len(rows)} samples, {manifest['counts']['failed']} failed, {elapsed:.0f}s on 4 "
           f"workers (<1200s); {n_controls} empty-network samples X==Y bitwise: "
           f"{controls_equal}; inside/outside |X-Y| ratio min {min(ratios):.2f} over "
           f"{len(ratios)} samples (>=2)")


def test_ac10_fullscale_manifest_counts(tmp_path):
    cfg = load_config(FIXTURES / "fullscale_manifest.toml").with_overrides(out=str(tmp_path))
    m = generate_dataset(cfg)
    rows = m["samples"]
    train = {r["velocity_model_id"] for r in rows if r["split"] == "train"}
    test = {r["velocity_model_id"] for r in rows if r["split"] == "test"}
    ok = (len(rows) == 400 and m["counts"]["train"] == 300 and m["counts"]["test"] == 100
          and not train & test and len(train) == 15 and len(test) == 5)
    record(10, "full-scale manifest counts", ok,
           f"{len(rows)} entries (400), {m['counts']['train']} train (300), "
           f"{m['counts']['test']} test (100), {len(train)}/{len(test)} models, "
           f"overlap {len(train & test)} (0)")


@pytest.mark.slow
def test_ac11_metric_identities(desk_runs):
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(1000):
        shape = tuple(rng.integers(1, 20, 2))
        p = rng.random(shape) < rng.random()
        t = rng.random(shape) < rng.random()
        s = seg_scores(p, t)
        worst = max(worst, abs(s.dice - 2 * s.iou / (1 + s.iou)))
    out, _, _ = desk_runs[4]
    enh = eval_run(out / "manifest.json", out, "enhancement", pred_name="clean.f32")["aggregate"]
    det = eval_run(out / "manifest.json", out, "detection", pred_name="mask.u8")["aggregate"]
    perfect = (det["iou"]["mean"] == 1 and det["dice"]["mean"] == 1
               and abs(enh["ssim"]["mean"] - 1) < 1e-12 and abs(enh["corr"]["mean"] - 1) < 1e-12
               and enh["psnr"]["mean"] == DB_CAP and enh["snr"]["mean"] == DB_CAP)
    record(11, "metric identities", worst < 1e-12 and perfect,
           f"max |dice - 2iou/(1+iou)| over 1000 pairs={worst:.1e}; identity runs: "
           f"iou={det['iou']['mean']}, dice={det['dice']['mean']}, "
           f"ssim={enh['ssim']['mean']:.12f}, corr={enh['corr']['mean']:.12f}, "
           f"psnr={enh['psnr']['mean']}, snr={enh['snr']['mean']} (cap {DB_CAP:g})")


@pytest.mark.slow
def test_ac12_determinism(desk_runs):
    (a, _, _), (b, _, _) = desk_runs[4], desk_runs[1]
    fa = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    fb = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    diff = [str(p) for p in fa if not filecmp.cmp(a / p, b / p, shallow=False)] \
        if fa == fb else ["<file lists differ>"]
    record(12, "determinism across worker counts", not diff,
           f"{len(fa)} files compared between 4-worker and 1-worker runs, "
           f"{len(diff)} differ (0)")
