"""Born modeling, receiver-side back-propagation and reverse-time migration.

Inner products used by the adjoint pair (``born_forward`` and
``migrate(..., imaging="adjoint")``):

* data: ``record_dt * sum(traces_a * traces_b)`` over receivers and steps;
* model: ``dx**2 * sum(a * b)`` over interior cells.

Back-propagated traces are injected at record steps only, each weighted by
the number of solver substeps ``q``, which is how a sample held for one
record interval enters a solver running at ``record_dt / q``.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import ndimage

from .grid import SeismicImage, SlownessPerturbation
from .wavesim import (InstabilityError, ShotGather, SolverConfig, WaveSolver,
                      _check_inputs)

__all__ = [
    "smooth_velocity", "born_forward", "backpropagate", "image_zero_lag",
    "image_adjoint", "migrate", "migrate_datasets", "data_dot", "model_dot",
    "IMAGING", "POSTFILTERS",
]

IMAGING = ("zero_lag", "adjoint")
POSTFILTERS = ("none", "laplacian")


def smooth_velocity(model, sigma_cells):
    """Gaussian-blurred copy of ``model`` (reflect padding, kernel cut at 4 sigma).

    The result is clipped to the input range so it stays a convex
    combination of input values despite round-off.
    """
    if sigma_cells < 0:
        raise ValueError("sigma_cells must be >= 0")
    if sigma_cells == 0:
        return model
    v = model.values
    out = ndimage.gaussian_filter(v, sigma_cells, mode="reflect", truncate=4.0)
    return model.with_values(np.clip(out, v.min(), v.max()))


def second_derivative(snaps, dt):
    """Centered second time difference along axis 0.

    The first level uses the zero field before ``tau = 0`` (the solver's
    initial condition); the last level uses a one-sided difference.
    """
    snaps = np.asarray(snaps)
    out = np.empty_like(snaps)
    n = len(snaps)
    if n < 3:
        raise ValueError("need at least three time levels")
    out[1:-1] = snaps[2:] - 2.0 * snaps[1:-1] + snaps[:-2]
    out[0] = snaps[1] - 2.0 * snaps[0]
    out[-1] = snaps[-1] - 2.0 * snaps[-2] + snaps[-3]
    out /= dt * dt
    return out


def _check_pair(source_snapshots, receiver_snapshots):
    ps = np.asarray(source_snapshots)
    pr = np.asarray(receiver_snapshots)
    if ps.shape != pr.shape:
        raise ValueError(f"snapshot shapes differ: {ps.shape} vs {pr.shape}")
    return ps, pr


def image_zero_lag(source_snapshots, receiver_snapshots, record_dt, dx=1.0):
    """Zero-lag cross-correlation ``sum_k p_s(k) p_r(k) dt``."""
    ps, pr = _check_pair(source_snapshots, receiver_snapshots)
    return SeismicImage(np.einsum("kij,kij->ij", ps, pr) * record_dt, dx)


def image_adjoint(source_snapshots, receiver_snapshots, record_dt, dx=1.0):
    """Born-adjoint imaging ``-sum_k d2p_s/dt2(k) p_r(k) dt``."""
    ps, pr = _check_pair(source_snapshots, receiver_snapshots)
    acc = second_derivative(ps, record_dt)
    return SeismicImage(-np.einsum("kij,kij->ij", acc, pr) * record_dt, dx)


def data_dot(gathers_a, gathers_b):
    return sum(float(np.sum(a.traces * b.traces)) * a.record_dt
               for a, b in zip(gathers_a, gathers_b, strict=True))


def model_dot(a, b):
    return float(np.sum(np.asarray(a.values) * np.asarray(b.values))) * a.dx ** 2


def born_forward(background, dm, geometry, wavelet, config=None, workers=1):
    """Scattered data for a squared-slowness perturbation ``dm``.

    The incident field runs one step ahead of the scattered field so the
    Born source ``-dm * d2p_s/dt2`` is centered at the scattered field's
    current level.
    """
    config = config or SolverConfig()
    _check_inputs(background, geometry, wavelet)
    dmv = np.asarray(getattr(dm, "values", dm), dtype=np.float64)
    if dmv.shape != background.shape:
        raise ValueError(f"perturbation shape {dmv.shape} != background {background.shape}")
    solver = WaveSolver(background, geometry.record_dt, config)
    rec = solver.cells(geometry.receiver_positions)
    nt, q, dt = geometry.n_steps, solver.q, solver.dt
    n_int = solver.n_internal(nt)
    w = wavelet.at(np.arange(n_int) * dt)
    inv_dt2 = 1.0 / (dt * dt)

    def one(i):
        src = solver.cells(geometry.source_positions[[i]])
        u_prev, u, u_next = solver.zeros(), solver.zeros(), solver.zeros()
        s_prev, s, s_next = solver.zeros(), solver.zeros(), solver.zeros()
        inner = solver.inner
        traces = np.zeros((len(rec), nt))
        for n in range(n_int - 1):
            solver.advance(u, u_prev, u_next)
            solver.add_points(u_next, src, w[n])
            born = -dmv * (u_next[inner] - 2.0 * u[inner] + u_prev[inner]) * inv_dt2
            solver.advance(s, s_prev, s_next)
            solver.add_field(s_next, born)
            u_prev, u, u_next = u, u_next, u_prev
            s_prev, s, s_next = s, s_next, s_prev
            m = n + 1
            if m % q == 0:
                if not np.isfinite(s).all():
                    raise InstabilityError(f"shot {i}: non-finite scattered field at step {m}", m, i)
                traces[:, m // q] = s.reshape(-1)[rec]
        return ShotGather(i, traces, geometry.record_dt)

    return _map(one, range(geometry.n_sources), workers)


def _reverse_injector(solver, rec, traces):
    q, nt = solver.q, traces.shape[1]
    weighted = q * traces

    def inject(n, out):
        if n % q == 0:
            solver.add_points(out, rec, weighted[:, nt - 1 - n // q])

    return inject


def _backprop_snapshots(solver, rec, traces, stride):
    inject = _reverse_injector(solver, rec, traces)
    _, snaps = solver.run(inject, traces.shape[1], snapshot_stride=stride)
    return snaps[::-1]


def backpropagate(background, gathers, geometry, wavelet_unused=None, config=None,
                  cadence="record"):
    """Receiver wavefield of each gather, indexed in forward time.

    Each trace is time-reversed and injected at its receiver cell; the
    returned snapshots are re-reversed so entry ``k`` belongs to
    ``tau = k * record_dt`` (or ``k * dt_internal`` for ``cadence="internal"``).

    Returns a list with one ``(n_snapshots, nz, nx)`` array per gather.
    """
    config = config or SolverConfig()
    geometry.validate(background.nz, background.nx, background.dx)
    solver = WaveSolver(background, geometry.record_dt, config)
    rec = solver.cells(geometry.receiver_positions)
    stride = 1 if cadence == "internal" else solver.q
    out = []
    for g in gathers:
        if g.traces.shape != (geometry.n_receivers, geometry.n_steps):
            raise ValueError(
                f"gather {g.source_index} has shape {g.traces.shape}, geometry expects "
                f"{(geometry.n_receivers, geometry.n_steps)}")
        out.append(_backprop_snapshots(solver, rec, g.traces, stride))
    return out


def _laplacian_filter(values):
    return -ndimage.laplace(values, mode="nearest")


def _map(fn, items, workers):
    items = list(items)
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def migrate_datasets(migration_velocity, datasets, geometry, wavelet, config=None,
                     imaging="zero_lag", postfilter="none", workers=1):
    """Migrate several data sets recorded with the same geometry.

    The source wavefield of each shot is modeled once and shared by every
    data set, which halves the work when imaging clean and degraded data
    through the same background. Returns one image per data set.
    """
    if imaging not in IMAGING:
        raise ValueError(f"imaging must be one of {IMAGING}")
    if postfilter not in POSTFILTERS:
        raise ValueError(f"postfilter must be one of {POSTFILTERS}")
    config = config or SolverConfig()
    _check_inputs(migration_velocity, geometry, wavelet)
    datasets = [list(d) for d in datasets]
    for d in datasets:
        if len(d) != geometry.n_sources:
            raise ValueError(f"expected {geometry.n_sources} gathers, got {len(d)}")
    solver = WaveSolver(migration_velocity, geometry.record_dt, config)
    rec = solver.cells(geometry.receiver_positions)
    internal = imaging == "adjoint"
    stride = 1 if internal else solver.q
    dt = solver.dt if internal else geometry.record_dt

    def one(i):
        _, ps = solver.forward(wavelet, geometry.source_positions[[i]], None,
                               geometry.n_steps, stride)
        if internal:
            kernel = second_derivative(ps, dt)
            kernel *= -dt
        else:
            kernel = ps
            kernel *= dt
        images = []
        for d in datasets:
            pr = _backprop_snapshots(solver, rec, d[i].traces, stride)
            images.append(np.einsum("kij,kij->ij", kernel, pr))
        return images

    per_shot = _map(one, range(geometry.n_sources), workers)
    stacks = []
    for j in range(len(datasets)):
        img = np.zeros(migration_velocity.shape)
        for shot in per_shot:
            img += shot[j]
        if postfilter == "laplacian":
            img = _laplacian_filter(img)
        stacks.append(SeismicImage(img, migration_velocity.dx))
    return stacks


def migrate(migration_velocity, gathers, geometry, wavelet, config=None,
            imaging="zero_lag", postfilter="none", workers=1):
    """Reverse-time migration of ``gathers`` stacked over shots.

    Parameters
    ----------
    migration_velocity : VelocityModel
        Smooth background; apply :func:`smooth_velocity` beforehand.
    imaging : {"zero_lag", "adjoint"}
        ``"zero_lag"`` correlates record-cadence snapshots. ``"adjoint"``
        uses ``-d2p_s/dt2`` at every solver step and is the exact adjoint
        of :func:`born_forward` under the inner products in the module
        docstring.
    postfilter : {"none", "laplacian"}
        Optional negated 5-point Laplacian to suppress low-wavenumber
        backscatter.
    """
    return migrate_datasets(migration_velocity, [gathers], geometry, wavelet, config,
                            imaging, postfilter, workers)[0]


def perturbation_from_velocities(v_true, v_background):
    """Squared-slowness difference ``1/v_true^2 - 1/v_background^2``."""
    dm = 1.0 / np.asarray(v_true.values) ** 2 - 1.0 / np.asarray(v_background.values) ** 2
    return SlownessPerturbation(dm, v_background.dx)
