"""Finite-difference modeling of the 2D constant-density acoustic wave equation.

The solver integrates ``(1/v^2) p_tt - lap(p) = s`` with a second-order
leapfrog in time and a 2nd- or 4th-order centered Laplacian in space,
surrounded by an exponential sponge on all four sides. Recording happens
at ``record_dt``; internally the solver substeps at the largest stable
``dt = record_dt / q`` for integer ``q``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .grid import Grid2D, VelocityModel

__all__ = [
    "ricker", "SourceWavelet", "AcquisitionGeometry", "ShotGather", "SolverConfig",
    "WaveSolver", "GeometryError", "InstabilityError", "stable_dt", "cfl_constant",
    "propagate", "simulate_survey",
]


class GeometryError(ValueError):
    pass


class InstabilityError(RuntimeError):
    """Non-finite wavefield during time stepping."""

    def __init__(self, message, step, source_index=None):
        super().__init__(message)
        self.step = step
        self.source_index = source_index


def ricker(peak_frequency, delay, tau):
    """Ricker wavelet ``(1 - 2 pi^2 f^2 u^2) exp(-pi^2 f^2 u^2)``, ``u = tau - delay``."""
    if not peak_frequency > 0:
        raise ValueError("peak frequency must be positive")
    a = (np.pi * peak_frequency * (np.asarray(tau, dtype=np.float64) - delay)) ** 2
    return (1.0 - 2.0 * a) * np.exp(-a)


@dataclass(frozen=True)
class SourceWavelet:
    """Ricker source sampled at the recording interval.

    ``delay`` defaults to ``1.5 / peak_frequency``, which puts the onset
    of the wavelet below 1e-8 of its peak at ``tau = 0``.
    """

    peak_frequency: float = 15.0
    dt: float = 0.004
    n_samples: int = 511
    delay: float | None = None
    amplitude: float = 1.0

    def __post_init__(self):
        if self.delay is None:
            object.__setattr__(self, "delay", 1.5 / self.peak_frequency)

    def at(self, tau):
        return self.amplitude * ricker(self.peak_frequency, self.delay, tau)

    @property
    def times(self):
        return np.arange(self.n_samples) * self.dt

    @property
    def samples(self):
        return self.at(self.times)

    def scaled(self, factor):
        return SourceWavelet(self.peak_frequency, self.dt, self.n_samples,
                             self.delay, self.amplitude * factor)


@dataclass
class AcquisitionGeometry:
    """Source and receiver positions ``(z_m, x_m)`` plus the recording grid."""

    source_positions: np.ndarray
    receiver_positions: np.ndarray
    record_dt: float = 0.004
    n_steps: int = 511

    def __post_init__(self):
        self.source_positions = np.atleast_2d(np.asarray(self.source_positions, dtype=np.float64))
        self.receiver_positions = np.atleast_2d(np.asarray(self.receiver_positions, dtype=np.float64))
        for name, pos in (("source", self.source_positions), ("receiver", self.receiver_positions)):
            if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 1:
                raise GeometryError(f"{name} positions must be a non-empty (n, 2) array of (z, x)")
        if not self.record_dt > 0:
            raise GeometryError("record_dt must be positive")
        if self.n_steps < 1:
            raise GeometryError("n_steps must be >= 1")

    @property
    def n_sources(self) -> int:
        return len(self.source_positions)

    @property
    def n_receivers(self) -> int:
        return len(self.receiver_positions)

    @classmethod
    def surface_line(cls, nx, dx, n_sources, source_spacing, n_receivers, receiver_spacing,
                     record_dt=0.004, n_steps=511, source_depth=0.0, receiver_depth=0.0,
                     source_x0=None, receiver_x0=None):
        """Evenly spaced sources and receivers, centered laterally unless ``*_x0`` is given."""
        width = (nx - 1) * dx
        if source_x0 is None:
            source_x0 = 0.5 * (width - (n_sources - 1) * source_spacing)
        if receiver_x0 is None:
            receiver_x0 = 0.5 * (width - (n_receivers - 1) * receiver_spacing)
        sx = source_x0 + source_spacing * np.arange(n_sources)
        rx = receiver_x0 + receiver_spacing * np.arange(n_receivers)
        src = np.column_stack([np.full(n_sources, source_depth), sx])
        rec = np.column_stack([np.full(n_receivers, receiver_depth), rx])
        return cls(src, rec, record_dt, n_steps)

    def subset(self, source_indices):
        return AcquisitionGeometry(self.source_positions[list(source_indices)],
                                   self.receiver_positions, self.record_dt, self.n_steps)

    def validate(self, nz, nx, dx):
        zmax, xmax = (nz - 1) * dx, (nx - 1) * dx
        tol = 1e-9 * max(zmax, xmax, dx)
        for name, pos in (("source", self.source_positions), ("receiver", self.receiver_positions)):
            outside = ((pos[:, 0] < -tol) | (pos[:, 0] > zmax + tol)
                       | (pos[:, 1] < -tol) | (pos[:, 1] > xmax + tol))
            if outside.any():
                k = int(np.flatnonzero(outside)[0])
                raise GeometryError(
                    f"{name} {k} at (z={pos[k, 0]:g} m, x={pos[k, 1]:g} m) lies outside "
                    f"the grid extent [0, {zmax:g}] x [0, {xmax:g}] m")


@dataclass
class ShotGather:
    """Recorded pressure, ``traces[receiver, time_step]``.

    ``snapshots`` holds interior wavefields ``(n_snapshots, nz, nx)``
    when they were requested.
    """

    source_index: int
    traces: np.ndarray
    record_dt: float
    snapshots: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_receivers(self) -> int:
        return self.traces.shape[0]

    @property
    def n_steps(self) -> int:
        return self.traces.shape[1]

    def to_grid(self) -> Grid2D:
        return Grid2D(self.traces, self.record_dt)

    def scaled(self, factor):
        return ShotGather(self.source_index, self.traces * factor, self.record_dt)


@dataclass(frozen=True)
class SolverConfig:
    """Numerical settings for :class:`WaveSolver`.

    ``boundary_strength`` defaults to ``0.005 * boundary_width``. The
    sponge factor is applied once per internal step, so a forced small
    ``dt_internal`` damps more per unit time and reflects more off the
    sponge edge.
    ``dt_internal`` forces the internal step (it must divide the
    recording interval) and bypasses the stability bound.
    """

    spatial_order: int = 4
    boundary_width: int = 50
    boundary_strength: float | None = None
    cfl_safety: float = 0.9
    store_snapshots: bool = False
    dt_internal: float | None = None

    def __post_init__(self):
        if self.spatial_order not in _kernels.STENCILS:
            raise ValueError(f"spatial_order must be one of {sorted(_kernels.STENCILS)}")
        if self.boundary_width < 0:
            raise ValueError("boundary_width must be >= 0")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if self.boundary_strength is None:
            object.__setattr__(self, "boundary_strength", 0.005 * self.boundary_width)


def cfl_constant(spatial_order):
    """``2 / sqrt(2 sum|c_k|)`` for the 1D second-derivative stencil used in 2D."""
    c1, c2 = _kernels.STENCILS[spatial_order]
    c0 = 2.0 * (c1 + c2)
    total = abs(c0) + 2 * abs(c1) + 2 * abs(c2)
    return 2.0 / math.sqrt(2.0 * total)


def stable_dt(v_max, dx, spatial_order=4, cfl_safety=1.0):
    if not (v_max > 0 and dx > 0):
        raise ValueError("v_max and dx must be positive")
    return cfl_safety * cfl_constant(spatial_order) * dx / v_max


def substeps(record_dt, dt_limit):
    """Smallest integer ``q`` with ``record_dt / q <= dt_limit``."""
    return max(1, math.ceil(record_dt / dt_limit * (1.0 - 1e-12)))


def sponge_profile(nz, nx, width, strength):
    """Per-step damping factor on the padded grid (1 in the interior)."""
    shape = (nz + 2 * width, nx + 2 * width)
    if width == 0:
        return np.ones(shape)
    iz = np.arange(shape[0])
    ix = np.arange(shape[1])
    dz = np.maximum(np.maximum(width - iz, iz - (width + nz - 1)), 0)
    dxx = np.maximum(np.maximum(width - ix, ix - (width + nx - 1)), 0)
    depth = np.maximum(dz[:, None], dxx[None, :]) / width
    return np.exp(-(strength * depth) ** 2)


class WaveSolver:
    """Padded grid, coefficients and stepping for one velocity model.

    The solver is read-only after construction; each run allocates its
    own wavefield buffers, so one instance can serve concurrent shots.
    """

    def __init__(self, model, record_dt, config=None):
        config = config or SolverConfig()
        vel = np.asarray(model.values, dtype=np.float64)
        self.config = config
        self.nz, self.nx = vel.shape
        self.dx = model.dx
        self.record_dt = float(record_dt)
        self.nb = config.boundary_width
        self.v_max = float(vel.max())
        self.dt_stable = stable_dt(self.v_max, self.dx, config.spatial_order, config.cfl_safety)
        if config.dt_internal is not None:
            q = round(self.record_dt / config.dt_internal)
            if q < 1 or not math.isclose(q * config.dt_internal, self.record_dt, rel_tol=1e-9):
                raise ValueError("dt_internal must divide record_dt")
            self.q = q
        else:
            self.q = substeps(self.record_dt, self.dt_stable)
        self.dt = self.record_dt / self.q

        h, nb = _kernels.HALO, self.nb
        self.off = h + nb
        vpad = np.pad(vel, nb, mode="edge")
        self.shape = (vpad.shape[0] + 2 * h, vpad.shape[1] + 2 * h)
        self.c = np.zeros(self.shape)
        self.c[h:-h, h:-h] = (vpad * self.dt / self.dx) ** 2
        self.g = np.zeros(self.shape)
        self.g[h:-h, h:-h] = sponge_profile(self.nz, self.nx, nb, config.boundary_strength)
        self.d = self.g ** 2
        self.gc = self.g * self.c
        self.c1, self.c2 = _kernels.STENCILS[config.spatial_order]
        self.inner = (slice(self.off, self.off + self.nz), slice(self.off, self.off + self.nx))

    def n_internal(self, n_record):
        """Number of field time levels covering ``n_record`` record samples."""
        return (n_record - 1) * self.q + 1

    def zeros(self):
        return np.zeros(self.shape)

    def interior(self, u):
        return u[self.inner]

    def cells(self, positions):
        """Flat indices into the padded field of the cells nearest ``positions``."""
        pos = np.asarray(positions, dtype=np.float64)
        iz = np.floor(pos[:, 0] / self.dx + 0.5).astype(np.int64)
        ix = np.floor(pos[:, 1] / self.dx + 0.5).astype(np.int64)
        if (iz < 0).any() or (iz >= self.nz).any() or (ix < 0).any() or (ix >= self.nx).any():
            raise GeometryError("position outside the grid")
        return (iz + self.off) * self.shape[1] + (ix + self.off)

    def advance(self, u, u_prev, out):
        _kernels.step(u, u_prev, out, self.g, self.d, self.c, self.c1, self.c2)

    def add_points(self, out, idx, values):
        """Inject point sources: ``out += g (v dt / dx)^2 * values`` at ``idx``.

        A point source of strength ``s`` has density ``s / dx^2``, so this
        is the discrete form of ``v^2 dt^2 s delta(x - x_s)``.
        """
        np.add.at(out.reshape(-1), idx, self.gc.reshape(-1)[idx] * values)

    def add_field(self, out, density):
        """Inject an interior source density: ``out += g v^2 dt^2 * density``."""
        out[self.inner] += self.gc[self.inner] * self.dx ** 2 * density

    def run(self, inject, n_record, receivers=None, snapshot_stride=None, label=""):
        """Time-step from rest over ``n_record`` record samples.

        ``inject(n, out)`` adds the source term of step ``n`` into the
        freshly computed field ``out`` (time level ``n + 1``). Returns
        ``(traces, snapshots)``; snapshots are interior copies at every
        ``snapshot_stride``-th time level, starting from level 0.
        """
        n_int = self.n_internal(n_record)
        u_prev, u, out = self.zeros(), self.zeros(), self.zeros()
        traces = None
        if receivers is not None:
            traces = np.zeros((len(receivers), n_record))
        snaps = None
        if snapshot_stride:
            snaps = np.zeros(((n_int - 1) // snapshot_stride + 1, self.nz, self.nx))
        q = self.q
        for n in range(n_int - 1):
            self.advance(u, u_prev, out)
            inject(n, out)
            u_prev, u, out = u, out, u_prev
            m = n + 1
            if m % q == 0:
                if not np.isfinite(u).all():
                    raise InstabilityError(
                        f"{label}non-finite wavefield at internal step {m} "
                        f"(dt={self.dt:.4g} s, stable bound {self.dt_stable:.4g} s)", step=m)
                if traces is not None:
                    traces[:, m // q] = u.reshape(-1)[receivers]
            if snaps is not None and m % snapshot_stride == 0:
                snaps[m // snapshot_stride] = u[self.inner]
        return traces, snaps

    def forward(self, wavelet, source_positions, receivers, n_record, snapshot_stride=None):
        """Point-source shot(s) firing ``wavelet`` simultaneously."""
        src = self.cells(source_positions)
        w = wavelet.at(np.arange(self.n_internal(n_record)) * self.dt)

        def inject(n, out):
            self.add_points(out, src, w[n])

        return self.run(inject, n_record, receivers, snapshot_stride)


def _check_inputs(model, geometry, wavelet):
    geometry.validate(model.nz, model.nx, model.dx)
    if not math.isclose(wavelet.dt, geometry.record_dt, rel_tol=1e-9):
        raise ValueError(f"wavelet dt {wavelet.dt} differs from record_dt {geometry.record_dt}")


def _snapshot_stride(solver, config, cadence):
    if cadence == "internal":
        return 1
    return solver.q if config.store_snapshots or cadence == "record" else None


def propagate(model, geometry, source_index, wavelet, config=None, *, solver=None,
              snapshots=None):
    """Model one shot and record it at every receiver.

    Parameters
    ----------
    model : VelocityModel
    geometry : AcquisitionGeometry
    source_index : int
        Which source of ``geometry`` fires.
    wavelet : SourceWavelet
        Sampled at ``geometry.record_dt``; internally re-evaluated at the
        solver step.
    config : SolverConfig, optional
    snapshots : {None, "record", "internal"}
        Store interior wavefields at record or internal cadence.
        ``None`` defers to ``config.store_snapshots``.

    Returns
    -------
    ShotGather
    """
    config = config or SolverConfig()
    _check_inputs(model, geometry, wavelet)
    solver = solver or WaveSolver(model, geometry.record_dt, config)
    stride = _snapshot_stride(solver, config, snapshots)
    rec = solver.cells(geometry.receiver_positions)
    try:
        traces, snaps = solver.forward(
            wavelet, geometry.source_positions[[source_index]], rec, geometry.n_steps, stride)
    except InstabilityError as exc:
        raise InstabilityError(f"shot {source_index}: {exc}", exc.step, source_index) from None
    return ShotGather(source_index, traces, geometry.record_dt, snaps)


def simulate_survey(model, geometry, wavelet, config=None, workers=1):
    """One :class:`ShotGather` per source, in source order.

    Shots run on a thread pool when ``workers > 1``; each shot owns its
    buffers, so the result is identical to sequential execution.
    """
    config = config or SolverConfig()
    _check_inputs(model, geometry, wavelet)
    solver = WaveSolver(model, geometry.record_dt, config)

    def one(i):
        return propagate(model, geometry, i, wavelet, config, solver=solver)

    if workers > 1 and geometry.n_sources > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(geometry.n_sources)))
    return [one(i) for i in range(geometry.n_sources)]


def as_velocity(model, dx=None):
    if isinstance(model, Grid2D):
        return model if isinstance(model, VelocityModel) else VelocityModel(model.values, model.dx)
    return VelocityModel(np.asarray(model), dx)
