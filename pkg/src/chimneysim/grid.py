"""Uniform 2D grids, raw float32 file I/O and grayscale rendering.

Every field in the package (velocities, images, saturation, masks, shot
gathers) lives on a depth-by-lateral grid stored row-major with depth as
the slow axis, so ``values[iz, ix]`` sits at ``z = iz * dx, x = ix * dx``.

On disk a grid is a raw little-endian float32 payload (``.f32``) or a
0/1 byte payload for masks (``.u8``), plus a JSON sidecar holding the
shape, spacing, kind and a CRC-32 of the payload.
"""
from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import ClassVar

import numpy as np

__all__ = [
    "Grid2D", "VelocityModel", "SeismicImage", "SlownessPerturbation",
    "SaturationField", "VpFactorField", "MaskGrid", "GridFormatError",
    "GridIOError", "KINDS", "read_grid", "write_grid", "render_grid",
    "write_image", "meta_path_for",
]

KINDS = ("velocity", "image", "perturbation", "saturation", "factor", "mask", "gather")

VELOCITY_MIN = 100.0
VELOCITY_MAX = 10000.0


class GridFormatError(ValueError):
    """Malformed payload or sidecar."""

    def __init__(self, message, *, expected=None, actual=None, index=None):
        super().__init__(message)
        self.expected = expected
        self.actual = actual
        self.index = index


class GridIOError(OSError):
    pass


def _as_values(values, dtype=np.float64):
    arr = np.array(values, dtype=dtype, copy=True)
    if arr.ndim != 2:
        raise ValueError(f"grid values must be 2D, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Scalar field sampled on a uniform depth x lateral grid.

    Parameters
    ----------
    values : array_like, shape (nz, nx)
        Field values; copied to a read-only float64 array.
    dx : float
        Isotropic grid spacing in meters.
    """

    values: np.ndarray
    dx: float
    kind: ClassVar[str] = "image"

    def __post_init__(self):
        object.__setattr__(self, "values", _as_values(self.values))
        object.__setattr__(self, "dx", float(self.dx))
        nz, nx = self.values.shape
        if nz < 1 or nx < 1:
            raise ValueError(f"grid must have nz >= 1 and nx >= 1, got {nz}x{nx}")
        if not self.dx > 0:
            raise ValueError(f"grid spacing must be positive, got {self.dx}")
        bad = np.flatnonzero(~np.isfinite(self.values))
        if bad.size:
            raise GridFormatError(
                f"non-finite value at flat index {bad[0]}", index=int(bad[0]))

    @property
    def nz(self) -> int:
        return self.values.shape[0]

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def with_values(self, values):
        """Same geometry and type, new values."""
        return type(self)(values, self.dx)

    def __eq__(self, other):
        if not isinstance(other, Grid2D):
            return NotImplemented
        return (self.shape == other.shape and self.dx == other.dx
                and np.array_equal(self.values, other.values))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class VelocityModel(Grid2D):
    """P-wave velocity in m/s with sanity bounds."""

    vmin: float = field(default=VELOCITY_MIN, compare=False)
    vmax: float = field(default=VELOCITY_MAX, compare=False)
    kind: ClassVar[str] = "velocity"

    def __post_init__(self):
        super().__post_init__()
        lo, hi = float(self.values.min()), float(self.values.max())
        if lo < self.vmin or hi > self.vmax:
            raise ValueError(
                f"velocity range [{lo:.6g}, {hi:.6g}] m/s outside sanity bounds "
                f"[{self.vmin:g}, {self.vmax:g}]")

    def with_values(self, values):
        return VelocityModel(values, self.dx, self.vmin, self.vmax)


class SeismicImage(Grid2D):
    kind: ClassVar[str] = "image"


class SlownessPerturbation(Grid2D):
    """Squared-slowness perturbation in s^2/m^2."""

    kind: ClassVar[str] = "perturbation"


class SaturationField(Grid2D):
    kind: ClassVar[str] = "saturation"


class VpFactorField(Grid2D):
    kind: ClassVar[str] = "factor"

    def __post_init__(self):
        super().__post_init__()
        if not (self.values > 0).all():
            raise ValueError("velocity factor must be strictly positive")


@dataclass(frozen=True, eq=False)
class MaskGrid:
    """Boolean per-cell mask on the same geometry as a Grid2D."""

    values: np.ndarray
    dx: float
    kind: ClassVar[str] = "mask"

    def __post_init__(self):
        object.__setattr__(self, "values", _as_values(self.values, dtype=bool))
        object.__setattr__(self, "dx", float(self.dx))
        if not self.dx > 0:
            raise ValueError(f"grid spacing must be positive, got {self.dx}")

    nz = Grid2D.nz
    nx = Grid2D.nx
    shape = Grid2D.shape

    @property
    def count(self) -> int:
        return int(self.values.sum())

    def __eq__(self, other):
        if not isinstance(other, MaskGrid):
            return NotImplemented
        return (self.shape == other.shape and self.dx == other.dx
                and np.array_equal(self.values, other.values))

    __hash__ = None


_KIND_TYPES = {
    "velocity": VelocityModel,
    "image": SeismicImage,
    "perturbation": SlownessPerturbation,
    "saturation": SaturationField,
    "factor": VpFactorField,
    "gather": Grid2D,
}


def meta_path_for(path_data) -> Path:
    return Path(path_data).with_suffix(".json")


def write_grid(grid, path_data, path_meta=None, *, kind=None, extra=None):
    """Write ``grid`` as a raw payload plus JSON sidecar.

    Float grids are written as little-endian float32, masks as one byte
    per cell. ``extra`` entries are merged into the sidecar.
    """
    path_data = Path(path_data)
    path_meta = meta_path_for(path_data) if path_meta is None else Path(path_meta)
    kind = kind or grid.kind
    if kind not in KINDS:
        raise ValueError(f"unknown grid kind {kind!r}")
    if isinstance(grid, MaskGrid) or kind == "mask":
        payload = np.ascontiguousarray(grid.values, dtype=np.uint8).tobytes()
    else:
        payload = np.ascontiguousarray(grid.values, dtype="<f4").tobytes()
    meta = {"nz": grid.nz, "nx": grid.nx, "dx_m": grid.dx, "kind": kind,
            "crc32": zlib.crc32(payload)}
    if extra:
        meta.update(extra)
    try:
        path_data.parent.mkdir(parents=True, exist_ok=True)
        path_data.write_bytes(payload)
        path_meta.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise GridIOError(f"failed writing grid to {path_data}: {exc}") from exc


def read_meta(path_meta) -> dict:
    try:
        return json.loads(Path(path_meta).read_text())
    except OSError as exc:
        raise GridIOError(f"failed reading sidecar {path_meta}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise GridFormatError(f"sidecar {path_meta} is not valid JSON: {exc}") from exc


def read_grid(path_data, path_meta=None):
    """Read a grid written by :func:`write_grid`.

    Returns the ``Grid2D`` subclass matching the sidecar ``kind`` (or a
    ``MaskGrid`` for masks). Size mismatches and non-finite values raise
    :class:`GridFormatError` instead of truncating.
    """
    path_data = Path(path_data)
    path_meta = meta_path_for(path_data) if path_meta is None else Path(path_meta)
    meta = read_meta(path_meta)
    try:
        nz, nx, dx = int(meta["nz"]), int(meta["nx"]), float(meta["dx_m"])
    except KeyError as exc:
        raise GridFormatError(f"sidecar {path_meta} missing field {exc}") from exc
    kind = meta.get("kind", "image")
    try:
        payload = path_data.read_bytes()
    except OSError as exc:
        raise GridIOError(f"failed reading grid payload {path_data}: {exc}") from exc

    itemsize = 1 if kind == "mask" else 4
    expected = nz * nx * itemsize
    if len(payload) != expected:
        raise GridFormatError(
            f"{path_data}: expected {expected} bytes for {nz}x{nx} {kind} grid, "
            f"found {len(payload)}", expected=expected, actual=len(payload))
    if "crc32" in meta and zlib.crc32(payload) != meta["crc32"]:
        raise GridFormatError(f"{path_data}: CRC-32 mismatch with sidecar")

    if kind == "mask":
        raw = np.frombuffer(payload, dtype=np.uint8).reshape(nz, nx)
        if (raw > 1).any():
            raise GridFormatError(f"{path_data}: mask bytes must be 0 or 1")
        return MaskGrid(raw.astype(bool), dx)

    values = np.frombuffer(payload, dtype="<f4").reshape(nz, nx)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise GridFormatError(
            f"{path_data}: non-finite value at flat index {bad[0]}", index=int(bad[0]))
    cls = _KIND_TYPES.get(kind, Grid2D)
    return cls(values.astype(np.float64), dx)


def _to_bytes8(values, percentile_lo, percentile_hi):
    if not 0 <= percentile_lo < percentile_hi <= 100:
        raise ValueError("need 0 <= percentile_lo < percentile_hi <= 100")
    v = np.asarray(values, dtype=np.float64)
    lo, hi = np.percentile(v, [percentile_lo, percentile_hi])
    if not hi > lo:
        return np.full(v.shape, 128, dtype=np.uint8)
    scaled = (np.clip(v, lo, hi) - lo) / (hi - lo)
    pix = np.rint(scaled * 255.0)
    # only clipped values may saturate; interior values that round onto an
    # end code are pulled back by one step
    inner = (v > lo) & (v < hi)
    pix[inner] = np.clip(pix[inner], 1, 254)
    return pix.astype(np.uint8)


def render_grid(grid, percentile_lo=1.0, percentile_hi=99.0, fmt="pgm") -> bytes:
    """Render a grid as an 8-bit grayscale image.

    Values are clipped to the ``[lo, hi]`` percentiles and mapped linearly
    onto 0..255; a grid with no dynamic range renders as mid-gray 128.
    ``fmt`` is ``"pgm"`` (binary P5) or ``"png"`` (needs Pillow).
    """
    pix = _to_bytes8(grid.values, percentile_lo, percentile_hi)
    h, w = pix.shape
    if fmt == "pgm":
        return f"P5\n{w} {h}\n255\n".encode("ascii") + pix.tobytes()
    if fmt == "png":
        import io

        from PIL import Image

        buf = io.BytesIO()
        Image.fromarray(pix, mode="L").save(buf, format="PNG")
        return buf.getvalue()
    raise ValueError(f"unknown image format {fmt!r}")


def write_image(grid, path, percentile_lo=1.0, percentile_hi=99.0):
    path = Path(path)
    fmt = "png" if path.suffix.lower() == ".png" else "pgm"
    data = render_grid(grid, percentile_lo, percentile_hi, fmt=fmt)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
    except OSError as exc:
        raise GridIOError(f"failed writing image {path}: {exc}") from exc
