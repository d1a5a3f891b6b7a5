"""Gas-chimney velocity perturbation.

A fracture network is grown by bounded random walks, gas diffuses out of
it into the shale, and the resulting gas volume fraction changes the bulk
modulus (Reuss average), the density (linear mix) and hence the P-wave
velocity. The velocity change is applied to a background model as a
dimensionless factor ``V_p(S) / V_p(0)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage, special

from .grid import MaskGrid, SaturationField, VpFactorField

__all__ = [
    "SECONDS_PER_YEAR", "GasParams", "FractureParams", "FractureNetwork", "ChimneyError",
    "grow_fractures", "saturation", "saturation_kernel", "reuss_bulk", "mix_density",
    "p_velocity", "vp_factor", "apply_chimney", "chimney_mask",
]

SECONDS_PER_YEAR = 3.156e7

# Pore pressure p = rho_w g z; carried for bookkeeping only.
WATER_DENSITY = 1000.0
GRAVITY = 9.81


class ChimneyError(ValueError):
    pass


@dataclass(frozen=True)
class GasParams:
    """Rock-physics and diffusion constants.

    ``diffusion_length`` overrides the erfc length scale ``sqrt(4 D t)``
    used with ``erf_form="sqrt"``. ``H0=None`` means ``1e-3 / (8 pi D)``.
    """

    K_g: float = 8e8
    K_s: float = 0.045e9
    G: float = 3211.0
    rho_g: float = 1900.0
    rho_s: float = 1900.0
    D: float = 1e-12
    t_years: float = 750.0
    H0: float | None = None
    saturation_clamp: bool = True
    erf_form: str = "sqrt"
    diffusion_length: float | None = None
    mask_threshold: float = 0.1

    def __post_init__(self):
        for name in ("K_g", "K_s", "rho_g", "rho_s", "D", "t_years"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.G < 0:
            raise ValueError("G must be >= 0")
        if self.erf_form not in ("sqrt", "printed"):
            raise ValueError("erf_form must be 'sqrt' or 'printed'")
        if not 0 < self.mask_threshold < 1:
            raise ValueError("mask_threshold must lie in (0, 1)")
        if self.diffusion_length is not None and not self.diffusion_length > 0:
            raise ValueError("diffusion_length must be positive")
        if self.H0 is None:
            object.__setattr__(self, "H0", 1e-3 / (8.0 * math.pi * self.D))

    @property
    def t(self) -> float:
        """Diffusion time in seconds."""
        return self.t_years * SECONDS_PER_YEAR

    @property
    def erfc_scale(self) -> float:
        """Length dividing R inside erfc (m, or m^2 for the printed form)."""
        if self.erf_form == "printed":
            return 4.0 * self.D * self.t
        if self.diffusion_length is not None:
            return self.diffusion_length
        return math.sqrt(4.0 * self.D * self.t)

    def to_dict(self):
        d = asdict(self)
        d["t_seconds"] = self.t
        d["erfc_scale"] = self.erfc_scale
        return d


@dataclass(frozen=True)
class FractureParams:
    n_seeds: int = 4
    max_length_cells: int = 40
    max_angle_deg: float = 45.0
    rng_seed: int = 0
    depth_band: tuple[float, float] = (0.2, 0.8)
    direction: str = "up"
    lateral_band: tuple[float, float] = (0.1, 0.9)

    def __post_init__(self):
        if self.n_seeds < 0:
            raise ValueError("n_seeds must be >= 0")
        if self.max_length_cells < 1:
            raise ValueError("max_length_cells must be >= 1")
        if not 0 <= self.max_angle_deg <= 90:
            raise ValueError("max_angle_deg must lie in [0, 90]")
        for name in ("depth_band", "lateral_band"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi <= 1:
                raise ValueError(f"{name} must satisfy 0 <= lo <= hi <= 1")
        if self.direction not in ("up", "down"):
            raise ValueError("direction must be 'up' or 'down'")


@dataclass
class FractureNetwork:
    """Cells visited by the fracture random walks.

    ``indicator`` is the boolean image of ``cells``; ``fractures`` keeps
    each walk's cells in visiting order.
    """

    shape: tuple[int, int]
    fractures: list[list[tuple[int, int]]]
    params: FractureParams = field(default_factory=FractureParams)

    @property
    def seed_points(self):
        return [f[0] for f in self.fractures]

    @property
    def cells(self):
        return sorted({c for f in self.fractures for c in f})

    @property
    def indicator(self):
        ind = np.zeros(self.shape, dtype=bool)
        for iz, ix in self.cells:
            ind[iz, ix] = True
        return ind

    def mask(self, dx) -> MaskGrid:
        return MaskGrid(self.indicator, dx)

    def union(self, other):
        if other.shape != self.shape:
            raise ValueError("networks live on different grids")
        return FractureNetwork(self.shape, self.fractures + other.fractures, self.params)

    def to_json(self):
        return json.dumps({
            "shape": list(self.shape),
            "params": asdict(self.params),
            "fractures": [[list(c) for c in f] for f in self.fractures],
        }, indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        p = d["params"]
        for k in ("depth_band", "lateral_band"):
            if k in p:
                p[k] = tuple(p[k])
        return cls(tuple(d["shape"]), [[tuple(c) for c in f] for f in d["fractures"]],
                   FractureParams(**p))


def _band(frac, n):
    lo = min(int(math.floor(frac[0] * n)), n - 1)
    hi = max(min(int(math.ceil(frac[1] * n)), n), lo + 1)
    return lo, hi


def grow_fractures(grid_shape, params):
    """Grow ``params.n_seeds`` fractures by random walks.

    Seeds are uniform over the ``depth_band`` and ``lateral_band``
    fractions of the grid. Each step draws a direction uniformly within
    ``max_angle_deg`` of vertical, snaps it to the 8-connected lattice and
    moves one cell; a walk stops after ``max_length_cells`` cells or when
    the next step would leave the grid. Snapping rounds each direction
    component, so only angles beyond 30 degrees give diagonal steps.
    """
    nz, nx = grid_shape
    if nz < 1 or nx < 1:
        raise ValueError(f"cannot grow fractures on a {nz}x{nx} grid")
    rng = np.random.default_rng(params.rng_seed)
    seeds_z = rng.integers(*_band(params.depth_band, nz), size=params.n_seeds)
    seeds_x = rng.integers(*_band(params.lateral_band, nx), size=params.n_seeds)
    vertical = -1.0 if params.direction == "up" else 1.0
    half = math.radians(params.max_angle_deg)
    fractures = []
    for z, x in zip(seeds_z.tolist(), seeds_x.tolist()):
        cells = [(z, x)]
        angles = rng.uniform(-half, half, size=params.max_length_cells - 1)
        for theta in angles:
            dz = int(round(vertical * math.cos(theta)))
            dxl = int(round(math.sin(theta)))
            nz_, nx_ = z + dz, x + dxl
            if not (0 <= nz_ < nz and 0 <= nx_ < nx):
                break
            z, x = nz_, nx_
            cells.append((z, x))
        fractures.append(cells)
    return FractureNetwork((nz, nx), fractures, params)


def saturation_kernel(R, gas, dx):
    """Contribution of one fracture cell at distance ``R`` (m), before clamping.

    ``dx^2 * H0 / (8 pi D R) * erfc(R / scale)`` with ``R >= dx / 2``.
    """
    R = np.maximum(np.asarray(R, dtype=np.float64), 0.5 * dx)
    pref = dx * dx * gas.H0 / (8.0 * math.pi * gas.D)
    return pref / R * special.erfc(R / gas.erfc_scale)


def saturation(network, gas, dx, clamp=None):
    """Gas volume fraction from diffusion out of every fracture cell.

    Sums :func:`saturation_kernel` over the network and clamps to [0, 1]
    when ``gas.saturation_clamp`` (or ``clamp``) is set.
    """
    nz, nx = network.shape
    iz = np.arange(-(nz - 1), nz)
    ix = np.arange(-(nx - 1), nx)
    R = dx * np.hypot(iz[:, None], ix[None, :])
    kern = saturation_kernel(R, gas, dx)
    s = np.zeros((nz, nx))
    for cz, cx in network.cells:
        s += kern[nz - 1 - cz:2 * nz - 1 - cz, nx - 1 - cx:2 * nx - 1 - cx]
    clamp = gas.saturation_clamp if clamp is None else clamp
    if clamp:
        np.clip(s, 0.0, 1.0, out=s)
    return SaturationField(s, dx)


def reuss_bulk(S, K_g, K_s):
    """Reuss (isostress) bulk modulus ``1 / ((1-S)/K_s + S/K_g)``."""
    S = np.asarray(S, dtype=np.float64)
    K = 1.0 / ((1.0 - S) / K_s + S / K_g)
    return np.where(S == 0.0, K_s, np.where(S == 1.0, K_g, K))


def mix_density(S, rho_g, rho_s):
    S = np.asarray(S, dtype=np.float64)
    return (1.0 - S) * rho_s + S * rho_g


def p_velocity(K, G, rho):
    return np.sqrt((np.asarray(K, dtype=np.float64) + 4.0 * G / 3.0) / rho)


def _vp_of_s(S, gas):
    K = reuss_bulk(S, gas.K_g, gas.K_s)
    rho = mix_density(S, gas.rho_g, gas.rho_s)
    return p_velocity(K, gas.G, rho)


def vp_factor(sat, gas):
    """Cellwise ``V_p(S) / V_p(0)``; exactly 1 where ``S == 0``."""
    S = np.asarray(getattr(sat, "values", sat), dtype=np.float64)
    ratio = _vp_of_s(S, gas) / _vp_of_s(0.0, gas)
    return VpFactorField(np.where(S == 0.0, 1.0, ratio), getattr(sat, "dx", 1.0))


def apply_chimney(background, factor, cap=0.3):
    """``V_final = clip(factor, 1 - cap, 1 + cap) * V_background``."""
    if not cap > 0:
        raise ValueError("cap must be positive")
    f = np.asarray(getattr(factor, "values", factor))
    if f.shape != background.shape:
        raise ValueError(f"factor shape {f.shape} != background {background.shape}")
    lo = max(1.0 - cap, 0.0)
    v = np.clip(f, lo, 1.0 + cap) * background.values
    try:
        return background.with_values(v)
    except ValueError as exc:
        raise ChimneyError(
            f"perturbed velocity violates sanity bounds ({exc}); "
            "reduce the perturbation cap or the gas parameters") from None


def chimney_mask(sat, mask_threshold=0.1, dilation_cells=2):
    """``S > mask_threshold`` dilated by a ``(2d+1)``-square structuring element."""
    if not 0 < mask_threshold < 1:
        raise ValueError("mask_threshold must lie in (0, 1)")
    m = np.asarray(sat.values) > mask_threshold
    if dilation_cells > 0 and m.any():
        size = 2 * dilation_cells + 1
        m = ndimage.binary_dilation(m, structure=np.ones((size, size), dtype=bool))
    return MaskGrid(m, sat.dx)
