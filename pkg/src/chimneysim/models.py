"""Synthetic layered background velocity models."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import VelocityModel


@dataclass(frozen=True)
class LayeredSpec:
    """Gently undulating layer-cake model.

    Velocity increases with depth from ``v_min`` to ``v_max`` across
    ``n_layers`` layers; each interface is a sum of two random sinusoids
    whose amplitude is ``undulation`` times the model depth.
    """

    n_layers: int = 6
    v_min: float = 1800.0
    v_max: float = 4000.0
    undulation: float = 0.03
    jitter: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.n_layers < 1:
            raise ValueError("n_layers must be >= 1")
        if not 0 < self.v_min <= self.v_max:
            raise ValueError("need 0 < v_min <= v_max")
        if self.undulation < 0 or not 0 <= self.jitter < 1:
            raise ValueError("undulation must be >= 0 and jitter in [0, 1)")


def layered_model(nz, nx, dx, spec: LayeredSpec) -> VelocityModel:
    rng = np.random.default_rng(spec.seed)
    n = spec.n_layers
    base = np.linspace(spec.v_min, spec.v_max, n)
    # jitter interior layers but keep the requested range
    vel = base.copy()
    if n > 2:
        step = (spec.v_max - spec.v_min) / (n - 1)
        vel[1:-1] += spec.jitter * step * rng.uniform(-1, 1, n - 2)
    # interface depths split the section evenly, then get perturbed
    tops = (np.arange(1, n) + rng.uniform(-0.3, 0.3, n - 1)) * nz / n
    x = np.arange(nx) / max(nx - 1, 1)
    z = np.arange(nz)[:, None]
    v = np.full((nz, nx), vel[0])
    for k in range(n - 1):
        f1, f2 = rng.uniform(0.5, 2.0, 2)
        p1, p2 = rng.uniform(0, 2 * np.pi, 2)
        surf = tops[k] + spec.undulation * nz * (0.7 * np.sin(2 * np.pi * f1 * x + p1)
                                                + 0.3 * np.sin(2 * np.pi * f2 * x + p2))
        v = np.where(z >= surf[None, :], vel[k + 1], v)
    return VelocityModel(v, dx)
