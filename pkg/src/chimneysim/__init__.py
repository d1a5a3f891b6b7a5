"""Synthetic gas-chimney seismic datasets.

Acoustic finite-difference modeling, Born modeling and reverse-time
migration, a diffusion and rock-physics model of gas chimneys, image and
mask metrics, and a deterministic dataset pipeline.
"""
__version__ = "0.1.0"

from .chimney import (ChimneyError, FractureNetwork, FractureParams, GasParams,
                      apply_chimney, chimney_mask, grow_fractures, mix_density,
                      p_velocity, reuss_bulk, saturation, vp_factor)
from .grid import (Grid2D, GridFormatError, GridIOError, MaskGrid, SaturationField,
                   SeismicImage, SlownessPerturbation, VelocityModel, VpFactorField,
                   read_grid, render_grid, write_grid, write_image)
from .metrics import EnhScores, SegScores, enh_scores, seg_scores
from .rtm import (backpropagate, born_forward, image_adjoint, image_zero_lag, migrate,
                  smooth_velocity)
from .wavesim import (AcquisitionGeometry, GeometryError, InstabilityError, ShotGather,
                      SolverConfig, SourceWavelet, propagate, simulate_survey, stable_dt)

__all__ = [
    "ChimneyError", "FractureNetwork", "FractureParams", "GasParams", "apply_chimney",
    "chimney_mask", "grow_fractures", "mix_density", "p_velocity", "reuss_bulk",
    "saturation", "vp_factor",
    "Grid2D", "GridFormatError", "GridIOError", "MaskGrid", "SaturationField",
    "SeismicImage", "SlownessPerturbation", "VelocityModel", "VpFactorField",
    "read_grid", "render_grid", "write_grid", "write_image",
    "EnhScores", "SegScores", "enh_scores", "seg_scores",
    "backpropagate", "born_forward", "image_adjoint", "image_zero_lag", "migrate",
    "smooth_velocity",
    "AcquisitionGeometry", "GeometryError", "InstabilityError", "ShotGather",
    "SolverConfig", "SourceWavelet", "propagate", "simulate_survey", "stable_dt",
]
