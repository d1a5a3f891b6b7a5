"""Small pipeline configurations shared by the tests."""
import copy

from chimneysim.config import from_dict

TINY = {
    "grid": {"nz": 40, "nx": 40, "dx": 8.0},
    "solver": {"boundary_width": 16},
    "geometry": {"n_sources": 2, "source_spacing": 120.0, "n_receivers": 12,
                 "receiver_spacing": 20.0, "n_steps": 60, "peak_frequency": 15.0},
    "fractures": {"n_seeds": [1, 2], "max_length_cells": [8, 16]},
    "gas": {"diffusion_length": 6.0, "H0": 1e-5 / (8 * 3.141592653589793 * 1e-12)},
    "dataset": {"samples_per_model": 2, "control_samples": 1, "synthetic_models": 3,
                "n_test_models": 1, "master_seed": 3, "preview": True},
}


def tiny(tmp_path, **dataset):
    d = copy.deepcopy(TINY)
    d["dataset"].update(dataset, out=str(tmp_path / "out"))
    return from_dict(d, base_dir=tmp_path)
