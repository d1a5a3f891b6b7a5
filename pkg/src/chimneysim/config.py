"""Pipeline configuration: TOML or JSON files mapped onto dataclasses.

Every section is a dataclass; unknown keys are rejected with their full
dotted path so typos never fall back to defaults silently. See
``docs/config.md`` for the schema.
"""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .chimney import FractureParams, GasParams
from .models import LayeredSpec
from .rtm import IMAGING, POSTFILTERS
from .wavesim import AcquisitionGeometry, SolverConfig, SourceWavelet


class ConfigError(ValueError):
    """Invalid configuration; ``key`` holds the dotted path of the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


@dataclass(frozen=True)
class GridSection:
    nz: int = 512
    nx: int = 512
    dx: float = 4.0


@dataclass(frozen=True)
class GeometrySection:
    n_sources: int = 25
    source_spacing: float = 80.0
    n_receivers: int = 100
    receiver_spacing: float = 20.0
    source_depth: float = 0.0
    receiver_depth: float = 0.0
    record_dt: float = 0.004
    n_steps: int = 511
    peak_frequency: float = 15.0
    wavelet_delay: float | None = None

    def acquisition(self, nx, dx):
        return AcquisitionGeometry.surface_line(
            nx, dx, self.n_sources, self.source_spacing, self.n_receivers,
            self.receiver_spacing, self.record_dt, self.n_steps,
            self.source_depth, self.receiver_depth)

    def wavelet(self):
        return SourceWavelet(self.peak_frequency, self.record_dt, self.n_steps, self.wavelet_delay)


@dataclass(frozen=True)
class GasSection:
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
    cap: float = 0.3
    dilation_cells: int = 2
    # pore-pressure constants; recorded in metadata, not used by the model
    water_density: float = 1000.0
    gravity: float = 9.81

    def params(self) -> GasParams:
        keep = {f.name for f in fields(GasParams)}
        return GasParams(**{k: v for k, v in asdict(self).items() if k in keep})


@dataclass(frozen=True)
class FractureSection:
    """Ranges are inclusive ``[lo, hi]`` pairs drawn per sample; a scalar fixes the value."""

    n_seeds: tuple = (2, 5)
    max_length_cells: tuple = (60, 160)
    max_angle_deg: float = 45.0
    depth_band: tuple = (0.2, 0.8)
    direction: str = "up"
    lateral_band: tuple = (0.1, 0.9)

    def params(self, n_seeds, max_length, rng_seed) -> FractureParams:
        return FractureParams(n_seeds, max_length, self.max_angle_deg, rng_seed,
                              tuple(self.depth_band), self.direction,
                              tuple(self.lateral_band))


@dataclass(frozen=True)
class MigrationSection:
    sigma_cells: float = 10.0
    imaging: str = "zero_lag"
    postfilter: str = "none"


@dataclass(frozen=True)
class DatasetSection:
    samples_per_model: int = 20
    master_seed: int = 0
    out: str = "dataset"
    workers: int = 1
    n_test_models: int | None = None
    test_models: tuple = ()
    control_samples: int = 0
    synthetic_models: int = 0
    dry_run: bool = False
    preview: bool = True


@dataclass(frozen=True)
class ModelEntry:
    """A background model: a velocity grid on disk or a synthetic layered model."""

    id: str
    path: str | None = None
    layered: LayeredSpec | None = None


@dataclass(frozen=True)
class PipelineConfig:
    grid: GridSection = field(default_factory=GridSection)
    solver: SolverConfig = field(default_factory=SolverConfig)
    geometry: GeometrySection = field(default_factory=GeometrySection)
    gas: GasSection = field(default_factory=GasSection)
    fractures: FractureSection = field(default_factory=FractureSection)
    migration: MigrationSection = field(default_factory=MigrationSection)
    dataset: DatasetSection = field(default_factory=DatasetSection)
    models: tuple = ()
    base_dir: str = field(default=".", compare=False)

    def to_dict(self):
        d = asdict(self)
        d.pop("base_dir")
        return d

    def hash(self):
        """SHA-256 of the canonical config, ignoring runtime-only settings."""
        d = self.to_dict()
        for k in ("workers", "out", "dry_run"):
            d["dataset"].pop(k)
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode()).hexdigest()

    def model_entries(self):
        """Configured models plus ``dataset.synthetic_models`` generated layered ones."""
        out = list(self.models)
        for k in range(self.dataset.synthetic_models):
            out.append(ModelEntry(f"layered_{k:02d}",
                                  layered=LayeredSpec(seed=self.dataset.master_seed * 1000 + k)))
        ids = [m.id for m in out]
        dup = sorted({i for i in ids if ids.count(i) > 1})
        if dup:
            raise ConfigError(f"duplicate model id {dup[0]!r}", "models")
        return out

    def with_overrides(self, **dataset_kw):
        return replace(self, dataset=replace(self.dataset, **dataset_kw))


_SECTIONS = {
    "grid": GridSection, "solver": SolverConfig, "geometry": GeometrySection,
    "gas": GasSection, "fractures": FractureSection, "migration": MigrationSection,
    "dataset": DatasetSection,
}

_RANGE_KEYS = {("fractures", "n_seeds"), ("fractures", "max_length_cells")}


def _build(cls, data, prefix):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix} must be a table", prefix)
    known = {f.name: f for f in fields(cls)}
    for k in data:
        if k not in known:
            raise ConfigError(f"unknown key '{prefix}.{k}'", f"{prefix}.{k}")
    kw = {}
    for name, v in data.items():
        if isinstance(v, list):
            v = tuple(v)
        kw[name] = v
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{prefix}: {exc}", prefix) from None


def _range(v, key):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = (v, v)
    if len(v) != 2 or not all(isinstance(x, int) and not isinstance(x, bool) for x in v) \
            or v[0] > v[1]:
        raise ConfigError(f"'{key}' must be an integer or an [lo, hi] integer pair", key)
    return tuple(v)


def _check(cfg):
    g = cfg.grid
    if g.nz < 1 or g.nx < 1 or not g.dx > 0:
        raise ConfigError("grid needs nz, nx >= 1 and dx > 0", "grid")
    geo = cfg.geometry
    if geo.n_sources < 1 or geo.n_receivers < 1 or geo.n_steps < 2 or not geo.record_dt > 0:
        raise ConfigError("geometry needs sources, receivers, n_steps >= 2 and record_dt > 0",
                          "geometry")
    if not geo.peak_frequency > 0:
        raise ConfigError("geometry.peak_frequency must be positive", "geometry.peak_frequency")
    gas = cfg.gas
    if not gas.cap > 0 or gas.dilation_cells < 0:
        raise ConfigError("gas.cap must be > 0 and gas.dilation_cells >= 0", "gas")
    try:
        gas.params()
    except ValueError as exc:
        raise ConfigError(f"gas: {exc}", "gas") from None
    fr = cfg.fractures
    if fr.n_seeds[0] < 0 or fr.max_length_cells[0] < 1:
        raise ConfigError("fractures need n_seeds >= 0 and max_length_cells >= 1", "fractures")
    try:
        fr.params(fr.n_seeds[0], fr.max_length_cells[0], 0)
    except ValueError as exc:
        raise ConfigError(f"fractures: {exc}", "fractures") from None
    mig = cfg.migration
    if mig.imaging not in IMAGING:
        raise ConfigError(f"migration.imaging must be one of {IMAGING}", "migration.imaging")
    if mig.postfilter not in POSTFILTERS:
        raise ConfigError(f"migration.postfilter must be one of {POSTFILTERS}",
                          "migration.postfilter")
    if mig.sigma_cells < 0:
        raise ConfigError("migration.sigma_cells must be >= 0", "migration.sigma_cells")
    ds = cfg.dataset
    if ds.samples_per_model < 1 or ds.workers < 1 or ds.master_seed < 0:
        raise ConfigError("dataset needs samples_per_model >= 1, workers >= 1, "
                          "master_seed >= 0", "dataset")
    if not 0 <= ds.control_samples <= ds.samples_per_model:
        raise ConfigError("dataset.control_samples must lie in [0, samples_per_model]",
                          "dataset.control_samples")
    entries = cfg.model_entries()
    if not entries:
        raise ConfigError("no velocity models configured ([[models]] or "
                          "dataset.synthetic_models)", "models")
    ids = {m.id for m in entries}
    for t in ds.test_models:
        if t not in ids:
            raise ConfigError(f"dataset.test_models names unknown model {t!r}",
                              "dataset.test_models")
    if ds.n_test_models is not None and not 0 <= ds.n_test_models <= len(entries):
        raise ConfigError("dataset.n_test_models exceeds the number of models",
                          "dataset.n_test_models")


def from_dict(data, base_dir=".") -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration root must be a table")
    allowed = set(_SECTIONS) | {"models"}
    for k in data:
        if k not in allowed:
            raise ConfigError(f"unknown key '{k}'", k)
    kw = {}
    for name, cls in _SECTIONS.items():
        sec = data.get(name, {})
        if isinstance(sec, dict):
            sec = dict(sec)
            for s, k in _RANGE_KEYS:
                if s == name and k in sec:
                    sec[k] = _range(sec[k], f"{s}.{k}")
        kw[name] = _build(cls, sec, name)
    models = []
    raw_models = data.get("models", [])
    if not isinstance(raw_models, list):
        raise ConfigError("models must be an array of tables ([[models]])", "models")
    for i, m in enumerate(raw_models):
        p = f"models[{i}]"
        if not isinstance(m, dict):
            raise ConfigError(f"{p} must be a table", p)
        for k in m:
            if k not in ("id", "path", "layered"):
                raise ConfigError(f"unknown key '{p}.{k}'", f"{p}.{k}")
        if "id" not in m:
            raise ConfigError(f"{p} needs an 'id'", f"{p}.id")
        if ("path" in m) == ("layered" in m):
            raise ConfigError(f"{p} needs exactly one of 'path' or 'layered'", p)
        layered = _build(LayeredSpec, m["layered"], f"{p}.layered") if "layered" in m else None
        models.append(ModelEntry(str(m["id"]), m.get("path"), layered))
    cfg = PipelineConfig(models=tuple(models), base_dir=str(base_dir), **kw)
    _check(cfg)
    return cfg


def load_config(path) -> PipelineConfig:
    """Read a ``.toml`` or ``.json`` pipeline configuration."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(raw)
        else:
            data = tomllib.loads(raw.decode())
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    return from_dict(data, base_dir=path.parent)
