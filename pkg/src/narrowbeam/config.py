"""Plain-text experiment configuration (INI-style ``key = value`` with sections).

Example::

    [experiment]
    profile = desk
    base_seed = 7

    [beam]
    kinds = group-wise-opt, random
    pattern = desk_pattern.csv

    [estimator]
    kinds = gw-scvbi, omp

    [sweep]
    axis = snr_db
    values = 0, 5, 10
    trials = 20

Relative paths are resolved against the directory holding the config file.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .array import UpaGeometry, VerticalPrior
from .estimator import EstimatorConfig
from .metrics import SidelobeRegion

PROFILES = {
    "desk": dict(n_y=16, n_z=24, m=6, groups=4),
    "paper": dict(n_y=64, n_z=72, m=12, groups=4),
}
BEAM_KINDS = ("group-wise-opt", "group-wise-uniform", "random", "wide")
ESTIMATOR_KINDS = ("gw-scvbi", "scvbi", "omp")
AXES = ("snr_db", "k_paths")


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def _list(text: str, cast=str) -> tuple:
    return tuple(cast(item.strip()) for item in text.split(",") if item.strip())


@dataclass(frozen=True)
class EdaSettings:
    q: int = 200
    t: int = 40
    i_max: int = 50
    seed: int = 0
    slack: float = 1.1
    calibration_patterns: int = 200
    region_a: float | None = None
    region_b: float = 1.0
    noise_std: float = 0.18

    def region(self, n_y: int) -> SidelobeRegion:
        a = 4.0 / n_y if self.region_a is None else self.region_a
        return SidelobeRegion(a, self.region_b)


@dataclass(frozen=True)
class ExperimentConfig:
    geometry: UpaGeometry
    prior: VerticalPrior = VerticalPrior()
    groups: int = 4
    beams: tuple[str, ...] = ("group-wise-opt",)
    pattern_path: Path | None = None
    estimators: tuple[str, ...] = ("gw-scvbi",)
    axis: str = "snr_db"
    values: tuple[float, ...] = (10.0,)
    snr_db: float = 5.0
    k_paths: int = 10
    k_expected: int | None = None
    trials: int = 1
    base_seed: int = 0
    beam_seed: int = 0
    gain_profile: str = "los"
    output_dir: Path = Path(".")
    estimator: EstimatorConfig = EstimatorConfig()
    eda: EdaSettings = EdaSettings()
    bench_repetitions: int = 10
    bench_warmups: int = 2
    profile: str | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        for kind in self.beams:
            if kind not in BEAM_KINDS:
                raise ConfigError(f"unknown beam kind {kind!r}; expected one of {BEAM_KINDS}")
        for kind in self.estimators:
            if kind not in ESTIMATOR_KINDS:
                raise ConfigError(f"unknown estimator {kind!r}; expected one of {ESTIMATOR_KINDS}")
        if self.axis not in AXES:
            raise ConfigError(f"sweep axis must be one of {AXES}")
        if not self.values:
            raise ConfigError("sweep needs at least one value")
        if self.groups < 1 or self.groups > self.geometry.n_y:
            raise ConfigError("groups must lie in 1..n_y")

    def points(self) -> list[tuple[float, int]]:
        """(snr_db, k_paths) for each sweep point."""
        if self.axis == "snr_db":
            return [(float(v), self.k_paths) for v in self.values]
        return [(self.snr_db, int(v)) for v in self.values]

    def estimator_for(self, k_paths: int) -> EstimatorConfig:
        from dataclasses import replace

        return replace(self.estimator, k_expected=self.k_expected or k_paths)


def profile_geometry(name: str) -> tuple[UpaGeometry, int]:
    try:
        p = PROFILES[name]
    except KeyError:
        raise ConfigError(f"unknown profile {name!r}; expected one of {tuple(PROFILES)}") from None
    return UpaGeometry(p["n_y"], p["n_z"], p["m"]), p["groups"]


def load_config(path, require_files: bool = True) -> ExperimentConfig:
    """Parse a config file; referenced files must exist when ``require_files``."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.read(path)
    return parse_config(parser, path.parent, require_files)


def parse_config(parser: configparser.ConfigParser, base_dir=Path("."), require_files: bool = True) -> ExperimentConfig:
    def get(section, key, cast=str, default=None):
        if parser.has_option(section, key):
            raw = parser.get(section, key)
            try:
                return cast(raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from None
        return default

    base_dir = Path(base_dir)
    profile = get("experiment", "profile", str, None)
    if profile:
        geom, groups = profile_geometry(profile)
    else:
        geom, groups = None, 4
    n_y = get("geometry", "n_y", int, geom.n_y if geom else None)
    n_z = get("geometry", "n_z", int, geom.n_z if geom else None)
    m = get("geometry", "m", int, geom.m if geom else None)
    if None in (n_y, n_z, m):
        raise ConfigError("geometry needs a profile or explicit n_y, n_z and m")
    geometry = UpaGeometry(n_y, n_z, m)
    phi_lo = get("geometry", "phi_lo_deg", float, -30.0)
    phi_hi = get("geometry", "phi_hi_deg", float, 0.0)
    prior = VerticalPrior.from_angles(np.deg2rad(phi_lo), np.deg2rad(phi_hi))

    pattern = get("beam", "pattern", str, None)
    pattern_path = (base_dir / pattern) if pattern else None
    beams = get("beam", "kinds", _list, ("group-wise-opt",))
    if require_files and "group-wise-opt" in beams:
        if pattern_path is None or not pattern_path.is_file():
            raise ConfigError(f"group-wise-opt beam needs an existing pattern file, got {pattern_path}")

    est = EstimatorConfig(
        j_max=get("estimator", "j_max", int, 30),
        d_joint=get("estimator", "d_joint", int, 5),
        b_steps=get("estimator", "b_steps", int, 3),
        init_step=get("estimator", "init_step", float, 0.01),
        l1=get("estimator", "l1", int, None),
        l2=get("estimator", "l2", int, 64),
    )
    eda = EdaSettings(
        q=get("eda", "q", int, 200),
        t=get("eda", "t", int, 40),
        i_max=get("eda", "i_max", int, 50),
        seed=get("eda", "seed", int, 0),
        slack=get("eda", "slack", float, 1.1),
        calibration_patterns=get("eda", "calibration_patterns", int, 200),
        region_a=get("eda", "region_a", float, None),
        region_b=get("eda", "region_b", float, 1.0),
        noise_std=get("eda", "noise_std", float, 0.18),
    )
    out = get("experiment", "output_dir", str, ".")
    return ExperimentConfig(
        geometry=geometry,
        prior=prior,
        groups=get("beam", "groups", int, groups),
        beams=beams,
        pattern_path=pattern_path,
        estimators=get("estimator", "kinds", _list, ("gw-scvbi",)),
        axis=get("sweep", "axis", str, "snr_db"),
        values=get("sweep", "values", lambda s: _list(s, float), (10.0,)),
        snr_db=get("sweep", "snr_db", float, 5.0),
        k_paths=get("sweep", "k_paths", int, 10),
        k_expected=get("estimator", "k_expected", int, None),
        trials=get("sweep", "trials", int, 1),
        base_seed=get("experiment", "base_seed", int, 0),
        beam_seed=get("beam", "seed", int, 0),
        gain_profile=get("sweep", "gain_profile", str, "los"),
        output_dir=base_dir / out,
        estimator=est,
        eda=eda,
        bench_repetitions=get("bench", "repetitions", int, 10),
        bench_warmups=get("bench", "warmups", int, 2),
        profile=profile,
    )
