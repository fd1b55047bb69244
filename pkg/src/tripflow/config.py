"""Pipeline configuration: defaults, config-file parsing, environment overrides.

The config file is INI-style with three sections. ``[paths]`` holds tracts,
trips, and output_dir; ``[pipeline]`` holds the numeric knobs (named exactly
as the PipelineConfig fields); ``[catalog]`` optionally overrides the
hypothesis catalog (landmarks, sigma grid, property-key lists, eps). Every
default reproduces the values baked into the library: r=7 components, top-10
selection, k grid {0,1,5,10,50,100}, the seven-value sigma grid, seed 42.

Path entries can also come from the environment: TRIPFLOW_TRACTS,
TRIPFLOW_TRIPS, and TRIPFLOW_OUTPUT_DIR override the file when set.
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .evidence import DEFAULT_K_GRID
from .geo import GeoPoint
from .hypotheses import CatalogConfig, DEFAULT_SIGMA_GRID
from .tensor import NtfOptions


class ConfigError(ValueError):
    """Raised for unreadable config files, unknown keys, or bad values."""


@dataclass(frozen=True)
class PipelineConfig:
    tracts: Optional[Path] = None
    trips: Optional[Path] = None
    output_dir: Optional[Path] = None
    r: int = 7
    n: int = 10
    k_grid: tuple[float, ...] = DEFAULT_K_GRID
    sigma_grid: tuple[float, ...] = DEFAULT_SIGMA_GRID
    seed: int = 42
    max_iters: int = 500
    rel_tol: float = 1e-6
    epsilon: float = 1e-12
    exclude_self_loops: bool = True
    catalog: CatalogConfig = field(default_factory=CatalogConfig)

    def ntf_options(self) -> NtfOptions:
        return NtfOptions(seed=self.seed, max_iters=self.max_iters,
                          rel_tol=self.rel_tol, epsilon=self.epsilon)

    def catalog_config(self) -> CatalogConfig:
        return replace(self.catalog, sigma_grid=self.sigma_grid)


_PATH_KEYS = ("tracts", "trips", "output_dir")
_PIPELINE_KEYS = ("r", "n", "k_grid", "sigma_grid", "seed", "max_iters",
                  "rel_tol", "epsilon", "exclude_self_loops")
_CATALOG_KEYS = ("landmarks", "sigma_grid", "all_venues_key", "checkins_key",
                 "venue_category_keys", "census_indicator_keys", "race_keys",
                 "poverty_keys", "employment_keys", "io_eps",
                 "unweighted_opportunities")


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _names(text: str) -> tuple[str, ...]:
    return tuple(text.replace(",", " ").split())


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _landmarks(text: str) -> tuple[tuple[str, GeoPoint], ...]:
    landmarks = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split()
        if len(parts) != 3:
            raise ConfigError(f"landmark {chunk!r} must be 'name lat lon'")
        landmarks.append((parts[0], GeoPoint(float(parts[1]), float(parts[2]))))
    if not landmarks:
        raise ConfigError("landmarks entry is empty")
    return tuple(landmarks)


def _check_keys(where: str, seen, allowed) -> None:
    unknown = sorted(set(seen) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def load_config(path: Optional[Path] = None, **overrides) -> PipelineConfig:
    """Build a PipelineConfig from an optional file plus keyword overrides.

    Precedence, lowest to highest: built-in defaults, config file,
    environment path variables, explicit overrides (CLI flags).
    """
    values: dict = {}
    catalog = CatalogConfig()

    if path is not None:
        if not Path(path).is_file():
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser()
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
        _check_keys("the config file", parser.sections(), ("paths", "pipeline", "catalog"))

        if parser.has_section("paths"):
            _check_keys("[paths]", parser.options("paths"), _PATH_KEYS)
            for key in _PATH_KEYS:
                if parser.has_option("paths", key):
                    values[key] = Path(parser.get("paths", key))
        if parser.has_section("pipeline"):
            section = parser["pipeline"]
            _check_keys("[pipeline]", section.keys(), _PIPELINE_KEYS)
            try:
                if "r" in section:
                    values["r"] = int(section["r"])
                if "n" in section:
                    values["n"] = int(section["n"])
                if "seed" in section:
                    values["seed"] = int(section["seed"])
                if "max_iters" in section:
                    values["max_iters"] = int(section["max_iters"])
                if "rel_tol" in section:
                    values["rel_tol"] = float(section["rel_tol"])
                if "epsilon" in section:
                    values["epsilon"] = float(section["epsilon"])
                if "k_grid" in section:
                    values["k_grid"] = _floats(section["k_grid"])
                if "sigma_grid" in section:
                    values["sigma_grid"] = _floats(section["sigma_grid"])
                if "exclude_self_loops" in section:
                    values["exclude_self_loops"] = _bool(section["exclude_self_loops"])
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"bad value in [pipeline]: {exc}") from exc
        if parser.has_section("catalog"):
            section = parser["catalog"]
            _check_keys("[catalog]", section.keys(), _CATALOG_KEYS)
            try:
                kwargs: dict = {}
                if "landmarks" in section:
                    kwargs["landmarks"] = _landmarks(section["landmarks"])
                if "sigma_grid" in section:
                    kwargs["sigma_grid"] = _floats(section["sigma_grid"])
                for key in ("all_venues_key", "checkins_key"):
                    if key in section:
                        kwargs[key] = section[key].strip()
                for key in ("venue_category_keys", "census_indicator_keys",
                            "race_keys", "poverty_keys", "employment_keys"):
                    if key in section:
                        kwargs[key] = _names(section[key])
                if "io_eps" in section:
                    kwargs["io_eps"] = float(section["io_eps"])
                if "unweighted_opportunities" in section:
                    kwargs["unweighted_opportunities"] = _bool(section["unweighted_opportunities"])
                catalog = replace(catalog, **kwargs)
                if "sigma_grid" in kwargs and "sigma_grid" not in values:
                    values["sigma_grid"] = kwargs["sigma_grid"]
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"bad value in [catalog]: {exc}") from exc

    for key, env in (("tracts", "TRIPFLOW_TRACTS"), ("trips", "TRIPFLOW_TRIPS"),
                     ("output_dir", "TRIPFLOW_OUTPUT_DIR")):
        if os.environ.get(env):
            values[key] = Path(os.environ[env])

    known = {f.name for f in fields(PipelineConfig)}
    for key, value in overrides.items():
        if key not in known:
            raise ConfigError(f"unknown config override {key!r}")
        if value is not None:
            values[key] = value

    values.setdefault("catalog", catalog)
    config = PipelineConfig(**values)
    if config.r < 1:
        raise ConfigError("r must be >= 1")
    if config.n < 1:
        raise ConfigError("n must be >= 1")
    if any(k < 0 for k in config.k_grid):
        raise ConfigError("k values must be >= 0")
    if any(s <= 0 for s in config.sigma_grid):
        raise ConfigError("sigma values must be > 0")
    return config
