"""Belief matrices over tract transitions.

Each hypothesis is a non-negative matrix q where q[i, j] expresses relative
belief in moving from tract i to tract j. Ten families are supported:
uniform, inverse distance, Gaussian proximity/landmark kernels, destination
mass (density or popularity), gravitational attraction (target-only and
origin-times-target), rank distance, intervening opportunities, and feature
cosine similarity. Diagonals are always zeroed: same-tract hops carry no
mobility information and are excluded from the data side as well.

Only relative row shape matters downstream; the prior elicitation row-
normalizes every matrix, so any row scaling is neutral by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .geo import GeoPoint, StateSpace, haversine_distance


class CatalogConfigError(ValueError):
    """Raised when the catalog configuration references unavailable data."""


@dataclass(frozen=True)
class HypothesisMatrix:
    name: str
    q: np.ndarray

    def __post_init__(self):
        if self.q.ndim != 2 or self.q.shape[0] != self.q.shape[1]:
            raise ValueError(f"{self.name}: belief matrix must be square")
        if np.diagonal(self.q).any():
            raise ValueError(f"{self.name}: diagonal must be zero")
        if not np.isfinite(self.q).all() or (self.q < 0).any():
            raise ValueError(f"{self.name}: entries must be finite and >= 0")
        if not self.q.any():
            raise ValueError(f"{self.name}: belief matrix is all zero")
        self.q.setflags(write=False)


@dataclass(frozen=True)
class WeightVector:
    """A per-tract mass term drawn from one tract property."""

    name: str
    w: np.ndarray

    def __post_init__(self):
        if self.w.ndim != 1:
            raise ValueError(f"{self.name}: weights must be a vector")
        if not np.isfinite(self.w).all() or (self.w < 0).any():
            raise ValueError(f"{self.name}: weights must be finite and >= 0")


@dataclass(frozen=True)
class FeatureVectors:
    """One feature vector per tract, all sharing a dimension (e.g. venue mix)."""

    name: str
    vectors: np.ndarray

    def __post_init__(self):
        if self.vectors.ndim != 2 or self.vectors.shape[1] < 1:
            raise ValueError(f"{self.name}: expected an |S| x d matrix with d >= 1")
        if not np.isfinite(self.vectors).all() or (self.vectors < 0).any():
            raise ValueError(f"{self.name}: features must be finite and >= 0")


def _finish(name: str, q: np.ndarray) -> HypothesisMatrix:
    np.fill_diagonal(q, 0.0)
    return HypothesisMatrix(name=name, q=q)


def _check_weights(space: StateSpace, w: WeightVector) -> np.ndarray:
    if len(w.w) != len(space):
        raise ValueError(f"{w.name}: weight length {len(w.w)} != |S| = {len(space)}")
    return np.asarray(w.w, dtype=float)


def build_uniform(size: int, name: str = "uniform") -> HypothesisMatrix:
    """Every distinct tract equally likely next."""
    if size < 2:
        raise ValueError("uniform hypothesis needs |S| >= 2")
    return _finish(name, np.ones((size, size)))


def build_inverse_distance(space: StateSpace, name: str = "inverse_distance") -> HypothesisMatrix:
    """Belief decays as 1/distance; nearer targets are more plausible."""
    q = np.zeros((len(space), len(space)))
    off = ~np.eye(len(space), dtype=bool)
    q[off] = 1.0 / space.distances[off]
    return _finish(name, q)


def build_gaussian(space: StateSpace, sigma: float,
                   center: Optional[GeoPoint] = None,
                   name: Optional[str] = None) -> HypothesisMatrix:
    """Gaussian distance kernel with standard deviation ``sigma`` km.

    Without ``center`` (proximity mode), belief in j from i follows a
    Gaussian in dist(i, j). With a fixed landmark ``center``, belief in j
    follows a Gaussian in the landmark-to-j distance and every row is
    identical. The diagonal is zeroed after evaluation in both modes.
    """
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    coef = 1.0 / (sigma * math.sqrt(2.0 * math.pi))
    if center is None:
        q = coef * np.exp(-space.distances ** 2 / (2.0 * sigma ** 2))
        return _finish(name or f"proximity_sigma_{sigma:g}", q)
    dist = np.array([haversine_distance(center, t.centroid) for t in space.tracts])
    row = coef * np.exp(-dist ** 2 / (2.0 * sigma ** 2))
    q = np.tile(row, (len(space), 1))
    return _finish(name or f"centroid_sigma_{sigma:g}", q)


def build_mass(space: StateSpace, w: WeightVector, variant: str,
               name: Optional[str] = None) -> HypothesisMatrix:
    """Destination-mass families.

    density / popularity: belief proportional to the target's mass alone.
    gravitational_target: target mass over distance.
    gravitational_mass: origin times target mass over distance.
    """
    weights = _check_weights(space, w)
    n = len(space)
    dist_safe = space.distances + np.eye(n)  # diagonal discarded below
    if variant in ("density", "popularity"):
        q = np.tile(weights, (n, 1))
    elif variant == "gravitational_target":
        q = weights[None, :] / dist_safe
    elif variant == "gravitational_mass":
        q = np.outer(weights, weights) / dist_safe
    else:
        raise ValueError(f"unknown mass variant {variant!r}")
    return _finish(name or f"{variant}_{w.name}", q)


def build_rank_distance(space: StateSpace, w: WeightVector,
                        name: Optional[str] = None,
                        unweighted: bool = False) -> HypothesisMatrix:
    """Belief inversely proportional to the mass lying closer than the target.

    rank(i, j) sums the weights of tracts u != i strictly closer to i than j
    is; empty sums clamp to 1 so the nearest target keeps belief 1. With
    ``unweighted`` every tract counts 1 instead of its weight.
    """
    weights = np.ones(len(space)) if unweighted else _check_weights(space, w)
    n = len(space)
    q = np.zeros((n, n))
    for i in range(n):
        row_d = space.distances[i]
        closer = row_d[None, :] < row_d[:, None]  # [j, u]: u strictly closer than j
        closer[:, i] = False
        rank = closer @ weights
        q[i] = 1.0 / np.maximum(rank, 1.0)
    return _finish(name or f"rank_distance_{w.name}", q)


def build_intervening_opportunities(space: StateSpace, w: WeightVector,
                                    eps: float = 1e-9,
                                    name: Optional[str] = None,
                                    unweighted: bool = False) -> HypothesisMatrix:
    """Opportunities at the target's distance over opportunities in between.

    The numerator sums weights of tracts u != i whose distance from i matches
    dist(i, j) within ``eps`` km; the denominator sums weights strictly closer
    than dist(i, j) - eps, clamped to 1. Continuous distances almost never tie
    exactly, hence the tolerance.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    weights = np.ones(len(space)) if unweighted else _check_weights(space, w)
    n = len(space)
    q = np.zeros((n, n))
    for i in range(n):
        row_d = space.distances[i]
        gap = row_d[None, :] - row_d[:, None]  # [j, u]: dist(i,u) - dist(i,j)
        at_distance = np.abs(gap) <= eps
        closer = gap < -eps
        at_distance[:, i] = False
        closer[:, i] = False
        numerator = at_distance @ weights
        denominator = closer @ weights
        q[i] = numerator / np.maximum(denominator, 1.0)
    return _finish(name or f"intervening_opportunities_{w.name}", q)


def build_cosine_similarity(features: FeatureVectors,
                            name: Optional[str] = None) -> HypothesisMatrix:
    """Belief from the cosine of origin and target feature vectors.

    Zero-norm feature vectors contribute zero belief; the downstream prior
    smoothing keeps such rows proper.
    """
    v = np.asarray(features.vectors, dtype=float)
    norms = np.linalg.norm(v, axis=1)
    q = v @ v.T
    safe = np.where(norms > 0, norms, 1.0)
    q /= np.outer(safe, safe)
    q[norms == 0, :] = 0.0
    q[:, norms == 0] = 0.0
    return _finish(name or f"cosine_{features.name}", q)


# --- default catalog ----------------------------------------------------------

DEFAULT_SIGMA_GRID = (0.01, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0)

DEFAULT_LANDMARKS = (
    ("manhattan_center", GeoPoint(40.79090, -73.96640)),
    ("flatiron", GeoPoint(40.74111, -73.98972)),
    ("times_square", GeoPoint(40.75773, -73.98570)),
)

VENUE_CATEGORY_KEYS = (
    "venues_arts", "venues_education", "venues_food", "venues_nightlife",
    "venues_outdoors", "venues_work", "venues_residence", "venues_shop",
    "venues_travel", "venues_church",
)

CENSUS_INDICATOR_KEYS = (
    "population", "tract_area",
    "pct_white", "pct_black", "pct_labor_force", "pct_unemployed",
    "pct_below_poverty", "pct_above_poverty",
    "libraries", "art_galleries", "theaters", "museums",
    "wifi_hotspots", "places_of_interest",
    "residential_zoning", "commercial_zoning", "manufacturing_zoning",
    "park_properties", "historic_districts", "empower_zones",
)

RACE_FEATURE_KEYS = (
    "pct_white", "pct_black", "pct_american_indian", "pct_asian",
    "pct_pacific_islander", "pct_other_race", "pct_two_races",
)

POVERTY_FEATURE_KEYS = ("pct_below_poverty", "pct_above_poverty")

EMPLOYMENT_FEATURE_KEYS = ("pct_employed", "pct_unemployed", "pct_labor_force")


@dataclass(frozen=True)
class CatalogConfig:
    """Parameters of the default hypothesis catalog.

    The defaults build exactly 70 hypotheses: 1 uniform, 29 distance-based
    (inverse distance, plus proximity and one kernel per landmark over the
    sigma grid), 17 venue-derived, and 23 census-derived.
    """

    landmarks: tuple[tuple[str, GeoPoint], ...] = DEFAULT_LANDMARKS
    sigma_grid: tuple[float, ...] = DEFAULT_SIGMA_GRID
    all_venues_key: str = "venues_all"
    checkins_key: str = "checkins"
    venue_category_keys: tuple[str, ...] = VENUE_CATEGORY_KEYS
    census_indicator_keys: tuple[str, ...] = CENSUS_INDICATOR_KEYS
    race_keys: tuple[str, ...] = RACE_FEATURE_KEYS
    poverty_keys: tuple[str, ...] = POVERTY_FEATURE_KEYS
    employment_keys: tuple[str, ...] = EMPLOYMENT_FEATURE_KEYS
    io_eps: float = 1e-9
    unweighted_opportunities: bool = False

    def with_landmarks(self, landmarks) -> "CatalogConfig":
        return replace(self, landmarks=tuple(landmarks))

    def required_keys(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for key in ((self.all_venues_key, self.checkins_key)
                    + self.venue_category_keys + self.census_indicator_keys
                    + self.race_keys + self.poverty_keys + self.employment_keys):
            seen.setdefault(key)
        return tuple(seen)


def _weight(space: StateSpace, key: str) -> WeightVector:
    try:
        return WeightVector(name=key, w=space.property_vector(key))
    except KeyError as exc:
        raise CatalogConfigError(f"catalog requires property {key!r}: {exc}") from exc


def _features(space: StateSpace, name: str, keys: Sequence[str]) -> FeatureVectors:
    columns = [_weight(space, key).w for key in keys]
    return FeatureVectors(name=name, vectors=np.column_stack(columns))


def build_catalog(space: StateSpace, config: CatalogConfig = CatalogConfig()) -> list[HypothesisMatrix]:
    """Materialize the full hypothesis catalog for one state space.

    Names are deterministic and unique; a missing tract property raises
    CatalogConfigError naming the offending key.
    """
    catalog: list[HypothesisMatrix] = [build_uniform(len(space))]

    catalog.append(build_inverse_distance(space))
    for sigma in config.sigma_grid:
        catalog.append(build_gaussian(space, sigma))
    for landmark_name, point in config.landmarks:
        for sigma in config.sigma_grid:
            catalog.append(build_gaussian(space, sigma, center=point,
                                          name=f"centroid_{landmark_name}_sigma_{sigma:g}"))

    all_venues = _weight(space, config.all_venues_key)
    checkins = _weight(space, config.checkins_key)
    catalog.append(build_mass(space, all_venues, "density"))
    catalog.append(build_mass(space, checkins, "popularity"))
    catalog.append(build_mass(space, all_venues, "gravitational_mass"))
    catalog.append(build_mass(space, all_venues, "gravitational_target"))
    catalog.append(build_rank_distance(space, all_venues,
                                       unweighted=config.unweighted_opportunities))
    catalog.append(build_intervening_opportunities(space, all_venues, eps=config.io_eps,
                                                   unweighted=config.unweighted_opportunities))
    for key in config.venue_category_keys:
        catalog.append(build_mass(space, _weight(space, key), "gravitational_target"))
    catalog.append(build_cosine_similarity(
        _features(space, "venue_categories", config.venue_category_keys)))

    for key in config.census_indicator_keys:
        catalog.append(build_mass(space, _weight(space, key), "gravitational_target"))
    catalog.append(build_cosine_similarity(_features(space, "race", config.race_keys)))
    catalog.append(build_cosine_similarity(_features(space, "poverty", config.poverty_keys)))
    catalog.append(build_cosine_similarity(_features(space, "employment", config.employment_keys)))

    names = [h.name for h in catalog]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise CatalogConfigError(f"duplicate hypothesis names in catalog: {dupes}")
    return catalog
