"""Three-way trip tensor and non-negative CP decomposition.

The tensor axes are hour-of-week x pickup tract x dropoff tract. The
decomposition approximates it as a sum of r rank-1 components under a
squared-Frobenius objective, using per-mode multiplicative updates; each
component is one spatio-temporal mobility cluster.

Storage is sparse (coordinate map): real trip tensors are mostly empty and
synthetic test fixtures stay instant. Dense slices are materialized only
hour-by-hour while evaluating the reconstruction error.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .geo import HOURS_PER_WEEK
from .ingest import Trip


@dataclass(frozen=True)
class MobilityTensor:
    """Sparse non-negative count tensor; absent entries are zero."""

    dims: tuple[int, int, int]
    entries: dict[tuple[int, int, int], float]

    def __post_init__(self):
        for (h, p, d), v in self.entries.items():
            if not (0 <= h < self.dims[0] and 0 <= p < self.dims[1] and 0 <= d < self.dims[2]):
                raise IndexError(f"entry ({h},{p},{d}) out of bounds for dims {self.dims}")
            if not v > 0:
                raise ValueError(f"entry ({h},{p},{d}) must be positive, got {v}")

    def entry_sum(self) -> float:
        return float(sum(self.entries.values()))

    def frobenius_norm(self) -> float:
        return float(np.sqrt(sum(v * v for v in self.entries.values())))

    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Coordinate arrays (hours, pickups, dropoffs, values) in canonical order."""
        keys = sorted(self.entries)
        hours = np.fromiter((k[0] for k in keys), dtype=np.intp, count=len(keys))
        pickups = np.fromiter((k[1] for k in keys), dtype=np.intp, count=len(keys))
        dropoffs = np.fromiter((k[2] for k in keys), dtype=np.intp, count=len(keys))
        values = np.fromiter((self.entries[k] for k in keys), dtype=np.float64, count=len(keys))
        return hours, pickups, dropoffs, values


def build_tensor(trips: Iterable[Trip], size: int) -> MobilityTensor:
    """Accumulate trips into the hour x pickup x dropoff count tensor."""
    entries: dict[tuple[int, int, int], float] = {}
    for t in trips:
        if not 0 <= t.hour < HOURS_PER_WEEK:
            raise IndexError(f"hour {t.hour} out of range")
        if not (0 <= t.pickup_tract < size and 0 <= t.dropoff_tract < size):
            raise IndexError(f"tract indices {t.pickup_tract}->{t.dropoff_tract} "
                             f"out of range for size {size}")
        key = (t.hour, t.pickup_tract, t.dropoff_tract)
        entries[key] = entries.get(key, 0.0) + 1.0
    return MobilityTensor(dims=(HOURS_PER_WEEK, size, size), entries=entries)


@dataclass(frozen=True)
class FactorSet:
    """Rank-r non-negative CP factors, one matrix per mode.

    Columns carry unit L1 norm; all magnitude lives in ``scale`` so component
    weights are directly comparable. A collapsed component keeps a uniform
    column with zero scale.
    """

    r: int
    time: np.ndarray
    pickup: np.ndarray
    dropoff: np.ndarray
    scale: np.ndarray

    def __post_init__(self):
        for name, m in (("time", self.time), ("pickup", self.pickup), ("dropoff", self.dropoff)):
            if m.shape[1] != self.r:
                raise ValueError(f"{name} factor has {m.shape[1]} columns, expected r={self.r}")
            if not np.isfinite(m).all() or (m < 0).any():
                raise ValueError(f"{name} factor entries must be finite and >= 0")
            colsums = m.sum(axis=0)
            if np.abs(colsums - 1.0).max() > 1e-9:
                raise ValueError(f"{name} factor columns are not L1-normalized")
            m.setflags(write=False)
        if self.scale.shape != (self.r,) or (self.scale < 0).any():
            raise ValueError("scale must be a non-negative r-vector")
        self.scale.setflags(write=False)

    def factors(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.time, self.pickup, self.dropoff


@dataclass(frozen=True)
class NtfOptions:
    seed: int = 42
    max_iters: int = 500
    rel_tol: float = 1e-6
    epsilon: float = 1e-12


@dataclass
class DecompositionTrace:
    """Objective history; errors[0] is the error of the random initialization."""

    errors: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    overcomplete: bool = False


def _mttkrp(coords, vals, factors, mode, dims):
    """Matricized-tensor-times-Khatri-Rao product for one mode, from sparse coords."""
    others = [m for m in range(3) if m != mode]
    contrib = vals[:, None] * factors[others[0]][coords[others[0]]] * factors[others[1]][coords[others[1]]]
    out = np.zeros((dims[mode], factors[0].shape[1]))
    np.add.at(out, coords[mode], contrib)
    return out


def _normalize_columns(scaled: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a non-negative matrix into L1-unit columns and their norms.

    Collapsed (all-zero) columns become uniform so the unit-norm invariant
    holds; their norm is zero, so the reconstruction is unaffected.
    """
    norms = scaled.sum(axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    normalized = scaled / safe
    dead = norms == 0
    if dead.any():
        normalized[:, dead] = 1.0 / scaled.shape[0]
    return normalized, norms


def _error_from_slices(coords, vals, dims, factors, scale) -> float:
    """Exact Frobenius reconstruction error, accumulated hour slice by hour slice.

    Dense evaluation per slice keeps the value cancellation-free, so the
    recorded objective trace stays monotone to within float noise that
    shrinks with the error itself.
    """
    hours, pickups, dropoffs = coords
    tfac, pfac, dfac = factors
    order = np.argsort(hours, kind="stable")
    hours_s, pickups_s, dropoffs_s, vals_s = hours[order], pickups[order], dropoffs[order], vals[order]
    boundaries = np.searchsorted(hours_s, np.arange(dims[0] + 1))
    err2 = 0.0
    for h in range(dims[0]):
        weights = scale * tfac[h]
        model = (pfac * weights) @ dfac.T
        lo, hi = boundaries[h], boundaries[h + 1]
        if hi > lo:
            slice_dense = np.zeros((dims[1], dims[2]))
            slice_dense[pickups_s[lo:hi], dropoffs_s[lo:hi]] = vals_s[lo:hi]
            err2 += float(((slice_dense - model) ** 2).sum())
        else:
            err2 += float((model ** 2).sum())
    return float(np.sqrt(max(err2, 0.0)))


def reconstruction_error(x: MobilityTensor, f: FactorSet) -> float:
    """Frobenius norm of the difference between the tensor and its CP model."""
    if (x.dims[0], x.dims[1], x.dims[2]) != (f.time.shape[0], f.pickup.shape[0], f.dropoff.shape[0]):
        raise ValueError(f"tensor dims {x.dims} do not match factor shapes")
    hours, pickups, dropoffs, vals = x.coords()
    return _error_from_slices((hours, pickups, dropoffs), vals, x.dims,
                              (f.time, f.pickup, f.dropoff), f.scale)


def ntf_decompose(x: MobilityTensor, r: int,
                  opts: NtfOptions = NtfOptions()) -> tuple[FactorSet, DecompositionTrace]:
    """Rank-r non-negative CP decomposition by multiplicative updates.

    Each sweep updates one mode at a time: the scale vector is absorbed into
    the mode being updated, the factor is rescaled by the ratio of the sparse
    MTTKRP to the Gram-matrix denominator (floored at ``opts.epsilon``), and
    the columns are L1-renormalized with the magnitude swept back into scale.
    Per-mode updates never increase the squared-Frobenius objective, so the
    recorded error trace is non-increasing. Deterministic for a fixed seed.

    Stops when the relative error change drops below ``opts.rel_tol`` or
    after ``opts.max_iters`` sweeps. r above min(dims) is allowed but flagged
    as over-complete in the trace.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    if opts.max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    if not x.entries:
        raise ValueError("degenerate input: tensor has no nonzero entries")

    dims = x.dims
    hours, pickups, dropoffs, vals = x.coords()
    coords = (hours, pickups, dropoffs)

    rng = np.random.default_rng(opts.seed)
    factors = []
    scale = np.ones(r)
    for dim in dims:
        raw = 1.0 - rng.random((dim, r))  # uniform in (0, 1]
        normalized, norms = _normalize_columns(raw)
        factors.append(normalized)
        scale *= norms

    trace = DecompositionTrace(overcomplete=r > min(dims))
    trace.errors.append(_error_from_slices(coords, vals, dims, factors, scale))
    norm_x = x.frobenius_norm()

    grams = [f.T @ f for f in factors]
    for iteration in range(opts.max_iters):
        for mode in range(3):
            scaled = factors[mode] * scale
            numerator = _mttkrp(coords, vals, factors, mode, dims)
            gram = np.ones((r, r))
            for m in range(3):
                if m != mode:
                    gram *= grams[m]
            denominator = scaled @ gram
            scaled *= numerator / np.maximum(denominator, opts.epsilon)
            factors[mode], scale = _normalize_columns(scaled)
            grams[mode] = factors[mode].T @ factors[mode]

        err = _error_from_slices(coords, vals, dims, factors, scale)
        trace.errors.append(err)
        trace.iterations = iteration + 1
        prev = trace.errors[-2]
        if abs(prev - err) <= opts.rel_tol * norm_x:  # change in relative error
            trace.converged = True
            break

    factor_set = FactorSet(r=r, time=factors[0], pickup=factors[1],
                           dropoff=factors[2], scale=scale)
    return factor_set, trace


# --- serialization -----------------------------------------------------------

_MODE_FILES = {"time": "factors_time.csv", "pickup": "factors_pickup.csv",
               "dropoff": "factors_dropoff.csv"}


def save_factors(directory, f: FactorSet, *, seed: int,
                 trace: Optional[DecompositionTrace] = None) -> None:
    """Write one CSV per mode plus the scale vector and a metadata sidecar."""
    for mode, filename in _MODE_FILES.items():
        matrix = getattr(f, mode)
        with open(directory / filename, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", *(f"c{c}" for c in range(f.r))])
            for i in range(matrix.shape[0]):
                writer.writerow([i, *(repr(float(v)) for v in matrix[i])])
    with open(directory / "factors_scale.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "scale"])
        for c in range(f.r):
            writer.writerow([c, repr(float(f.scale[c]))])
    meta = {"r": f.r, "seed": seed}
    if trace is not None:
        meta.update({
            "iterations": trace.iterations,
            "final_error": trace.errors[-1],
            "converged": trace.converged,
            "overcomplete": trace.overcomplete,
        })
    with open(directory / "factors_meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_factors(directory) -> FactorSet:
    matrices = {}
    for mode, filename in _MODE_FILES.items():
        rows = []
        with open(directory / filename, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                rows.append([float(v) for v in row[1:]])
        matrices[mode] = np.array(rows)
    with open(directory / "factors_scale.csv", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        next(reader)
        scale = np.array([float(row[1]) for row in reader])
    return FactorSet(r=len(scale), time=matrices["time"], pickup=matrices["pickup"],
                     dropoff=matrices["dropoff"], scale=scale)
