"""Cluster extraction: turn CP components into concrete trip subsets.

A component does not partition the trips; it assigns weights. Following the
top-N reading, a cluster is the set of trips whose hour is among the
component's top-N time weights and whose dropoff tract is among its top-N
dropoff weights. Pickup tracts are deliberately unconstrained: the question
is where people go, not where they come from. Clusters may overlap.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .ingest import Trip, TransitionCounts, transition_counts
from .tensor import FactorSet


@dataclass(frozen=True)
class ClusterSpec:
    component: int
    top_hours: frozenset[int]
    top_dropoffs: frozenset[int]
    n: int

    def __post_init__(self):
        if len(self.top_hours) > self.n or len(self.top_dropoffs) > self.n:
            raise ValueError("selection sets exceed n")


def top_indices(column: Sequence[float], n: int) -> list[int]:
    """Indices of the n largest weights, descending; ties go to the lower index."""
    if n < 1:
        raise ValueError("n must be >= 1")
    weights = np.asarray(column, dtype=float)
    if weights.size == 0:
        raise ValueError("empty weight vector")
    ranked = sorted(range(weights.size), key=lambda i: (-weights[i], i))
    return ranked[:n]


def cluster_spec(f: FactorSet, component: int, n: int) -> ClusterSpec:
    """Top-n hours and dropoff tracts of one component's factor columns."""
    if not 0 <= component < f.r:
        raise IndexError(f"component {component} out of range for r={f.r}")
    return ClusterSpec(
        component=component,
        top_hours=frozenset(top_indices(f.time[:, component], n)),
        top_dropoffs=frozenset(top_indices(f.dropoff[:, component], n)),
        n=n,
    )


def select_cluster_trips(trips: Iterable[Trip], spec: ClusterSpec) -> list[Trip]:
    """Trips whose hour and dropoff tract both fall in the spec's top sets."""
    return [t for t in trips
            if t.hour in spec.top_hours and t.dropoff_tract in spec.top_dropoffs]


def cluster_counts(trips: Sequence[Trip], f: FactorSet, component: int,
                   n: int, size: int) -> TransitionCounts:
    """Transition counts restricted to one component's cluster."""
    spec = cluster_spec(f, component, n)
    return transition_counts(select_cluster_trips(trips, spec), size)


def write_membership(path, f: FactorSet, component: int, n: int) -> None:
    """Export one component's selected hours and dropoff tracts with weights."""
    spec = cluster_spec(f, component, n)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["kind", "index", "weight"])
        for h in top_indices(f.time[:, component], n):
            writer.writerow(["hour", h, repr(float(f.time[h, component]))])
        for d in top_indices(f.dropoff[:, component], n):
            writer.writerow(["dropoff", d, repr(float(f.dropoff[d, component]))])
