"""Trip ingestion: raw record parsing, cleaning filters, transition counting."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime
from typing import Iterable

import numpy as np

from .geo import GeoPoint, StateSpace, hour_of_week, locate

# Rejection reasons, in the order the filters are applied; a record is
# tallied under the first reason it violates.
REJECT_MALFORMED = "malformed"
REJECT_DISTANCE = "distance"
REJECT_TIME = "time"
REJECT_PASSENGERS = "passengers"
REJECT_OUT_OF_AREA = "out_of_area"
REJECT_SELF_LOOP = "self_loop"


@dataclass(frozen=True)
class RawTripRecord:
    pickup_datetime: datetime
    pickup: GeoPoint
    dropoff: GeoPoint
    trip_distance: float
    trip_time_in_secs: float
    passenger_count: int


@dataclass(frozen=True)
class Trip:
    """A cleaned ride: hour-of-week and pickup/dropoff tract indices."""

    hour: int
    pickup_tract: int
    dropoff_tract: int


@dataclass(frozen=True)
class TransitionCounts:
    counts: np.ndarray
    total: int

    def __post_init__(self):
        if int(self.counts.sum()) != self.total:
            raise ValueError("total does not match entry sum")
        if (self.counts < 0).any():
            raise ValueError("negative transition count")
        self.counts.setflags(write=False)


def clean_trips(
    records: Iterable[RawTripRecord],
    space: StateSpace,
    exclude_self_loops: bool = True,
) -> tuple[list[Trip], dict[str, int]]:
    """Apply the cleaning filters and map endpoints to tracts.

    Drops records with non-positive odometer distance, duration, or passenger
    count, records whose endpoints locate outside the state space, and (when
    ``exclude_self_loops``) rides that start and end in the same tract.
    Returns surviving trips in input order plus a per-reason rejection tally;
    ``len(trips) + sum(tally.values())`` always equals the input length.
    Records that blow up during inspection are tallied as malformed.
    """
    if not space.tracts:
        raise ValueError("empty state space")
    trips: list[Trip] = []
    tally: dict[str, int] = {}

    def reject(reason: str):
        tally[reason] = tally.get(reason, 0) + 1

    for rec in records:
        try:
            if not math.isfinite(rec.trip_distance) or rec.trip_distance <= 0:
                reject(REJECT_DISTANCE)
                continue
            if not math.isfinite(rec.trip_time_in_secs) or rec.trip_time_in_secs <= 0:
                reject(REJECT_TIME)
                continue
            if rec.passenger_count <= 0:
                reject(REJECT_PASSENGERS)
                continue
            pickup_tract = locate(rec.pickup, space)
            dropoff_tract = locate(rec.dropoff, space)
            if pickup_tract is None or dropoff_tract is None:
                reject(REJECT_OUT_OF_AREA)
                continue
            if exclude_self_loops and pickup_tract == dropoff_tract:
                reject(REJECT_SELF_LOOP)
                continue
            trips.append(Trip(
                hour=hour_of_week(rec.pickup_datetime),
                pickup_tract=pickup_tract,
                dropoff_tract=dropoff_tract,
            ))
        except Exception:
            reject(REJECT_MALFORMED)
    return trips, tally


def transition_counts(trips: Iterable[Trip], size: int) -> TransitionCounts:
    """Count pickup-to-dropoff transitions into a |S| x |S| integer matrix."""
    counts = np.zeros((size, size), dtype=np.int64)
    total = 0
    for trip in trips:
        if not (0 <= trip.pickup_tract < size and 0 <= trip.dropoff_tract < size):
            raise IndexError(f"trip tract indices {trip.pickup_tract}->{trip.dropoff_tract} "
                             f"out of range for size {size}")
        counts[trip.pickup_tract, trip.dropoff_tract] += 1
        total += 1
    return TransitionCounts(counts=counts, total=total)


TRIPS_HEADER = [
    "pickup_datetime", "pickup_lat", "pickup_lon", "dropoff_lat", "dropoff_lon",
    "trip_distance", "trip_time_in_secs", "passenger_count",
]


def load_raw_trips(path) -> tuple[list[RawTripRecord], int]:
    """Read a trips CSV; returns parsed records plus a malformed-row count.

    Rows that fail to parse (bad timestamp, non-numeric fields, wrong column
    count) are counted, never fatal: large trip files always contain noise.
    """
    records: list[RawTripRecord] = []
    malformed = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRIPS_HEADER:
            raise ValueError(f"{path}: expected header {','.join(TRIPS_HEADER)}")
        for row in reader:
            try:
                records.append(RawTripRecord(
                    pickup_datetime=datetime.fromisoformat(row[0]),
                    pickup=GeoPoint(float(row[1]), float(row[2])),
                    dropoff=GeoPoint(float(row[3]), float(row[4])),
                    trip_distance=float(row[5]),
                    trip_time_in_secs=float(row[6]),
                    passenger_count=int(row[7]),
                ))
            except Exception:
                malformed += 1
    return records, malformed


def write_clean_trips(path, trips: Iterable[Trip]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hour", "pickup_tract", "dropoff_tract"])
        for t in trips:
            writer.writerow([t.hour, t.pickup_tract, t.dropoff_tract])


def load_clean_trips(path) -> list[Trip]:
    trips = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["hour", "pickup_tract", "dropoff_tract"]:
            raise ValueError(f"{path}: not a cleaned-trips file")
        for row in reader:
            trips.append(Trip(int(row[0]), int(row[1]), int(row[2])))
    return trips
