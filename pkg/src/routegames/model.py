"""Canonical data model for commuter trips.

Trips are immutable after construction; every operation here is a pure
function, safe to call concurrently. Validation reports problems instead of
raising so that ingestion can collect rejects without aborting.
"""

from __future__ import annotations

import datetime
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

from .errors import InputError


class Mode(Enum):
    METRO = "metro"
    BUS = "bus"
    CAR = "car"

    @property
    def is_public(self) -> bool:
        return self in (Mode.METRO, Mode.BUS)

    @property
    def mode_class(self) -> str:
        """Coarse grouping: 'public' (metro, bus) or 'private' (car)."""
        return "public" if self.is_public else "private"


# Fixed tie-break order for principal_mode: Metro < Bus < Car.
_MODE_ORDER = {Mode.METRO: 0, Mode.BUS: 1, Mode.CAR: 2}


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise InputError(f"non-finite coordinates ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise InputError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise InputError(f"longitude {self.lon} outside [-180, 180]")


@dataclass(frozen=True)
class TripPoint:
    t: float  # seconds, epoch clock of the dataset's local timezone
    loc: GeoPoint


@dataclass(frozen=True)
class TripRecord:
    trip_id: str
    student_id: str
    day: datetime.date
    school_id: str
    mode: Mode
    points: tuple[TripPoint, ...]
    per_mode_distance: Mapping[Mode, float] | None = None

    @property
    def origin(self) -> GeoPoint:
        return self.points[0].loc

    @property
    def destination(self) -> GeoPoint:
        return self.points[-1].loc

    @property
    def duration(self) -> float:
        """Trip duration in seconds (last timestamp minus first)."""
        return self.points[-1].t - self.points[0].t

    @property
    def depart_time(self) -> float:
        """Departure as seconds-of-day on the dataset's local clock."""
        return self.points[0].t % 86400.0


@dataclass(frozen=True)
class Dataset:
    trips: tuple[TripRecord, ...]
    schools: Mapping[str, GeoPoint]

    def __post_init__(self) -> None:
        seen = set()
        for trip in self.trips:
            if trip.trip_id in seen:
                raise InputError(f"duplicate trip_id {trip.trip_id!r}")
            seen.add(trip.trip_id)
            if trip.school_id not in self.schools:
                raise InputError(
                    f"trip {trip.trip_id!r} references unknown school {trip.school_id!r}"
                )


@dataclass
class ValidationReport:
    trip_id: str
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_trip(trip: TripRecord) -> ValidationReport:
    """Check every TripRecord invariant; empty report iff the trip is valid.

    Never raises: all problems are listed in the report.
    """
    report = ValidationReport(trip_id=trip.trip_id)
    if len(trip.points) < 2:
        report.violations.append("points: fewer than 2 points")
    ts = [p.t for p in trip.points]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        report.violations.append("timestamps: not strictly increasing")
    if len(trip.points) >= 2 and trip.duration <= 0:
        report.violations.append("duration: not positive")
    if trip.per_mode_distance is not None:
        if any(d < 0 for d in trip.per_mode_distance.values()):
            report.violations.append("per_mode_distance: negative distance")
    return report


def _nearest_rank(sorted_values: Sequence[float], pct: float) -> float:
    """Nearest-rank percentile over a sorted sequence; pct = 0 means the minimum."""
    n = len(sorted_values)
    if pct <= 0:
        return sorted_values[0]
    rank = math.ceil(pct / 100.0 * n)
    return sorted_values[min(rank, n) - 1]


def trim_percentiles(
    trips: Sequence[TripRecord],
    low_pct: float = 5.0,
    high_pct: float = 95.0,
) -> list[TripRecord]:
    """Drop trips whose duration falls outside the [low, high] percentile band.

    Percentiles use the nearest-rank method over the input durations; the
    retained trips keep their input order. Single pass: percentiles are not
    recomputed on the filtered output.
    """
    if not trips:
        raise InputError("empty dataset")
    if not (0 <= low_pct < high_pct <= 100):
        raise InputError(f"bad percentile bounds ({low_pct}, {high_pct})")
    durations = sorted(t.duration for t in trips)
    lo = _nearest_rank(durations, low_pct)
    hi = _nearest_rank(durations, high_pct)
    return [t for t in trips if lo <= t.duration <= hi]


def principal_mode(trip: TripRecord) -> Mode:
    """Mode with the longest per-mode distance; ties break Metro < Bus < Car."""
    dists = trip.per_mode_distance
    if not dists:
        raise InputError(f"trip {trip.trip_id!r}: no mode distances")
    return max(dists, key=lambda m: (dists[m], -_MODE_ORDER[m]))


def effective_mode(trip: TripRecord) -> Mode:
    """Principal mode when distances are available, else the ingested label."""
    if trip.per_mode_distance:
        return principal_mode(trip)
    return trip.mode
