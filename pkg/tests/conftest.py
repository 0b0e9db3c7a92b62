"""Shared helpers: quick constructors for trips and independent oracles."""

from __future__ import annotations

import datetime
import math

import pytest

from routegames.model import GeoPoint, Mode, TripPoint, TripRecord

DAY0 = datetime.date(2016, 4, 11)
SINGAPORE = GeoPoint(1.3521, 103.8198)


def make_trip(
    trip_id="t1",
    student_id="s1",
    day=DAY0,
    school_id="sch1",
    mode=Mode.CAR,
    origin=SINGAPORE,
    duration_s=1200.0,
    depart_s=8 * 3600.0,
    dest=None,
    route=None,
    per_mode_distance=None,
    n_points=2,
):
    """Trip with evenly spaced timestamps along a straight (or given) route."""
    if route is None:
        if dest is None:
            dest = GeoPoint(origin.lat + 0.02, origin.lon + 0.02)
        route = [
            GeoPoint(
                origin.lat + (dest.lat - origin.lat) * i / (n_points - 1),
                origin.lon + (dest.lon - origin.lon) * i / (n_points - 1),
            )
            for i in range(n_points)
        ]
    epoch0 = (
        datetime.datetime(day.year, day.month, day.day, tzinfo=datetime.timezone.utc).timestamp()
        + depart_s
    )
    n = len(route)
    points = tuple(
        TripPoint(t=epoch0 + duration_s * i / (n - 1), loc=loc)
        for i, loc in enumerate(route)
    )
    return TripRecord(
        trip_id=trip_id,
        student_id=student_id,
        day=day,
        school_id=school_id,
        mode=mode,
        points=points,
        per_mode_distance=per_mode_distance,
    )


def nearest_rank_oracle(values, pct):
    """Independent nearest-rank percentile: smallest v with #(<= v) >= ceil(p*n/100)."""
    ordered = sorted(values)
    if pct <= 0:
        return ordered[0]
    need = math.ceil(pct / 100.0 * len(ordered))
    for v in ordered:
        if sum(1 for u in ordered if u <= v) >= need:
            return v
    return ordered[-1]


def shoelace_oracle(coords):
    """Signed shoelace area of a closed polygon given as (x, y) pairs."""
    total = 0.0
    n = len(coords)
    for i in range(n):
        x1, y1 = coords[i]
        x2, y2 = coords[(i + 1) % n]
        total += x1 * y2 - x2 * y1
    return abs(total) / 2.0
