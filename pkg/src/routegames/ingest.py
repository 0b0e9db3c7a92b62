"""Ingestion of the on-disk trip and school formats.

trips.jsonl holds one trip per line:
    {"trip_id": ..., "student_id": ..., "day": "YYYY-MM-DD", "school_id": ...,
     "mode": "metro"|"bus"|"car", "points": [[epoch_seconds, lat, lon], ...],
     "per_mode_distance_m": {"car": meters, ...}}   (last key optional)

schools.csv has the header school_id,lat,lon.

Epoch timestamps are interpreted on the dataset's local clock (seconds-of-day
is computed modulo 86400 directly); shifting timezones is the producer's job.
Invalid lines are never dropped silently: each goes to `<input>.rejects.jsonl`
with the original line and a reason.
"""

from __future__ import annotations

import csv
import datetime
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import InputError
from .model import (
    Dataset,
    GeoPoint,
    Mode,
    TripPoint,
    TripRecord,
    validate_trip,
)


@dataclass
class IngestResult:
    dataset: Dataset
    n_read: int
    n_rejected: int
    rejects_path: Path | None


def _parse_trip_line(obj: dict) -> TripRecord:
    try:
        mode = Mode(obj["mode"])
    except ValueError:
        raise InputError(f"unknown mode {obj.get('mode')!r}")
    try:
        day = datetime.date.fromisoformat(obj["day"])
    except (TypeError, ValueError):
        raise InputError(f"bad day {obj.get('day')!r}, expected YYYY-MM-DD")
    raw_points = obj["points"]
    if not isinstance(raw_points, list) or len(raw_points) < 2:
        raise InputError("points: fewer than 2 points")
    points = []
    for entry in raw_points:
        if not isinstance(entry, list) or len(entry) != 3:
            raise InputError(f"bad point entry {entry!r}")
        t, lat, lon = entry
        points.append(TripPoint(t=float(t), loc=GeoPoint(float(lat), float(lon))))
    per_mode = None
    if obj.get("per_mode_distance_m"):
        per_mode = {}
        for mode_name, dist in obj["per_mode_distance_m"].items():
            try:
                per_mode[Mode(mode_name)] = float(dist)
            except ValueError:
                raise InputError(f"unknown mode {mode_name!r} in per_mode_distance_m")
    trip = TripRecord(
        trip_id=str(obj["trip_id"]),
        student_id=str(obj["student_id"]),
        day=day,
        school_id=str(obj["school_id"]),
        mode=mode,
        points=tuple(points),
        per_mode_distance=per_mode,
    )
    report = validate_trip(trip)
    if not report.ok:
        raise InputError("; ".join(report.violations))
    return trip


def load_schools(path: str | Path) -> dict[str, GeoPoint]:
    path = Path(path)
    schools: dict[str, GeoPoint] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["school_id", "lat", "lon"]:
            raise InputError(
                f"{path}: expected header school_id,lat,lon, got {reader.fieldnames}"
            )
        for row in reader:
            schools[row["school_id"]] = GeoPoint(float(row["lat"]), float(row["lon"]))
    if not schools:
        raise InputError(f"{path}: no schools")
    return schools


def load_trips(
    trips_path: str | Path, schools: dict[str, GeoPoint]
) -> IngestResult:
    """Parse trips.jsonl, writing invalid lines to `<input>.rejects.jsonl`."""
    trips_path = Path(trips_path)
    trips: list[TripRecord] = []
    rejects: list[dict] = []
    seen_ids: set[str] = set()
    n_read = 0
    with open(trips_path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            n_read += 1
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                rejects.append({"line": line_no, "raw": line, "reason": f"bad json: {exc}"})
                continue
            try:
                trip = _parse_trip_line(obj)
            except (InputError, KeyError, TypeError, ValueError) as exc:
                reason = f"missing key {exc}" if isinstance(exc, KeyError) else str(exc)
                rejects.append({"line": line_no, "raw": line, "reason": reason})
                continue
            if trip.trip_id in seen_ids:
                rejects.append(
                    {"line": line_no, "raw": line, "reason": f"duplicate trip_id {trip.trip_id!r}"}
                )
                continue
            if trip.school_id not in schools:
                rejects.append(
                    {"line": line_no, "raw": line, "reason": f"unknown school {trip.school_id!r}"}
                )
                continue
            seen_ids.add(trip.trip_id)
            trips.append(trip)
    rejects_path = None
    if rejects:
        rejects_path = trips_path.with_name(trips_path.name + ".rejects.jsonl")
        with open(rejects_path, "w") as fh:
            for row in rejects:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
    dataset = Dataset(trips=tuple(trips), schools=schools)
    return IngestResult(
        dataset=dataset,
        n_read=n_read,
        n_rejected=len(rejects),
        rejects_path=rejects_path,
    )


def load_dataset(trips_path: str | Path, schools_path: str | Path) -> IngestResult:
    return load_trips(trips_path, load_schools(schools_path))


def write_trips(trips, path: str | Path) -> None:
    """Emit trips in the trips.jsonl format (inverse of load_trips)."""
    with open(path, "w") as fh:
        for trip in trips:
            obj = {
                "trip_id": trip.trip_id,
                "student_id": trip.student_id,
                "day": trip.day.isoformat(),
                "school_id": trip.school_id,
                "mode": trip.mode.value,
                "points": [[p.t, p.loc.lat, p.loc.lon] for p in trip.points],
            }
            if trip.per_mode_distance:
                obj["per_mode_distance_m"] = {
                    m.value: d for m, d in sorted(trip.per_mode_distance.items(), key=lambda kv: kv[0].value)
                }
            fh.write(json.dumps(obj, sort_keys=True) + "\n")


def write_schools(schools: dict[str, GeoPoint], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["school_id", "lat", "lon"])
        for school_id in sorted(schools):
            p = schools[school_id]
            writer.writerow([school_id, repr(p.lat), repr(p.lon)])
