"""Stress of Catastrophe: recorded trip cost against a free-flow lower bound.

The free-flow duration of a trip is what the commuter would need with the
network to themselves, obtained from a provider query between the trip's
spatial-cluster centroid and its school, then clamped so it never exceeds
the recorded duration. SoC is the ratio of summed recorded durations to
summed free-flow durations: at least 1 by construction, and an upper bound
on the price of anarchy because the denominator underestimates the optimal
social cost.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .clustering import SpatialClustering
from .errors import InputError, RouteNotFound
from .freeflow import CacheKey, FreeFlowProvider, RouteCache
from .model import GeoPoint, Mode, TripRecord, effective_mode

HISTOGRAM_BIN_WIDTH = 0.1
HISTOGRAM_MAX = 3.0  # last bin is open-ended


class FreeFlowSource(Enum):
    EXTERNAL_API = "external_api"
    OFFLINE_SHORTEST_PATH = "offline_shortest_path"
    CLAMPED_TO_RECORDED = "clamped_to_recorded"


@dataclass(frozen=True)
class FreeFlowEstimate:
    trip_id: str
    freeflow_duration_s: float
    source: FreeFlowSource
    centroid_used: GeoPoint


@dataclass
class FreeFlowBatch:
    estimates: list[FreeFlowEstimate]
    dropped: list[tuple[str, str]]  # (trip_id, reason)
    provider_calls: int


def free_flow_durations(
    trips: Sequence[TripRecord],
    provider: FreeFlowProvider,
    spatial: SpatialClustering,
    schools: Mapping[str, GeoPoint],
    cache: RouteCache | None = None,
    offline: bool = True,
    max_concurrency: int = 1,
) -> FreeFlowBatch:
    """One free-flow estimate per trip, with provider calls deduplicated.

    The provider is queried once per distinct (spatial cell, school, mode)
    key; the cache is consulted before any call. Trips whose query fails
    (route not found) are dropped and reported, never silently. Every
    estimate is min-clamped against the recorded duration.
    """
    cache = cache if cache is not None else RouteCache()
    jobs: dict[CacheKey, GeoPoint] = {}
    for trip in trips:
        if trip.trip_id not in spatial.assignment:
            raise InputError(f"trip {trip.trip_id!r} has no spatial cluster")
        if trip.school_id not in schools:
            raise InputError(f"trip {trip.trip_id!r} references unknown school")
        cell = spatial.assignment[trip.trip_id]
        key = (cell, trip.school_id, effective_mode(trip).value)
        if cache.get(key) is None and key not in jobs:
            jobs[key] = spatial.centroids[cell]

    results: dict[CacheKey, float | str] = {}
    calls = 0

    def fetch(key: CacheKey, centroid: GeoPoint) -> tuple[CacheKey, float | str]:
        try:
            return key, provider.query_route(
                centroid, schools[key[1]], Mode(key[2]), optimistic=True
            )
        except RouteNotFound as exc:
            return key, f"not found: {exc}"

    ordered = sorted(jobs)
    if max_concurrency > 1 and len(ordered) > 1:
        with ThreadPoolExecutor(max_workers=max_concurrency) as pool:
            fetched = list(pool.map(lambda k: fetch(k, jobs[k]), ordered))
    else:
        fetched = [fetch(k, jobs[k]) for k in ordered]
    for key, outcome in fetched:
        calls += 1
        results[key] = outcome
        if isinstance(outcome, float):
            cache.put(key, outcome)

    estimates: list[FreeFlowEstimate] = []
    dropped: list[tuple[str, str]] = []
    source_kind = (
        FreeFlowSource.OFFLINE_SHORTEST_PATH if offline else FreeFlowSource.EXTERNAL_API
    )
    for trip in trips:
        cell = spatial.assignment[trip.trip_id]
        key = (cell, trip.school_id, effective_mode(trip).value)
        value = cache.get(key)
        if value is None:
            outcome = results.get(key)
            if not isinstance(outcome, float):
                dropped.append((trip.trip_id, str(outcome)))
                continue
            value = outcome
        if value >= trip.duration:
            estimate = FreeFlowEstimate(
                trip_id=trip.trip_id,
                freeflow_duration_s=trip.duration,
                source=FreeFlowSource.CLAMPED_TO_RECORDED,
                centroid_used=spatial.centroids[cell],
            )
        else:
            estimate = FreeFlowEstimate(
                trip_id=trip.trip_id,
                freeflow_duration_s=value,
                source=source_kind,
                centroid_used=spatial.centroids[cell],
            )
        estimates.append(estimate)
    return FreeFlowBatch(estimates=estimates, dropped=dropped, provider_calls=calls)


@dataclass
class SocReport:
    soc_overall: float
    soc_by_mode: dict[str, float]  # metro / bus / car
    soc_by_class: dict[str, float]  # public / private
    soc_by_day: dict[str, float]
    n_trips: int
    n_by_class: dict[str, int]
    deviation_histogram: list[tuple[float, float, int]]  # (bin lo, bin hi, count)


def _ratio(rec: float, ff: float) -> float:
    return rec / ff if ff > 0 else math.nan


def stress_of_catastrophe(
    trips: Sequence[TripRecord], estimates: Sequence[FreeFlowEstimate]
) -> SocReport:
    """SoC = sum of recorded durations / sum of free-flow durations.

    Breakdowns filter the same sums by mode, mode class and calendar day.
    The histogram bins (recorded - freeflow) / freeflow at width 0.1 from 0
    to 3.0 with an open last bin.
    """
    by_id = {t.trip_id: t for t in trips}
    matched = [(by_id[e.trip_id], e) for e in estimates if e.trip_id in by_id]
    if not matched:
        raise InputError("no trips matched to free-flow estimates")
    rec_total = ff_total = 0.0
    rec_mode: dict[str, float] = {}
    ff_mode: dict[str, float] = {}
    rec_class: dict[str, float] = {}
    ff_class: dict[str, float] = {}
    n_class: dict[str, int] = {}
    rec_day: dict[str, float] = {}
    ff_day: dict[str, float] = {}
    n_bins = int(round(HISTOGRAM_MAX / HISTOGRAM_BIN_WIDTH)) + 1
    counts = [0] * n_bins
    for trip, est in matched:
        rec = trip.duration
        ff = est.freeflow_duration_s
        mode = effective_mode(trip)
        rec_total += rec
        ff_total += ff
        rec_mode[mode.value] = rec_mode.get(mode.value, 0.0) + rec
        ff_mode[mode.value] = ff_mode.get(mode.value, 0.0) + ff
        rec_class[mode.mode_class] = rec_class.get(mode.mode_class, 0.0) + rec
        ff_class[mode.mode_class] = ff_class.get(mode.mode_class, 0.0) + ff
        n_class[mode.mode_class] = n_class.get(mode.mode_class, 0) + 1
        day = trip.day.isoformat()
        rec_day[day] = rec_day.get(day, 0.0) + rec
        ff_day[day] = ff_day.get(day, 0.0) + ff
        deviation = (rec - ff) / ff
        idx = min(int(deviation / HISTOGRAM_BIN_WIDTH), n_bins - 1)
        counts[idx] += 1
    histogram = []
    for i in range(n_bins):
        lo = i * HISTOGRAM_BIN_WIDTH
        hi = (i + 1) * HISTOGRAM_BIN_WIDTH if i < n_bins - 1 else math.inf
        histogram.append((round(lo, 10), hi if math.isinf(hi) else round(hi, 10), counts[i]))
    return SocReport(
        soc_overall=rec_total / ff_total,
        soc_by_mode={m: _ratio(rec_mode[m], ff_mode[m]) for m in sorted(rec_mode)},
        soc_by_class={c: _ratio(rec_class[c], ff_class[c]) for c in sorted(rec_class)},
        soc_by_day={d: _ratio(rec_day[d], ff_day[d]) for d in sorted(rec_day)},
        n_trips=len(matched),
        n_by_class=dict(sorted(n_class.items())),
        deviation_histogram=histogram,
    )


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    poa: float
    soc: float
    slack: float


def poa_soc_corollary(soc: float, poa: float, slack: float = 1e-9) -> CheckResult:
    """The price of anarchy can never exceed the stress of catastrophe."""
    return CheckResult(passed=poa <= soc + slack, poa=poa, soc=soc, slack=slack)
