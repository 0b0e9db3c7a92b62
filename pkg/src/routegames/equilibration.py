"""Day-to-day consistency analyses.

Three views of whether commuters have settled into a routine: do they keep
the same principal mode across days, do they keep the same route (judged by
the polygon-area distance), and within clusters whose membership repeats
across days, does the fastest member stay the fastest.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

from .clustering import Cluster, ClusterKey
from .geometry import ContourParams, routes_consistent
from .model import Mode, TripRecord, effective_mode


@dataclass(frozen=True)
class StudentHistory:
    student_id: str
    trips: tuple[TripRecord, ...]  # one morning trip per day, >= 2 days


def build_histories(trips: Iterable[TripRecord]) -> list[StudentHistory]:
    """Group trips per student, one (earliest-departing) trip per day.

    Students with fewer than two distinct days are filtered out, mirroring
    the restriction to subjects observed on multiple mornings.
    """
    per_student: dict[str, dict[datetime.date, TripRecord]] = {}
    for trip in trips:
        days = per_student.setdefault(trip.student_id, {})
        held = days.get(trip.day)
        if held is None or trip.depart_time < held.depart_time:
            days[trip.day] = trip
    histories = []
    for student_id in sorted(per_student):
        days = per_student[student_id]
        if len(days) < 2:
            continue
        ordered = tuple(days[d] for d in sorted(days))
        histories.append(StudentHistory(student_id=student_id, trips=ordered))
    return histories


@dataclass
class ModeConsistencyStats:
    n_students: int
    threeway_consistent: int
    threeway_fraction: float
    threeway_by_mode: dict[str, int]  # consistent students per mode
    grouped_consistent: int
    grouped_fraction: float
    grouped_by_class: dict[str, int]  # consistent students per public/private


def mode_consistency(histories: Sequence[StudentHistory]) -> ModeConsistencyStats:
    """Count students using one principal mode on every observed day.

    Computed twice: discriminating metro/bus/car, and with the coarser
    public-vs-private grouping (which can only merge, so its fraction is
    always >= the three-way one).
    """
    threeway_by_mode = {m.value: 0 for m in Mode}
    grouped_by_class = {"public": 0, "private": 0}
    threeway = 0
    grouped = 0
    for history in histories:
        modes = {effective_mode(t) for t in history.trips}
        classes = {m.mode_class for m in modes}
        if len(modes) == 1:
            threeway += 1
            threeway_by_mode[next(iter(modes)).value] += 1
        if len(classes) == 1:
            grouped += 1
            grouped_by_class[next(iter(classes))] += 1
    n = len(histories)
    return ModeConsistencyStats(
        n_students=n,
        threeway_consistent=threeway,
        threeway_fraction=threeway / n if n else 0.0,
        threeway_by_mode=threeway_by_mode,
        grouped_consistent=grouped,
        grouped_fraction=grouped / n if n else 0.0,
        grouped_by_class=grouped_by_class,
    )


@dataclass
class RouteConsistencyResult:
    n_eligible: int  # students with one principal mode across days
    n_consistent: int
    fraction: float
    n_excluded: int  # students skipped (mixed modes or < 2 comparable trips)
    per_student: dict[str, bool] = field(default_factory=dict)


def route_consistency_rate(
    histories: Sequence[StudentHistory], params: ContourParams
) -> RouteConsistencyResult:
    """Fraction of single-mode students whose routes match across all days.

    A student counts as route-consistent only if every pair of their morning
    trips passes the polygon-area criterion (the strictest reading; the
    relation is not assumed transitive).
    """
    eligible = 0
    consistent = 0
    excluded = 0
    per_student: dict[str, bool] = {}
    for history in histories:
        if len({effective_mode(t) for t in history.trips}) != 1:
            excluded += 1
            continue
        routes = [[p.loc for p in t.points] for t in history.trips]
        if len(routes) < 2:
            excluded += 1
            continue
        eligible += 1
        ok = all(
            routes_consistent(a, b, params) for a, b in combinations(routes, 2)
        )
        per_student[history.student_id] = ok
        if ok:
            consistent += 1
    return RouteConsistencyResult(
        n_eligible=eligible,
        n_consistent=consistent,
        fraction=consistent / eligible if eligible else 0.0,
        n_excluded=excluded,
        per_student=per_student,
    )


@dataclass(frozen=True)
class ConsistentGroup:
    key: ClusterKey
    members: frozenset[str]  # student ids
    clusters: tuple[Cluster, ...]  # one per day, sorted by day


@dataclass(frozen=True)
class ConsistentClusterSet:
    n_distinct_clusters: int
    groups: tuple[ConsistentGroup, ...]


def consistent_clusters(clusters: Sequence[Cluster]) -> ConsistentClusterSet:
    """Groups of clusters with identical key and member set on >= 2 distinct days."""
    by_identity: dict[tuple[ClusterKey, frozenset[str]], list[Cluster]] = {}
    for cluster in clusters:
        members = frozenset(t.student_id for t in cluster.trips)
        by_identity.setdefault((cluster.key, members), []).append(cluster)
    groups = []
    for (key, members), group in sorted(
        by_identity.items(), key=lambda kv: (kv[0][0], sorted(kv[0][1]))
    ):
        days = {c.day for c in group}
        if len(days) < 2:
            continue
        groups.append(
            ConsistentGroup(
                key=key,
                members=members,
                clusters=tuple(sorted(group, key=lambda c: c.day)),
            )
        )
    return ConsistentClusterSet(
        n_distinct_clusters=len(by_identity), groups=tuple(groups)
    )


@dataclass
class PersistenceResult:
    n_groups: int
    n_persisting: int
    fraction: float


def fastest_persistence(consistent: ConsistentClusterSet) -> PersistenceResult:
    """Fraction of consistent groups whose fastest member is the same every day.

    Duration ties make the day's "fastest" a set; a group persists only when
    the argmin sets coincide across all of its days.
    """
    persisting = 0
    for group in consistent.groups:
        argmin_sets = []
        for cluster in group.clusters:
            best = min(t.duration for t in cluster.trips)
            argmin_sets.append(
                frozenset(t.student_id for t in cluster.trips if t.duration == best)
            )
        if all(s == argmin_sets[0] for s in argmin_sets[1:]):
            persisting += 1
    total = len(consistent.groups)
    return PersistenceResult(
        n_groups=total,
        n_persisting=persisting,
        fraction=persisting / total if total else 0.0,
    )
