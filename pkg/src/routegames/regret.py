"""Imitation-regret over comparison clusters.

Within each cluster the fastest trip is the baseline; every other trip's
regret is its duration minus the baseline duration. The distribution of
nonzero regrets (baselines excluded, matching how the distribution is
normally plotted) yields the complementary CDF and the (epsilon, delta)
equilibrium readout: epsilon is the smallest regret bound that covers a
1 - delta fraction of trips.
"""

from __future__ import annotations

import datetime
import math
from dataclasses import dataclass
from typing import Sequence

from .clustering import Cluster, ClusterKey
from .errors import InputError
from .model import effective_mode


@dataclass(frozen=True)
class RegretRow:
    trip_id: str
    key: ClusterKey
    day: datetime.date
    duration_s: float
    baseline_s: float
    regret_s: float
    is_baseline: bool


@dataclass(frozen=True)
class RegretTable:
    rows: tuple[RegretRow, ...]

    def retained(self, include_baselines: bool = False) -> list[RegretRow]:
        if include_baselines:
            return list(self.rows)
        return [r for r in self.rows if not r.is_baseline]


@dataclass(frozen=True)
class EpsilonDelta:
    epsilon_s: float
    delta: float


@dataclass(frozen=True)
class RegretCcdf:
    points: tuple[tuple[float, float], ...]  # (x seconds, fraction with R >= x)
    mean_s: float
    median_s: float
    count: int

    def value_at(self, x: float) -> float:
        """Fraction of the retained rows with regret >= x."""
        for xi, f in self.points:
            if xi >= x:
                return f
        return 0.0


@dataclass(frozen=True)
class MixedRegretStats:
    n_mixed_clusters: int
    n_fastest_private: int
    n_fastest_public: int
    n_ambiguous: int  # fastest duration tied between a public and a private trip
    fraction_fastest_private: float
    mean_cross_regret_s: float | None
    mean_transit_duration_s: float | None
    n_transit_rows: int


def imitation_regret(clusters: Sequence[Cluster]) -> RegretTable:
    """Regret of every trip against the fastest trip of its cluster.

    Ties for the minimum make every tied trip a baseline with regret zero.
    Row order is deterministic: clusters in input order, trips by id.
    """
    rows: list[RegretRow] = []
    for cluster in clusters:
        baseline = min(t.duration for t in cluster.trips)
        for trip in cluster.trips:
            regret = trip.duration - baseline
            rows.append(
                RegretRow(
                    trip_id=trip.trip_id,
                    key=cluster.key,
                    day=cluster.day,
                    duration_s=trip.duration,
                    baseline_s=baseline,
                    regret_s=regret,
                    is_baseline=(regret == 0.0),
                )
            )
    return RegretTable(rows=tuple(rows))


def regret_ccdf(table: RegretTable, include_baselines: bool = False) -> RegretCcdf:
    """Complementary CDF of regrets, with baseline (zero-regret) rows removed
    by default."""
    regrets = sorted(r.regret_s for r in table.retained(include_baselines))
    if not regrets:
        raise InputError("no nonzero regrets")
    n = len(regrets)
    points = []
    for x in sorted(set(regrets)):
        ge = sum(1 for r in regrets if r >= x)
        points.append((x, ge / n))
    mid = n // 2
    median = regrets[mid] if n % 2 else (regrets[mid - 1] + regrets[mid]) / 2
    return RegretCcdf(
        points=tuple(points),
        mean_s=sum(regrets) / n,
        median_s=median,
        count=n,
    )


def epsilon_for_delta(
    table: RegretTable, delta: float, include_baselines: bool = False
) -> EpsilonDelta:
    """Smallest epsilon such that at least a 1 - delta fraction of rows have
    regret <= epsilon (nearest-rank quantile, same population as the CCDF).

    When every row is a baseline (exact equilibrium), the quantile is taken
    over the full table instead, which makes epsilon 0 rather than an error.
    """
    if not 0 < delta < 1:
        raise InputError(f"delta must lie in (0, 1), got {delta}")
    regrets = sorted(r.regret_s for r in table.retained(include_baselines))
    if not regrets:
        regrets = sorted(r.regret_s for r in table.rows)
    if not regrets:
        raise InputError("no nonzero regrets")
    rank = math.ceil((1 - delta) * len(regrets))
    return EpsilonDelta(epsilon_s=regrets[max(rank, 1) - 1], delta=delta)


def cross_mode_regret(mixed_clusters: Sequence[Cluster]) -> MixedRegretStats:
    """Regret of transit users against the fastest private user in mixed clusters.

    Input clusters must be keyed without the mode variable (split_mode=False)
    so that public and private trips share clusters. Only clusters containing
    both classes count as mixed. The cross-regret population is restricted to
    clusters whose fastest private trip is strictly fastest overall; clusters
    where the top duration is tied across classes are reported as ambiguous.
    """
    n_mixed = 0
    n_private = 0
    n_public = 0
    n_ambiguous = 0
    cross_regrets: list[float] = []
    transit_durations: list[float] = []
    for cluster in mixed_clusters:
        public = [t for t in cluster.trips if effective_mode(t).is_public]
        private = [t for t in cluster.trips if not effective_mode(t).is_public]
        if not public or not private:
            continue
        n_mixed += 1
        best_public = min(t.duration for t in public)
        best_private = min(t.duration for t in private)
        if best_private < best_public:
            n_private += 1
            for t in public:
                cross_regrets.append(t.duration - best_private)
                transit_durations.append(t.duration)
        elif best_public < best_private:
            n_public += 1
        else:
            n_ambiguous += 1
    return MixedRegretStats(
        n_mixed_clusters=n_mixed,
        n_fastest_private=n_private,
        n_fastest_public=n_public,
        n_ambiguous=n_ambiguous,
        fraction_fastest_private=(n_private / n_mixed) if n_mixed else 0.0,
        mean_cross_regret_s=(sum(cross_regrets) / len(cross_regrets))
        if cross_regrets
        else None,
        mean_transit_duration_s=(sum(transit_durations) / len(transit_durations))
        if transit_durations
        else None,
        n_transit_rows=len(cross_regrets),
    )
