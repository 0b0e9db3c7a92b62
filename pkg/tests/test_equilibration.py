import datetime

import pytest

from conftest import DAY0, SINGAPORE, make_trip
from routegames.clustering import grid_clusters, key_clusters
from routegames.equilibration import (
    build_histories,
    consistent_clusters,
    fastest_persistence,
    mode_consistency,
    route_consistency_rate,
)
from routegames.geometry import ContourParams, PlanarPoint, unproject_local
from routegames.model import GeoPoint, Mode

DAY1 = DAY0 + datetime.timedelta(days=1)
DAY2 = DAY0 + datetime.timedelta(days=2)


def history_for(*mode_by_day, student_id="s1"):
    trips = [
        make_trip(
            trip_id=f"{student_id}_d{i}",
            student_id=student_id,
            day=DAY0 + datetime.timedelta(days=i),
            mode=mode,
        )
        for i, mode in enumerate(mode_by_day)
    ]
    histories = build_histories(trips)
    assert len(histories) == 1
    return histories[0]


class TestBuildHistories:
    def test_single_day_students_filtered(self):
        trips = [
            make_trip(trip_id="a", student_id="s1", day=DAY0),
            make_trip(trip_id="b", student_id="s2", day=DAY0),
            make_trip(trip_id="c", student_id="s2", day=DAY1),
        ]
        histories = build_histories(trips)
        assert [h.student_id for h in histories] == ["s2"]
        assert len(histories[0].trips) == 2

    def test_earliest_trip_per_day_wins(self):
        trips = [
            make_trip(trip_id="late", student_id="s1", day=DAY0, depart_s=30000.0),
            make_trip(trip_id="early", student_id="s1", day=DAY0, depart_s=27000.0),
            make_trip(trip_id="next", student_id="s1", day=DAY1),
        ]
        history = build_histories(trips)[0]
        assert [t.trip_id for t in history.trips] == ["early", "next"]


class TestModeConsistency:
    def test_car_car_consistent_both_ways(self):
        stats = mode_consistency([history_for(Mode.CAR, Mode.CAR)])
        assert stats.threeway_consistent == 1
        assert stats.grouped_consistent == 1
        assert stats.threeway_by_mode["car"] == 1
        assert stats.grouped_by_class["private"] == 1

    def test_metro_bus_grouped_only(self):
        stats = mode_consistency([history_for(Mode.METRO, Mode.BUS)])
        assert stats.threeway_consistent == 0
        assert stats.grouped_consistent == 1
        assert stats.grouped_by_class["public"] == 1

    def test_grouped_fraction_dominates_threeway(self):
        import random

        rng = random.Random(31)
        histories = []
        for i in range(40):
            modes = [
                Mode(rng.choice(["metro", "bus", "car"]))
                for _ in range(rng.randint(2, 4))
            ]
            histories.append(history_for(*modes, student_id=f"s{i}"))
        stats = mode_consistency(histories)
        assert stats.grouped_fraction >= stats.threeway_fraction


def route_trip(trip_id, student_id, day, offsets_xy, depart_s=29000.0):
    route = unproject_local([PlanarPoint(x, y) for x, y in offsets_xy], SINGAPORE)
    return make_trip(
        trip_id=trip_id,
        student_id=student_id,
        day=day,
        route=route,
        depart_s=depart_s,
    )


class TestRouteConsistency:
    def test_identical_streams_consistent(self):
        shape = [(0, 0), (900, 250), (2000, 0)]
        trips = [
            route_trip("a", "s1", DAY0, shape),
            route_trip("b", "s1", DAY1, shape),
        ]
        result = route_consistency_rate(build_histories(trips), ContourParams(80.0))
        assert result.n_eligible == 1 and result.n_consistent == 1
        assert result.fraction == 1.0

    def test_large_offset_inconsistent(self):
        w = 80.0
        straight = [(x, 0.0) for x in range(0, 2200, 200)]
        offset = [(0, 0)] + [(x, 10 * w) for x in range(200, 2000, 200)] + [(2000, 0)]
        trips = [
            route_trip("a", "s1", DAY0, straight),
            route_trip("b", "s1", DAY1, offset),
        ]
        result = route_consistency_rate(build_histories(trips), ContourParams(w))
        assert result.n_consistent == 0 and result.n_eligible == 1

    def test_mixed_mode_students_excluded(self):
        trips = [
            make_trip(trip_id="a", student_id="s1", day=DAY0, mode=Mode.CAR),
            make_trip(trip_id="b", student_id="s1", day=DAY1, mode=Mode.BUS),
        ]
        result = route_consistency_rate(build_histories(trips), ContourParams(80.0))
        assert result.n_eligible == 0 and result.n_excluded == 1

    def test_all_pairs_must_match(self):
        w = 80.0
        shape = [(x, 0.0) for x in range(0, 2200, 200)]
        detour = [(0, 0)] + [(x, 12 * w) for x in range(200, 2000, 200)] + [(2000, 0)]
        trips = [
            route_trip("a", "s1", DAY0, shape),
            route_trip("b", "s1", DAY1, shape),
            route_trip("c", "s1", DAY2, detour),
        ]
        result = route_consistency_rate(build_histories(trips), ContourParams(w))
        assert result.n_consistent == 0


def keyed_clusters(trip_specs):
    """trip_specs: (trip_id, student_id, day, duration_min)."""
    trips = [
        make_trip(
            trip_id=tid,
            student_id=sid,
            day=day,
            duration_s=60.0 * dur,
        )
        for tid, sid, day, dur in trip_specs
    ]
    spatial = grid_clusters({t.trip_id: t.origin for t in trips}, 400.0)
    return key_clusters(trips, spatial, min_size=2)


class TestConsistentClusters:
    def test_same_members_two_days(self):
        clusters = keyed_clusters(
            [
                ("a0", "A", DAY0, 20),
                ("b0", "B", DAY0, 25),
                ("a1", "A", DAY1, 21),
                ("b1", "B", DAY1, 24),
            ]
        )
        result = consistent_clusters(clusters)
        assert len(result.groups) == 1
        assert result.groups[0].members == frozenset({"A", "B"})
        # "distinct" counts unique (key, member set) identities, so the two
        # days collapse onto one
        assert result.n_distinct_clusters == 1

    def test_differing_member_sets_do_not_group(self):
        clusters = keyed_clusters(
            [
                ("a0", "A", DAY0, 20),
                ("b0", "B", DAY0, 25),
                ("a1", "A", DAY1, 21),
                ("b1", "B", DAY1, 24),
                ("c1", "C", DAY1, 30),
            ]
        )
        result = consistent_clusters(clusters)
        assert result.groups == ()


class TestFastestPersistence:
    def test_persisting_group(self):
        clusters = keyed_clusters(
            [
                ("a0", "A", DAY0, 20),
                ("b0", "B", DAY0, 25),
                ("a1", "A", DAY1, 19),
                ("b1", "B", DAY1, 26),
            ]
        )
        result = fastest_persistence(consistent_clusters(clusters))
        assert result.n_groups == 1 and result.n_persisting == 1
        assert result.fraction == 1.0

    def test_swapped_fastest_does_not_persist(self):
        clusters = keyed_clusters(
            [
                ("a0", "A", DAY0, 20),
                ("b0", "B", DAY0, 25),
                ("a1", "A", DAY1, 26),
                ("b1", "B", DAY1, 19),
            ]
        )
        result = fastest_persistence(consistent_clusters(clusters))
        assert result.n_persisting == 0

    def test_tied_argmin_sets_must_coincide(self):
        clusters = keyed_clusters(
            [
                ("a0", "A", DAY0, 20),
                ("b0", "B", DAY0, 20),
                ("a1", "A", DAY1, 20),
                ("b1", "B", DAY1, 25),
            ]
        )
        # day0 argmin set {A, B}, day1 {A}: not identical
        result = fastest_persistence(consistent_clusters(clusters))
        assert result.n_persisting == 0

    def test_globally_fastest_student_always_persists(self):
        import random

        rng = random.Random(41)
        specs = []
        for day in (DAY0, DAY1, DAY2):
            specs.append((f"a_{day}", "A", day, 10))
            for s in "BCD":
                specs.append((f"{s.lower()}_{day}", s, day, rng.randint(15, 40)))
        result = fastest_persistence(consistent_clusters(keyed_clusters(specs)))
        assert result.n_groups == 1
        assert result.fraction == 1.0
