import datetime

import pytest

from conftest import DAY0, SINGAPORE, make_trip, nearest_rank_oracle
from routegames.errors import InputError
from routegames.model import (
    GeoPoint,
    Mode,
    TripPoint,
    TripRecord,
    principal_mode,
    trim_percentiles,
    validate_trip,
)


class TestGeoPoint:
    def test_range_checks(self):
        GeoPoint(90, 180)
        GeoPoint(-90, -180)
        with pytest.raises(InputError):
            GeoPoint(90.1, 0)
        with pytest.raises(InputError):
            GeoPoint(0, -180.5)
        with pytest.raises(InputError):
            GeoPoint(float("nan"), 0)


class TestValidateTrip:
    def test_minimal_valid_trip(self):
        assert validate_trip(make_trip()).ok

    def test_non_monotone_timestamps(self):
        good = make_trip(n_points=3)
        bad = TripRecord(
            trip_id=good.trip_id,
            student_id=good.student_id,
            day=good.day,
            school_id=good.school_id,
            mode=good.mode,
            points=(good.points[0], good.points[2], good.points[1]),
        )
        report = validate_trip(bad)
        assert any("timestamps" in v for v in report.violations)

    def test_zero_duration(self):
        good = make_trip()
        bad = TripRecord(
            trip_id=good.trip_id,
            student_id=good.student_id,
            day=good.day,
            school_id=good.school_id,
            mode=good.mode,
            points=(good.points[0], TripPoint(good.points[0].t, good.points[1].loc)),
        )
        report = validate_trip(bad)
        assert any("duration" in v or "timestamps" in v for v in report.violations)

    def test_negative_mode_distance(self):
        trip = make_trip(per_mode_distance={Mode.CAR: -1.0})
        report = validate_trip(trip)
        assert any("per_mode_distance" in v for v in report.violations)


class TestTripDerivedFields:
    def test_origin_destination_duration(self):
        trip = make_trip(duration_s=900.0, depart_s=30000.0)
        assert trip.origin == trip.points[0].loc
        assert trip.destination == trip.points[-1].loc
        assert trip.duration == pytest.approx(900.0)
        assert trip.depart_time == pytest.approx(30000.0)


class TestTrimPercentiles:
    def test_1_to_100_minutes(self):
        trips = [
            make_trip(trip_id=f"t{i}", duration_s=60.0 * i) for i in range(1, 101)
        ]
        kept = trim_percentiles(trips, 5, 95)
        durations = [t.duration / 60.0 for t in kept]
        assert durations == list(range(5, 96))
        assert len(kept) == 91

    def test_zero_hundred_keeps_all(self):
        trips = [make_trip(trip_id=f"t{i}", duration_s=60.0 + i) for i in range(17)]
        assert trim_percentiles(trips, 0, 100) == trips

    def test_empty_input(self):
        with pytest.raises(InputError, match="empty dataset"):
            trim_percentiles([])

    def test_output_subset_within_band(self):
        # retained durations always lie within the input's percentile band
        import random

        rng = random.Random(4)
        for _ in range(50):
            trips = [
                make_trip(trip_id=f"t{i}", duration_s=rng.uniform(60, 4000))
                for i in range(rng.randint(1, 40))
            ]
            kept = trim_percentiles(trips, 5, 95)
            lo = nearest_rank_oracle([t.duration for t in trips], 5)
            hi = nearest_rank_oracle([t.duration for t in trips], 95)
            assert kept
            assert all(t in trips for t in kept)
            assert all(lo <= t.duration <= hi for t in kept)

    def test_matches_oracle_on_random_lists(self):
        import random

        rng = random.Random(11)
        for _ in range(200):
            n = rng.randint(1, 60)
            trips = [
                make_trip(trip_id=f"t{i}", duration_s=float(rng.randint(1, 50)))
                for i in range(n)
            ]
            lo_pct = rng.choice([0, 1, 5, 10, 25])
            hi_pct = rng.choice([75, 90, 95, 99, 100])
            kept = trim_percentiles(trips, lo_pct, hi_pct)
            lo = nearest_rank_oracle([t.duration for t in trips], lo_pct)
            hi = nearest_rank_oracle([t.duration for t in trips], hi_pct)
            expected = [t for t in trips if lo <= t.duration <= hi]
            assert kept == expected


class TestPrincipalMode:
    def test_strict_argmax(self):
        trip = make_trip(per_mode_distance={Mode.METRO: 5000.0, Mode.BUS: 1000.0})
        assert principal_mode(trip) is Mode.METRO

    def test_tie_breaks_by_fixed_order(self):
        trip = make_trip(per_mode_distance={Mode.BUS: 2000.0, Mode.CAR: 2000.0})
        assert principal_mode(trip) is Mode.BUS

    def test_singleton(self):
        trip = make_trip(per_mode_distance={Mode.CAR: 1.0})
        assert principal_mode(trip) is Mode.CAR

    def test_missing_distances(self):
        with pytest.raises(InputError, match="no mode distances"):
            principal_mode(make_trip())

    def test_invariant_under_rescaling(self):
        import random

        rng = random.Random(7)
        for _ in range(50):
            dists = {m: rng.uniform(1, 10000) for m in Mode}
            factor = rng.uniform(0.01, 100)
            a = principal_mode(make_trip(per_mode_distance=dists))
            b = principal_mode(
                make_trip(per_mode_distance={m: d * factor for m, d in dists.items()})
            )
            assert a is b


class TestMode:
    def test_public_predicate(self):
        assert Mode.METRO.is_public and Mode.BUS.is_public
        assert not Mode.CAR.is_public
        assert Mode.CAR.mode_class == "private"
        assert Mode.METRO.mode_class == "public"
