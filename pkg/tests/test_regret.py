import random

import pytest

from conftest import DAY0, make_trip
from routegames.clustering import grid_clusters, key_clusters
from routegames.errors import InputError
from routegames.model import Mode
from routegames.regret import (
    cross_mode_regret,
    epsilon_for_delta,
    imitation_regret,
    regret_ccdf,
)


def clusters_from_durations(durations_min, mode=Mode.CAR, split_mode=True):
    trips = [
        make_trip(
            trip_id=f"t{i:03d}",
            student_id=f"s{i:03d}",
            duration_s=60.0 * d,
            mode=mode if isinstance(mode, Mode) else mode[i],
        )
        for i, d in enumerate(durations_min)
    ]
    spatial = grid_clusters({t.trip_id: t.origin for t in trips}, 400.0)
    return key_clusters(trips, spatial, min_size=2, split_mode=split_mode)


class TestImitationRegret:
    def test_subtraction_from_minimum(self):
        table = imitation_regret(clusters_from_durations([20, 25, 31]))
        regrets = sorted(r.regret_s / 60.0 for r in table.rows)
        assert regrets == [0.0, 5.0, 11.0]
        baselines = [r for r in table.rows if r.is_baseline]
        assert len(baselines) == 1 and baselines[0].duration_s == 20 * 60.0

    def test_tied_minimum_flags_both(self):
        table = imitation_regret(clusters_from_durations([17, 17]))
        assert all(r.is_baseline and r.regret_s == 0.0 for r in table.rows)

    def test_empty_cluster_list(self):
        assert imitation_regret([]).rows == ()

    def test_translation_invariance(self):
        rng = random.Random(5)
        durations = [rng.uniform(10, 50) for _ in range(8)]
        shift = 17.3
        base = imitation_regret(clusters_from_durations(durations))
        shifted = imitation_regret(
            clusters_from_durations([d + shift for d in durations])
        )
        for a, b in zip(base.rows, shifted.rows):
            assert b.regret_s == pytest.approx(a.regret_s, abs=1e-9)

    def test_every_cluster_has_zero_minimum(self):
        rng = random.Random(9)
        for _ in range(20):
            durations = [rng.uniform(5, 60) for _ in range(rng.randint(2, 12))]
            table = imitation_regret(clusters_from_durations(durations))
            assert min(r.regret_s for r in table.rows) == 0.0
            assert all(r.regret_s >= 0 for r in table.rows)


class TestRegretCcdf:
    def test_two_point_distribution(self):
        table = imitation_regret(clusters_from_durations([20, 25, 31]))
        ccdf = regret_ccdf(table)
        points = {x / 60.0: f for x, f in ccdf.points}
        assert points == {5.0: 1.0, 11.0: 0.5}
        assert ccdf.mean_s == pytest.approx(8 * 60.0)
        assert ccdf.median_s == pytest.approx(8 * 60.0)

    def test_nonincreasing_and_one_at_zero(self):
        rng = random.Random(3)
        durations = [rng.uniform(10, 60) for _ in range(15)]
        ccdf = regret_ccdf(imitation_regret(clusters_from_durations(durations)))
        fracs = [f for _, f in ccdf.points]
        assert all(a >= b for a, b in zip(fracs, fracs[1:]))
        assert ccdf.value_at(0.0) == 1.0

    def test_all_baselines_raises(self):
        table = imitation_regret(clusters_from_durations([17, 17]))
        with pytest.raises(InputError, match="no nonzero regrets"):
            regret_ccdf(table)

    def test_include_baselines_flag(self):
        table = imitation_regret(clusters_from_durations([20, 30]))
        ccdf = regret_ccdf(table, include_baselines=True)
        assert ccdf.count == 2
        assert ccdf.value_at(0.0) == 1.0


class TestEpsilonForDelta:
    def test_nearest_rank_on_1_to_100(self):
        # regrets 1..100 minutes: durations 1, 2, ..., 101 in one cluster
        table = imitation_regret(clusters_from_durations(list(range(1, 102))))
        eps = epsilon_for_delta(table, 0.05)
        assert eps.epsilon_s == 95 * 60.0

    def test_constant_regrets(self):
        table = imitation_regret(clusters_from_durations([10, 25, 25, 25]))
        for delta in (0.01, 0.5, 0.99):
            assert epsilon_for_delta(table, delta).epsilon_s == 15 * 60.0

    def test_nonincreasing_in_delta(self):
        rng = random.Random(7)
        durations = [rng.uniform(10, 90) for _ in range(40)]
        table = imitation_regret(clusters_from_durations(durations))
        deltas = [0.01, 0.05, 0.1, 0.25, 0.5, 0.9]
        values = [epsilon_for_delta(table, d).epsilon_s for d in deltas]
        assert all(a >= b for a, b in zip(values, values[1:]))

    def test_equilibrium_all_baselines_gives_zero(self):
        table = imitation_regret(clusters_from_durations([17, 17, 17]))
        for delta in (0.01, 0.05, 0.5):
            assert epsilon_for_delta(table, delta).epsilon_s == 0.0

    def test_bad_delta(self):
        table = imitation_regret(clusters_from_durations([20, 30]))
        with pytest.raises(InputError):
            epsilon_for_delta(table, 0.0)
        with pytest.raises(InputError):
            epsilon_for_delta(table, 1.0)

    def test_matches_nearest_rank_oracle(self):
        from conftest import nearest_rank_oracle

        rng = random.Random(13)
        for _ in range(100):
            durations = [float(rng.randint(10, 99)) for _ in range(rng.randint(2, 50))]
            table = imitation_regret(clusters_from_durations(durations))
            regrets = [r.regret_s for r in table.rows if not r.is_baseline]
            if not regrets:
                continue
            delta = rng.choice([0.01, 0.05, 0.1, 0.3, 0.5])
            expected = nearest_rank_oracle(regrets, (1 - delta) * 100.0)
            assert epsilon_for_delta(table, delta).epsilon_s == expected


class TestCrossModeRegret:
    def test_fastest_private(self):
        clusters = clusters_from_durations(
            [15, 22], mode=[Mode.CAR, Mode.BUS], split_mode=False
        )
        stats = cross_mode_regret(clusters)
        assert stats.n_mixed_clusters == 1
        assert stats.n_fastest_private == 1
        assert stats.fraction_fastest_private == 1.0
        assert stats.mean_cross_regret_s == pytest.approx(7 * 60.0)
        assert stats.mean_transit_duration_s == pytest.approx(22 * 60.0)

    def test_fastest_public(self):
        clusters = clusters_from_durations(
            [30, 22], mode=[Mode.CAR, Mode.BUS], split_mode=False
        )
        stats = cross_mode_regret(clusters)
        assert stats.n_mixed_clusters == 1
        assert stats.n_fastest_private == 0
        assert stats.n_fastest_public == 1
        assert stats.fraction_fastest_private == 0.0
        assert stats.mean_cross_regret_s is None

    def test_tie_is_ambiguous(self):
        clusters = clusters_from_durations(
            [25, 25], mode=[Mode.CAR, Mode.METRO], split_mode=False
        )
        stats = cross_mode_regret(clusters)
        assert stats.n_ambiguous == 1
        assert stats.n_fastest_private == 0

    def test_single_mode_clusters_are_not_mixed(self):
        clusters = clusters_from_durations([20, 30], mode=Mode.CAR, split_mode=False)
        stats = cross_mode_regret(clusters)
        assert stats.n_mixed_clusters == 0
        assert stats.mean_cross_regret_s is None
