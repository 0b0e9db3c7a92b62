import json
import math

import pytest

from routegames.errors import ProviderFailure, RouteNotFound
from routegames.freeflow import (
    ExternalDirectionsProvider,
    OfflineNetworkProvider,
    RouteCache,
    cached_free_flow,
)
from routegames.model import GeoPoint, Mode
from routegames.simulator import Demand, Edge, RoadNetwork


def ten_km_network():
    # two nodes ~10 km apart along the equator-ish latitude; a = 720 s is the
    # free-flow time of a 10 km edge at 50 km/h
    nodes = {
        "a": GeoPoint(1.30, 103.80),
        "b": GeoPoint(1.30, 103.80 + 10_000 / (111_194.9267 * math.cos(math.radians(1.30)))),
    }
    return RoadNetwork(nodes, [Edge("a", "b", 720.0, 0.5, 4)])


class TestOfflineProvider:
    def test_origin_equals_dest_clamps_to_one_second(self):
        provider = OfflineNetworkProvider(ten_km_network())
        p = GeoPoint(1.30, 103.80)
        assert provider.query_route(p, p, Mode.CAR) == 1.0

    def test_ten_km_edge_at_50kmh(self):
        net = ten_km_network()
        provider = OfflineNetworkProvider(net)
        duration = provider.query_route(net.nodes["a"], net.nodes["b"], Mode.CAR)
        assert duration == pytest.approx(720.0, abs=1e-6)

    def test_walk_access_time_added(self):
        net = ten_km_network()
        provider = OfflineNetworkProvider(net)
        # origin 140 m north of node a: 100 s of walking at 1.4 m/s
        origin = GeoPoint(1.30 + 140.0 / 111_194.9267, 103.80)
        duration = provider.query_route(origin, net.nodes["b"], Mode.CAR)
        assert duration == pytest.approx(720.0 + 100.0, abs=0.1)

    def test_unreachable_raises_not_found(self):
        net = ten_km_network()  # only a -> b
        provider = OfflineNetworkProvider(net)
        with pytest.raises(RouteNotFound):
            provider.query_route(net.nodes["b"], net.nodes["a"], Mode.CAR)

    def test_transit_network_used_for_public_modes(self):
        car_net = ten_km_network()
        transit = RoadNetwork(dict(car_net.nodes), [Edge("a", "b", 2000.0, 0.0, 1)])
        provider = OfflineNetworkProvider(car_net, transit_network=transit)
        a, b = car_net.nodes["a"], car_net.nodes["b"]
        assert provider.query_route(a, b, Mode.CAR) == pytest.approx(720.0)
        assert provider.query_route(a, b, Mode.BUS) == pytest.approx(2000.0)
        assert provider.query_route(a, b, Mode.METRO) == pytest.approx(2000.0)


class FixtureTransport:
    """Replays recorded responses; counts calls like an HTTP tape would."""

    def __init__(self, fixtures, failures_before_success=0):
        self.fixtures = fixtures
        self.calls = 0
        self.failures_left = failures_before_success

    def __call__(self, payload):
        self.calls += 1
        if self.failures_left > 0:
            self.failures_left -= 1
            raise ConnectionError("simulated network failure")
        key = (tuple(payload["origin"]), tuple(payload["dest"]), payload["mode"])
        if key not in self.fixtures:
            raise RouteNotFound(f"no fixture for {key}")
        return {"duration_seconds": self.fixtures[key]}


ORIGIN = GeoPoint(1.35, 103.80)
DEST = GeoPoint(1.30, 103.85)
FIXTURES = {
    ((1.35, 103.80), (1.30, 103.85), "car"): 840.0,
    ((1.35, 103.80), (1.30, 103.85), "bus"): 1710.0,
}


class TestExternalDirectionsProvider:
    def test_fixture_replay_verbatim(self):
        transport = FixtureTransport(FIXTURES)
        provider = ExternalDirectionsProvider("http://fixture", transport=transport)
        assert provider.query_route(ORIGIN, DEST, Mode.CAR) == 840.0
        assert provider.query_route(ORIGIN, DEST, Mode.BUS) == 1710.0
        assert transport.calls == 2

    def test_not_found_is_typed_and_not_retried(self):
        transport = FixtureTransport({})
        provider = ExternalDirectionsProvider("http://fixture", transport=transport)
        with pytest.raises(RouteNotFound):
            provider.query_route(ORIGIN, DEST, Mode.CAR)
        assert transport.calls == 1

    def test_retry_then_success(self):
        transport = FixtureTransport(FIXTURES, failures_before_success=2)
        provider = ExternalDirectionsProvider(
            "http://fixture", transport=transport, retries=3, backoff_s=0.001
        )
        assert provider.query_route(ORIGIN, DEST, Mode.CAR) == 840.0
        assert transport.calls == 3

    def test_exhausted_retries_raise_provider_failure(self):
        transport = FixtureTransport(FIXTURES, failures_before_success=99)
        provider = ExternalDirectionsProvider(
            "http://fixture", transport=transport, retries=2, backoff_s=0.001
        )
        with pytest.raises(ProviderFailure, match="unreachable"):
            provider.query_route(ORIGIN, DEST, Mode.CAR)
        assert transport.calls == 3

    def test_api_key_from_env(self, monkeypatch):
        captured = {}

        def transport(payload):
            captured.update(payload)
            return {"duration_seconds": 100.0}

        monkeypatch.setenv("FREEFLOW_API_KEY", "sekrit")
        provider = ExternalDirectionsProvider("http://fixture", transport=transport)
        provider.query_route(ORIGIN, DEST, Mode.CAR)
        assert captured["api_key"] == "sekrit"
        assert captured["optimistic"] is True


class CountingProvider:
    def __init__(self, duration=600.0):
        self.duration = duration
        self.calls = 0

    def query_route(self, origin, dest, mode, optimistic=True):
        self.calls += 1
        return self.duration


class TestRouteCache:
    def test_second_call_hits_cache(self):
        provider = CountingProvider()
        cache = RouteCache()
        key = (0, "sch1", "car")
        a = cached_free_flow(key, ORIGIN, DEST, provider, cache)
        b = cached_free_flow(key, ORIGIN, DEST, provider, cache)
        assert a == b == 600.0
        assert provider.calls == 1

    def test_distinct_modes_are_distinct_keys(self):
        provider = CountingProvider()
        cache = RouteCache()
        cached_free_flow((0, "sch1", "car"), ORIGIN, DEST, provider, cache)
        cached_free_flow((0, "sch1", "bus"), ORIGIN, DEST, provider, cache)
        assert provider.calls == 2
        assert len(cache) == 2

    def test_cold_cache_n_keys_n_calls(self):
        provider = CountingProvider()
        cache = RouteCache()
        keys = [(cell, school, mode) for cell in range(4) for school in ("s1", "s2") for mode in ("car", "bus")]
        for key in keys:
            cached_free_flow(key, ORIGIN, DEST, provider, cache)
        assert provider.calls == len(keys)

    def test_persistence_round_trip(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        provider = CountingProvider(duration=432.0)
        cache = RouteCache(path)
        cached_free_flow((3, "sch9", "car"), ORIGIN, DEST, provider, cache)
        # fresh handle replays the stored entry without any provider call
        warm = RouteCache(path)
        fresh_provider = CountingProvider()
        value = cached_free_flow((3, "sch9", "car"), ORIGIN, DEST, fresh_provider, warm)
        assert value == 432.0
        assert fresh_provider.calls == 0
        rows = [json.loads(line) for line in path.read_text().splitlines()]
        assert rows[0]["cell"] == 3 and rows[0]["duration_s"] == 432.0
        assert "retrieved_at" in rows[0]

    def test_put_is_append_only(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        cache = RouteCache(path)
        cache.put((1, "s", "car"), 100.0)
        cache.put((1, "s", "car"), 999.0)  # ignored: entries are immutable
        assert cache.get((1, "s", "car")) == 100.0
        assert len(path.read_text().splitlines()) == 1

    def test_merge_min_across_runs(self, tmp_path):
        run1 = RouteCache(tmp_path / "run1.jsonl")
        run2 = RouteCache(tmp_path / "run2.jsonl")
        run1.put((0, "s", "car"), 700.0)
        run2.put((0, "s", "car"), 650.0)
        run2.put((1, "s", "car"), 900.0)
        merged = RouteCache()
        merged.merge_min([run1, run2])
        assert merged.get((0, "s", "car")) == 650.0
        assert merged.get((1, "s", "car")) == 900.0
