"""Free-flow duration providers and the persistent route cache.

A provider answers "how long would this trip take with no one else on the
road". Two implementations: an offline shortest-path provider over a
simulator network (fully reproducible), and a thin JSON-over-HTTP client for
an external directions service. To keep request counts down, results are
cached per (spatial cell, school, mode) in an append-only JSONL file.

The HTTP client is not coupled to a single vendor: it posts
{"origin": [lat, lon], "dest": [lat, lon], "mode": ..., "optimistic": ...}
and expects {"duration_seconds": ...} back (404 -> route not found). An
adapter for a real directions API is a thin mapping onto this contract.
All transport goes through an injectable callable so tests replay recorded
fixtures with zero live network access.
"""

from __future__ import annotations

import json
import os
import threading
import time
from pathlib import Path
from typing import Callable, Iterable, Protocol

import numpy as np

from .errors import ProviderFailure, RouteNotFound
from .geometry import geodesic_distance
from .model import GeoPoint, Mode

WALK_SPEED_MPS = 1.4
MIN_DURATION_S = 1.0

API_KEY_ENV = "FREEFLOW_API_KEY"


class FreeFlowProvider(Protocol):
    def query_route(
        self, origin: GeoPoint, dest: GeoPoint, mode: Mode, optimistic: bool = True
    ) -> float: ...


class OfflineNetworkProvider:
    """Shortest-path free-flow times over a simulator road network.

    The returned duration is the zero-load shortest path between the nodes
    nearest to origin and destination, plus access/egress walking at
    1.4 m/s. Transit modes run over `transit_network` when one is supplied
    (in-vehicle time plus walk, zero waiting), otherwise over the same road
    network. Deterministic, and results never fall below 1 s.
    """

    def __init__(self, network, transit_network=None, walk_speed_mps: float = WALK_SPEED_MPS):
        self.networks = {"private": network, "public": transit_network or network}
        self.walk_speed = walk_speed_mps
        self._zero = {
            cls: net.latency(np.zeros(len(net.edges)))
            for cls, net in self.networks.items()
        }
        self.calls = 0

    def _nearest_node(self, net, point: GeoPoint) -> tuple[str, float]:
        best, best_d = None, float("inf")
        for node_id in net.nodes:
            d = geodesic_distance(point, net.nodes[node_id])
            if d < best_d:
                best, best_d = node_id, d
        return best, best_d

    def query_route(
        self, origin: GeoPoint, dest: GeoPoint, mode: Mode, optimistic: bool = True
    ) -> float:
        self.calls += 1
        net = self.networks[mode.mode_class]
        o_node, o_walk = self._nearest_node(net, origin)
        d_node, d_walk = self._nearest_node(net, dest)
        dist, _ = net.shortest_paths(self._zero[mode.mode_class], o_node)
        if d_node not in dist:
            raise RouteNotFound(f"no path between {o_node} and {d_node}")
        duration = dist[d_node] + (o_walk + d_walk) / self.walk_speed
        return max(duration, MIN_DURATION_S)


def _default_transport(
    endpoint: str, payload: dict, timeout_s: float
) -> dict:
    import requests

    response = requests.post(endpoint, json=payload, timeout=timeout_s)
    if response.status_code == 404:
        raise RouteNotFound(f"route not found for {payload}")
    response.raise_for_status()
    return response.json()


class ExternalDirectionsProvider:
    """JSON-over-HTTP directions client with retries and optional rate limiting.

    The API key is read from the FREEFLOW_API_KEY environment variable unless
    passed explicitly; it is sent in the request payload. A custom
    `transport` callable (payload -> response dict) replaces the HTTP layer
    entirely, which is how tests replay recorded responses.
    """

    def __init__(
        self,
        endpoint: str,
        api_key: str | None = None,
        transport: Callable[[dict], dict] | None = None,
        retries: int = 3,
        backoff_s: float = 0.5,
        timeout_s: float = 10.0,
        min_interval_s: float = 0.0,
    ):
        self.endpoint = endpoint
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.transport = transport
        self.retries = retries
        self.backoff_s = backoff_s
        self.timeout_s = timeout_s
        self.min_interval_s = min_interval_s
        self._last_call = 0.0
        self.calls = 0

    def query_route(
        self, origin: GeoPoint, dest: GeoPoint, mode: Mode, optimistic: bool = True
    ) -> float:
        payload = {
            "origin": [origin.lat, origin.lon],
            "dest": [dest.lat, dest.lon],
            "mode": mode.value,
            "optimistic": optimistic,
        }
        if self.api_key:
            payload["api_key"] = self.api_key
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if self.min_interval_s > 0:
                wait = self._last_call + self.min_interval_s - time.monotonic()
                if wait > 0:
                    time.sleep(wait)
            try:
                self._last_call = time.monotonic()
                self.calls += 1
                if self.transport is not None:
                    response = self.transport(payload)
                else:
                    response = _default_transport(self.endpoint, payload, self.timeout_s)
            except RouteNotFound:
                raise
            except Exception as exc:  # network trouble: back off and retry
                last_error = exc
                if attempt < self.retries:
                    time.sleep(self.backoff_s * 2**attempt)
                continue
            duration = float(response["duration_seconds"])
            return max(duration, MIN_DURATION_S)
        raise ProviderFailure(f"provider unreachable after {self.retries + 1} attempts: {last_error}")


CacheKey = tuple[int, str, str]  # (spatial cell id, school id, mode value)


class RouteCache:
    """Append-only JSONL cache keyed by (cell, school, mode).

    One JSON object per line: {"cell", "school_id", "mode", "duration_s",
    "retrieved_at"}. Entries are immutable once stored; re-putting a key is
    ignored. A single lock serializes writers; reads hit the in-memory map.
    """

    def __init__(self, path: str | Path | None = None):
        self.path = Path(path) if path is not None else None
        self._entries: dict[CacheKey, float] = {}
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            with open(self.path) as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    row = json.loads(line)
                    key = (int(row["cell"]), str(row["school_id"]), str(row["mode"]))
                    self._entries.setdefault(key, float(row["duration_s"]))

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: CacheKey) -> float | None:
        return self._entries.get(key)

    def put(self, key: CacheKey, duration_s: float) -> None:
        with self._lock:
            if key in self._entries:
                return
            self._entries[key] = duration_s
            if self.path is not None:
                row = {
                    "cell": key[0],
                    "school_id": key[1],
                    "mode": key[2],
                    "duration_s": duration_s,
                    "retrieved_at": int(time.time()),
                }
                with open(self.path, "a") as fh:
                    fh.write(json.dumps(row, sort_keys=True) + "\n")

    def merge_min(self, others: Iterable["RouteCache"]) -> None:
        """Keep the minimum duration per key across several collection runs."""
        for other in others:
            for key, duration in other._entries.items():
                held = self._entries.get(key)
                if held is None or duration < held:
                    self._entries[key] = duration


def cached_free_flow(
    key: CacheKey,
    origin: GeoPoint,
    dest: GeoPoint,
    provider: FreeFlowProvider,
    cache: RouteCache,
    optimistic: bool = True,
) -> float:
    """Cache hit returns the stored duration without touching the provider."""
    held = cache.get(key)
    if held is not None:
        return held
    duration = provider.query_route(origin, dest, Mode(key[2]), optimistic=optimistic)
    cache.put(key, duration)
    return duration
