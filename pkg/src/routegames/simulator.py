"""Nonatomic routing-game simulator used as a ground-truth generator.

Networks carry polynomial edge latencies l_e(x) = a_e + b_e * x^p_e. The
Frank-Wolfe solver computes the Wardrop user equilibrium (minimizing the
Beckmann potential) or the system optimum (same iteration on marginal costs
a_e + (p+1) b_e x^p_e), and the ratio of the two social costs gives the
exact price of anarchy. Equilibrium flows can be sampled into synthetic
commuter trips so the whole empirical pipeline can be validated against
known values.

Built-in instances: the two-link Pigou networks (linear and quartic, the
tight price-of-anarchy examples), the classic Braess diamond, a 20-node grid
with BPR-style degree-4 latencies, and a BPR-flavored two-link network whose
slow link also congests (used to exhibit the tragedy-of-the-commons regime
where total delay keeps growing while the price of anarchy falls toward 1).
"""

from __future__ import annotations

import datetime
import heapq
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import InputError, RoutegamesError
from .geometry import geodesic_distance, unproject_local, PlanarPoint
from .model import Dataset, GeoPoint, Mode, TripPoint, TripRecord


class SimulatorError(RoutegamesError):
    pass


@dataclass(frozen=True)
class Edge:
    tail: str
    head: str
    a: float  # free-flow time, seconds
    b: float  # congestion coefficient
    p: int  # polynomial degree >= 1

    def __post_init__(self) -> None:
        if self.a < 0 or self.b < 0:
            raise InputError(f"edge {self.tail}->{self.head}: a and b must be >= 0")
        if not (isinstance(self.p, int) and self.p >= 1):
            raise InputError(f"edge {self.tail}->{self.head}: p must be an integer >= 1")


@dataclass(frozen=True)
class Demand:
    origin: str
    destination: str
    rate: float

    def __post_init__(self) -> None:
        if not self.rate > 0:
            raise InputError(f"demand {self.origin}->{self.destination}: rate must be > 0")


class RoadNetwork:
    """Directed multigraph with polynomial latencies and node coordinates."""

    def __init__(self, nodes: Mapping[str, GeoPoint], edges: Sequence[Edge]):
        self.nodes = dict(nodes)
        self.edges = list(edges)
        for e in self.edges:
            if e.tail not in self.nodes or e.head not in self.nodes:
                raise InputError(f"edge {e.tail}->{e.head} references unknown node")
        self.node_ids = list(self.nodes)
        self._a = np.array([e.a for e in self.edges], dtype=float)
        self._b = np.array([e.b for e in self.edges], dtype=float)
        self._p = np.array([e.p for e in self.edges], dtype=float)
        # adjacency: node -> [(edge index, head node)]
        self._adj: dict[str, list[tuple[int, str]]] = {n: [] for n in self.nodes}
        for i, e in enumerate(self.edges):
            self._adj[e.tail].append((i, e.head))

    def latency(self, x: np.ndarray) -> np.ndarray:
        return self._a + self._b * np.power(x, self._p)

    def marginal_cost(self, x: np.ndarray) -> np.ndarray:
        return self._a + (self._p + 1) * self._b * np.power(x, self._p)

    def beckmann(self, x: np.ndarray) -> float:
        return float(np.sum(self._a * x + self._b * np.power(x, self._p + 1) / (self._p + 1)))

    def social_cost(self, x: np.ndarray) -> float:
        return float(np.sum(x * self.latency(x)))

    def shortest_paths(
        self, weights: np.ndarray, source: str
    ) -> tuple[dict[str, float], dict[str, int]]:
        """Dijkstra from source; returns distances and predecessor edge index.

        Handles parallel edges (each edge is relaxed individually).
        """
        dist: dict[str, float] = {source: 0.0}
        pred: dict[str, int] = {}
        done: set[str] = set()
        heap: list[tuple[float, str]] = [(0.0, source)]
        while heap:
            d, node = heapq.heappop(heap)
            if node in done:
                continue
            done.add(node)
            for edge_idx, head in self._adj[node]:
                nd = d + weights[edge_idx]
                if head not in dist or nd < dist[head]:
                    dist[head] = nd
                    pred[head] = edge_idx
                    heapq.heappush(heap, (nd, head))
        return dist, pred

    def to_json(self) -> dict:
        return {
            "nodes": [
                {"id": n, "lat": p.lat, "lon": p.lon} for n, p in self.nodes.items()
            ],
            "edges": [
                {"from": e.tail, "to": e.head, "a": e.a, "b": e.b, "p": e.p}
                for e in self.edges
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "RoadNetwork":
        nodes = {n["id"]: GeoPoint(n["lat"], n["lon"]) for n in data["nodes"]}
        edges = [
            Edge(e["from"], e["to"], float(e["a"]), float(e["b"]), int(e["p"]))
            for e in data["edges"]
        ]
        return cls(nodes, edges)


def load_network(path: str | Path) -> RoadNetwork:
    return RoadNetwork.from_json(json.loads(Path(path).read_text()))


def load_demands(path: str | Path) -> list[Demand]:
    """Read demands.csv with header origin,destination,rate."""
    import csv

    demands = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            demands.append(
                Demand(row["origin"], row["destination"], float(row["rate"]))
            )
    return demands


@dataclass
class FlowVector:
    edge_flow: np.ndarray  # aggregate flow per edge
    commodity_flow: np.ndarray  # shape (n_commodities, n_edges)
    demands: tuple[Demand, ...]
    social_cost: float
    relative_gap: float
    iterations: int
    converged: bool
    objective: str  # "equilibrium" | "optimum"


def _all_or_nothing(
    net: RoadNetwork, demands: Sequence[Demand], weights: np.ndarray
) -> tuple[np.ndarray, float]:
    """Assign each demand to its shortest path; returns flows and total SP cost."""
    flows = np.zeros((len(demands), len(net.edges)))
    sp_cost = 0.0
    cache: dict[str, tuple[dict[str, float], dict[str, int]]] = {}
    for c, dem in enumerate(demands):
        if dem.origin not in cache:
            cache[dem.origin] = net.shortest_paths(weights, dem.origin)
        dist, pred = cache[dem.origin]
        if dem.destination not in dist:
            raise SimulatorError(
                f"no path from {dem.origin} to {dem.destination}"
            )
        sp_cost += dist[dem.destination] * dem.rate
        node = dem.destination
        while node != dem.origin:
            edge_idx = pred[node]
            flows[c, edge_idx] += dem.rate
            node = net.edges[edge_idx].tail
    return flows, sp_cost


def _line_search(
    net: RoadNetwork,
    x: np.ndarray,
    direction: np.ndarray,
    gradient,
    iters: int = 60,
) -> float:
    """Exact step on the segment [x, x + direction]: bisect phi'(g) = grad . d."""
    def slope(g: float) -> float:
        return float(np.dot(gradient(x + g * direction), direction))

    if slope(1.0) <= 0:
        return 1.0
    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = (lo + hi) / 2
        if slope(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def _aon_paths(
    net: RoadNetwork, demands: Sequence[Demand], weights: np.ndarray
) -> tuple[list[tuple[int, ...]], float]:
    """Shortest path per demand as an edge-index tuple, plus the total SP cost."""
    paths = []
    sp_cost = 0.0
    cache: dict[str, tuple[dict[str, float], dict[str, int]]] = {}
    for dem in demands:
        if dem.origin not in cache:
            cache[dem.origin] = net.shortest_paths(weights, dem.origin)
        dist, pred = cache[dem.origin]
        if dem.destination not in dist:
            raise SimulatorError(f"no path from {dem.origin} to {dem.destination}")
        sp_cost += dist[dem.destination] * dem.rate
        node = dem.destination
        edges: list[int] = []
        while node != dem.origin:
            edge_idx = pred[node]
            edges.append(edge_idx)
            node = net.edges[edge_idx].tail
        paths.append(tuple(reversed(edges)))
    return paths, sp_cost


def _transfer_step(
    net: RoadNetwork,
    x: np.ndarray,
    source: tuple[int, ...],
    target: tuple[int, ...],
    max_delta: float,
    gradient,
    iters: int = 60,
) -> float:
    """Exact amount of flow to shift from path `source` to path `target`."""
    d = np.zeros(len(net.edges))
    np.add.at(d, list(target), 1.0)
    np.add.at(d, list(source), -1.0)

    def slope(delta: float) -> float:
        return float(np.dot(gradient(x + delta * d), d))

    if slope(max_delta) <= 0:
        return max_delta
    lo, hi = 0.0, max_delta
    for _ in range(iters):
        mid = (lo + hi) / 2
        if slope(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def _frank_wolfe(
    net: RoadNetwork,
    demands: Sequence[Demand],
    objective: str,
    tol: float,
    max_iter: int,
    step_rule: str,
) -> FlowVector:
    if not tol > 0:
        raise InputError(f"tolerance must be positive, got {tol}")
    if step_rule not in ("pairwise", "line-search", "harmonic"):
        raise InputError(f"unknown step rule {step_rule!r}")
    demands = tuple(demands)
    n_edges = len(net.edges)
    gradient = net.latency if objective == "equilibrium" else net.marginal_cost
    if not demands:
        return FlowVector(
            edge_flow=np.zeros(n_edges),
            commodity_flow=np.zeros((0, n_edges)),
            demands=demands,
            social_cost=0.0,
            relative_gap=0.0,
            iterations=0,
            converged=True,
            objective=objective,
        )

    init_paths, _ = _aon_paths(net, demands, gradient(np.zeros(n_edges)))
    # per commodity: path (edge tuple) -> flow; always sums to the rate
    path_flows: list[dict[tuple[int, ...], float]] = [
        {path: dem.rate} for path, dem in zip(init_paths, demands)
    ]

    def commodity_matrix() -> np.ndarray:
        X = np.zeros((len(demands), n_edges))
        for c, flows in enumerate(path_flows):
            for path, flow in flows.items():
                np.add.at(X[c], list(path), flow)
        return X

    X = commodity_matrix()
    relgap = math.inf
    converged = False
    k = 0
    for k in range(1, max_iter + 1):
        x = X.sum(axis=0)
        w = gradient(x)
        best_paths, sp_cost = _aon_paths(net, demands, w)
        total = float(np.dot(x, w))
        gap = total - sp_cost
        relgap = gap / total if total > 0 else 0.0
        if relgap <= tol:
            converged = True
            break
        if step_rule == "pairwise":
            # shift flow from each commodity's costliest used path onto its
            # shortest path; exact 1-D line search per transfer (Gauss-Seidel)
            for c, dem in enumerate(demands):
                target = best_paths[c]
                flows = path_flows[c]
                flows.setdefault(target, 0.0)
                for _ in range(len(flows)):
                    w_now = gradient(X.sum(axis=0))
                    cost = {
                        p: sum(w_now[i] for i in p)
                        for p, f in flows.items()
                        if f > 0 or p == target
                    }
                    source = max(sorted(cost), key=lambda p: cost[p])
                    if source == target or cost[source] - cost[target] <= 1e-15 * max(
                        cost[source], 1.0
                    ):
                        break
                    delta = _transfer_step(
                        net, X.sum(axis=0), source, target, flows[source], gradient
                    )
                    if delta <= 0:
                        break
                    flows[source] -= delta
                    flows[target] = flows.get(target, 0.0) + delta
                    np.add.at(X[c], list(target), delta)
                    np.add.at(X[c], list(source), -delta)
                    if flows[source] <= 1e-15 * dem.rate:
                        flows[source] = 0.0
                path_flows[c] = {p: f for p, f in flows.items() if f > 0}
        else:
            Y = np.zeros_like(X)
            for c, (path, dem) in enumerate(zip(best_paths, demands)):
                np.add.at(Y[c], list(path), dem.rate)
            if step_rule == "line-search":
                gamma = _line_search(net, x, (Y - X).sum(axis=0), gradient)
            else:
                gamma = 2.0 / (k + 2.0)
            X = X + gamma * (Y - X)
            for c, (path, dem) in enumerate(zip(best_paths, demands)):
                flows = {p: f * (1 - gamma) for p, f in path_flows[c].items()}
                flows[path] = flows.get(path, 0.0) + gamma * dem.rate
                path_flows[c] = {p: f for p, f in flows.items() if f > 0}

    x = X.sum(axis=0)
    return FlowVector(
        edge_flow=x,
        commodity_flow=X,
        demands=demands,
        social_cost=net.social_cost(x),
        relative_gap=relgap,
        iterations=k,
        converged=converged,
        objective=objective,
    )


def frank_wolfe_equilibrium(
    net: RoadNetwork,
    demands: Sequence[Demand],
    tol: float = 1e-6,
    max_iter: int = 10_000,
    step_rule: str = "pairwise",
) -> FlowVector:
    """Wardrop user equilibrium: stop when the relative gap drops below tol.

    The relative gap is (sum_e x_e l_e - sum_c rate_c * shortest path cost)
    divided by sum_e x_e l_e. The default step rule augments Frank-Wolfe with
    pairwise flow transfers (costliest used path onto the shortest path, exact
    line search), which keeps convergence fast when the solution sits on a
    face of the flow polytope; "line-search" gives the vanilla method and
    "harmonic" the textbook 2/(k+2) schedule, both kept for reference (the
    harmonic schedule is far too slow for tight tolerances).
    """
    return _frank_wolfe(net, demands, "equilibrium", tol, max_iter, step_rule)


def social_optimum(
    net: RoadNetwork,
    demands: Sequence[Demand],
    tol: float = 1e-6,
    max_iter: int = 10_000,
    step_rule: str = "pairwise",
) -> FlowVector:
    """Minimize total travel time by Frank-Wolfe on marginal costs."""
    return _frank_wolfe(net, demands, "optimum", tol, max_iter, step_rule)


def price_of_anarchy(
    net: RoadNetwork,
    demands: Sequence[Demand],
    tol: float = 1e-6,
) -> float:
    """Equilibrium social cost over optimal social cost."""
    eq = frank_wolfe_equilibrium(net, demands, tol)
    opt = social_optimum(net, demands, tol)
    if opt.social_cost <= 0:
        raise SimulatorError("degenerate zero-cost optimum")
    return eq.social_cost / opt.social_cost


# ---------------------------------------------------------------------------
# Path decomposition and trace generation
# ---------------------------------------------------------------------------

MAX_PATHS_PER_COMMODITY = 64


@dataclass(frozen=True)
class PathFlow:
    commodity: int
    nodes: tuple[str, ...]
    edge_indices: tuple[int, ...]
    flow: float
    latency_s: float  # at the aggregate flow the decomposition was made from


def decompose_paths(
    net: RoadNetwork, flow: FlowVector, cap: int = MAX_PATHS_PER_COMMODITY
) -> list[PathFlow]:
    """Split each commodity's edge flow into at most `cap` path flows.

    Paths are extracted by repeated shortest-path search (weighted by latency
    at the aggregate flow) restricted to edges still carrying residual flow;
    any residual left when the cap is hit is spread proportionally over the
    extracted paths.
    """
    latencies = net.latency(flow.edge_flow)
    paths: list[PathFlow] = []
    for c, dem in enumerate(flow.demands):
        residual = flow.commodity_flow[c].copy()
        tol = 1e-9 * dem.rate
        found: list[tuple[tuple[str, ...], tuple[int, ...], float]] = []
        while residual.sum() > tol and len(found) < cap:
            weights = np.where(residual > tol, latencies, np.inf)
            dist, pred = net.shortest_paths(weights, dem.origin)
            if dist.get(dem.destination, math.inf) == math.inf:
                break
            node = dem.destination
            edge_indices: list[int] = []
            while node != dem.origin:
                edge_idx = pred[node]
                edge_indices.append(edge_idx)
                node = net.edges[edge_idx].tail
            edge_indices.reverse()
            amount = float(residual[edge_indices].min())
            residual[edge_indices] -= amount
            node_path = [dem.origin] + [net.edges[i].head for i in edge_indices]
            found.append((tuple(node_path), tuple(edge_indices), amount))
        leftover = float(max(residual.sum(), 0.0))
        total_found = sum(f[2] for f in found)
        if not found:
            raise SimulatorError(
                f"could not decompose flow for {dem.origin}->{dem.destination}"
            )
        for node_path, edge_indices, amount in found:
            if leftover > tol and total_found > 0:
                amount += leftover * amount / total_found
            paths.append(
                PathFlow(
                    commodity=c,
                    nodes=node_path,
                    edge_indices=edge_indices,
                    flow=amount,
                    latency_s=float(sum(latencies[i] for i in edge_indices)),
                )
            )
    return paths


@dataclass
class GroundTruth:
    """Sidecar emitted with every synthetic dataset.

    freeflow_s maps trip_id to the zero-load shortest-path duration for the
    trip's origin/destination nodes (clamped exactly like the analysis
    pipeline clamps: at least 1 s, never above the recorded duration), so a
    pipeline run with the offline provider reproduces soc_overall exactly
    when homes are not jittered.
    """

    freeflow_s: dict[str, float]
    recorded_s: dict[str, float]
    soc_overall: float
    soc_by_day: dict[str, float]
    relative_gap: float
    poa: float | None = None
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "poa": self.poa,
            "soc_overall": self.soc_overall,
            "soc_by_day": self.soc_by_day,
            "relative_gap": self.relative_gap,
            "freeflow_s": self.freeflow_s,
            "recorded_s": self.recorded_s,
            **self.extra,
        }


def _largest_remainder(weights: Sequence[float], total: int) -> list[int]:
    """Apportion `total` integer units proportionally to non-negative weights."""
    s = float(sum(weights))
    if s <= 0:
        raise SimulatorError("cannot apportion agents: zero total weight")
    raw = [w / s * total for w in weights]
    counts = [math.floor(r) for r in raw]
    remainder = total - sum(counts)
    order = sorted(
        range(len(weights)), key=lambda i: (-(raw[i] - counts[i]), i)
    )
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def _truncated_noise(rng: np.random.Generator, sigma: float, latency: float) -> float:
    """Gaussian noise truncated at +-3 sigma, resampled until duration stays > 0."""
    while True:
        z = rng.standard_normal()
        if abs(z) > 3.0:
            continue
        if latency + z * sigma > 0:
            return z * sigma


def generate_traces(
    net: RoadNetwork,
    flow: FlowVector,
    demands: Sequence[Demand],
    n_agents: int,
    noise_sigma_s: float = 0.0,
    day_count: int = 1,
    seed: int = 0,
    home_jitter_m: float = 50.0,
    depart_s: float = 8 * 3600 + 10 * 60,
    start_day: datetime.date = datetime.date(2016, 4, 11),
) -> tuple[Dataset, GroundTruth]:
    """Sample agents onto used paths and emit one TripRecord per agent per day.

    Agents are apportioned to commodities by rate and to paths by path flow;
    each agent keeps the same path, home (jittered up to home_jitter_m around
    the origin node) and departure time on every day, with independent
    truncated-Gaussian duration noise per day. Timestamps are spread linearly
    along the path's node coordinates.
    """
    if n_agents < 1:
        raise InputError("n_agents must be >= 1")
    if not 0 <= home_jitter_m <= 100:
        raise InputError("home jitter must lie in [0, 100] meters")
    demands = tuple(demands)
    if n_agents < len(demands):
        raise SimulatorError(
            f"n_agents={n_agents} cannot cover {len(demands)} demand pairs "
            "(an unused path would be over-sampled)"
        )
    paths = decompose_paths(net, flow)
    per_commodity = _largest_remainder([d.rate for d in demands], n_agents)
    freeflow_weights = net.latency(np.zeros(len(net.edges)))

    trips: list[TripRecord] = []
    schools: dict[str, GeoPoint] = {}
    freeflow_s: dict[str, float] = {}
    recorded_s: dict[str, float] = {}
    per_day_rec: dict[str, float] = {}
    per_day_ff: dict[str, float] = {}
    agent_global = 0
    ff_cache: dict[str, dict[str, float]] = {}
    for c, dem in enumerate(demands):
        commodity_paths = [p for p in paths if p.commodity == c]
        counts = _largest_remainder([p.flow for p in commodity_paths], per_commodity[c])
        if dem.origin not in ff_cache:
            ff_cache[dem.origin], _ = net.shortest_paths(freeflow_weights, dem.origin)
        ff_od = ff_cache[dem.origin][dem.destination]
        school_id = f"sch_{dem.destination}"
        schools[school_id] = net.nodes[dem.destination]
        for path, count in zip(commodity_paths, counts):
            if count > 0 and path.latency_s <= 0:
                raise SimulatorError(
                    f"path {path.nodes} has non-positive latency; cannot emit trips"
                )
            coords = [net.nodes[n] for n in path.nodes]
            for _ in range(count):
                student_id = f"s{agent_global:05d}"
                home = coords[0]
                if home_jitter_m > 0:
                    rng_home = np.random.default_rng((seed, 17, agent_global))
                    radius = home_jitter_m * math.sqrt(rng_home.random())
                    theta = 2 * math.pi * rng_home.random()
                    home = unproject_local(
                        [PlanarPoint(radius * math.cos(theta), radius * math.sin(theta))],
                        coords[0],
                    )[0]
                points_latlon = [home] + coords[1:]
                for day_idx in range(day_count):
                    day = start_day + datetime.timedelta(days=day_idx)
                    trip_id = f"{student_id}_d{day_idx}"
                    duration = path.latency_s
                    if noise_sigma_s > 0:
                        rng_noise = np.random.default_rng(
                            (seed, 23, agent_global, day_idx)
                        )
                        duration += _truncated_noise(
                            rng_noise, noise_sigma_s, path.latency_s
                        )
                    epoch0 = (
                        datetime.datetime(
                            day.year, day.month, day.day, tzinfo=datetime.timezone.utc
                        ).timestamp()
                        + depart_s
                    )
                    times = np.linspace(epoch0, epoch0 + duration, len(points_latlon))
                    trip_points = tuple(
                        TripPoint(t=float(t), loc=loc)
                        for t, loc in zip(times, points_latlon)
                    )
                    dist_m = sum(
                        geodesic_distance(p, q)
                        for p, q in zip(points_latlon, points_latlon[1:])
                    )
                    trips.append(
                        TripRecord(
                            trip_id=trip_id,
                            student_id=student_id,
                            day=day,
                            school_id=school_id,
                            mode=Mode.CAR,
                            points=trip_points,
                            per_mode_distance={Mode.CAR: dist_m},
                        )
                    )
                    clamped = min(max(ff_od, 1.0), duration)
                    freeflow_s[trip_id] = clamped
                    recorded_s[trip_id] = duration
                    per_day_rec[day.isoformat()] = (
                        per_day_rec.get(day.isoformat(), 0.0) + duration
                    )
                    per_day_ff[day.isoformat()] = (
                        per_day_ff.get(day.isoformat(), 0.0) + clamped
                    )
                agent_global += 1

    soc_by_day = {d: per_day_rec[d] / per_day_ff[d] for d in sorted(per_day_rec)}
    ground_truth = GroundTruth(
        freeflow_s=freeflow_s,
        recorded_s=recorded_s,
        soc_overall=sum(per_day_rec.values()) / sum(per_day_ff.values()),
        soc_by_day=soc_by_day,
        relative_gap=flow.relative_gap,
    )
    return Dataset(trips=tuple(trips), schools=schools), ground_truth


# ---------------------------------------------------------------------------
# Built-in instances
# ---------------------------------------------------------------------------


def pigou_linear(
    scale_s: float = 1.0, demand: float = 1.0
) -> tuple[RoadNetwork, list[Demand]]:
    """Two parallel links, l1 = c constant and l2 = c * (x/d): PoA 4/3 at demand d."""
    nodes = {"o": GeoPoint(1.30, 103.78), "d": GeoPoint(1.35, 103.86)}
    edges = [
        Edge("o", "d", a=scale_s, b=0.0, p=1),
        Edge("o", "d", a=0.0, b=scale_s / demand, p=1),
    ]
    return RoadNetwork(nodes, edges), [Demand("o", "d", demand)]


def pigou_quartic(
    scale_s: float = 1.0, demand: float = 1.0
) -> tuple[RoadNetwork, list[Demand]]:
    """Two parallel links, l1 = c and l2 = c * (x/d)^4: PoA ~ 2.1505 at demand d."""
    nodes = {"o": GeoPoint(1.30, 103.78), "d": GeoPoint(1.35, 103.86)}
    edges = [
        Edge("o", "d", a=scale_s, b=0.0, p=1),
        Edge("o", "d", a=0.0, b=scale_s / demand**4, p=4),
    ]
    return RoadNetwork(nodes, edges), [Demand("o", "d", demand)]


def braess(scale_s: float = 1.0, demand: float = 1.0) -> tuple[RoadNetwork, list[Demand]]:
    """Classic 4-node Braess diamond with the zero-cost shortcut; equilibrium
    cost 2*scale per unit of demand."""
    nodes = {
        "s": GeoPoint(1.30, 103.76),
        "v": GeoPoint(1.34, 103.79),
        "w": GeoPoint(1.31, 103.83),
        "t": GeoPoint(1.35, 103.86),
    }
    var = scale_s / demand
    edges = [
        Edge("s", "v", a=0.0, b=var, p=1),
        Edge("v", "t", a=scale_s, b=0.0, p=1),
        Edge("s", "w", a=scale_s, b=0.0, p=1),
        Edge("w", "t", a=0.0, b=var, p=1),
        Edge("v", "w", a=0.0, b=0.0, p=1),
    ]
    return RoadNetwork(nodes, edges), [Demand("s", "t", demand)]


def pigou_bpr(demand: float = 14.0) -> tuple[RoadNetwork, list[Demand]]:
    """Two-link Pigou-style network with BPR degree-4 latencies on both links.

    Unlike the textbook instance, the slow link also congests (huge but
    finite capacity), so pushing more demand keeps increasing everyone's
    travel time: the stress-of-catastrophe grows without bound while the
    price of anarchy decays back toward 1.
    """
    nodes = {"o": GeoPoint(1.30, 103.78), "d": GeoPoint(1.35, 103.86)}
    edges = [
        _bpr_edge("o", "d", t0_s=1500.0, capacity=40.0),
        _bpr_edge("o", "d", t0_s=600.0, capacity=8.0),
    ]
    return RoadNetwork(nodes, edges), [Demand("o", "d", demand)]


def _bpr_edge(tail: str, head: str, t0_s: float, capacity: float) -> Edge:
    """BPR latency t0 * (1 + 0.15 (x/c)^4) as a polynomial edge."""
    return Edge(tail, head, a=t0_s, b=0.15 * t0_s / capacity**4, p=4)


def random_grid(
    rows: int = 4,
    cols: int = 5,
    seed: int = 7,
    n_demands: int = 40,
    rate_scale: float = 700.0,
) -> tuple[RoadNetwork, list[Demand]]:
    """Random 20-node grid around Singapore with BPR degree-4 latencies.

    Neighboring nodes are joined in both directions; free-flow times follow
    the geodesic edge length at 50 km/h and capacities are drawn uniformly,
    so equilibria carry realistic (minutes-scale) durations.
    """
    rng = np.random.default_rng(seed)
    nodes: dict[str, GeoPoint] = {}
    for i in range(rows):
        for j in range(cols):
            nodes[f"n{i}{j}"] = GeoPoint(1.28 + 0.02 * i, 103.70 + 0.025 * j)
    edges = []
    for i in range(rows):
        for j in range(cols):
            here = f"n{i}{j}"
            for di, dj in ((0, 1), (1, 0)):
                ni, nj = i + di, j + dj
                if ni >= rows or nj >= cols:
                    continue
                there = f"n{ni}{nj}"
                length = geodesic_distance(nodes[here], nodes[there])
                t0 = length / 13.9  # 50 km/h
                capacity = float(rng.uniform(20.0, 60.0))
                edges.append(_bpr_edge(here, there, t0, capacity))
                edges.append(_bpr_edge(there, here, t0, capacity))
    node_ids = sorted(nodes)
    demands = []
    seen = set()
    while len(demands) < n_demands:
        o, d = rng.choice(len(node_ids), size=2, replace=False)
        o_id, d_id = node_ids[int(o)], node_ids[int(d)]
        if (o_id, d_id) in seen:
            continue
        seen.add((o_id, d_id))
        demands.append(Demand(o_id, d_id, float(rng.uniform(0.5, 1.5)) * rate_scale / n_demands))
    return RoadNetwork(nodes, edges), demands


BUILTIN_INSTANCES = {
    "pigou-linear": pigou_linear,
    "pigou-quartic": pigou_quartic,
    "braess": braess,
    "pigou-bpr": pigou_bpr,
    "grid": random_grid,
}
