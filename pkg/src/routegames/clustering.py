"""Spatial clustering of home locations and the four-variable trip grouping.

Two spatial methods are provided. The grid method splits the bounding box of
all home locations into square cells of edge r (fast, but points a few meters
apart can straddle a cell boundary). The ball method runs complete-linkage
agglomerative clustering on the pairwise geodesic distance matrix and cuts
the dendrogram at r, which guarantees every pair inside a cluster is within
r meters.

Trips are then grouped into comparison classes keyed by (l, t, s, m):
spatial cluster, departure time window, school location, and mode class.
"""

from __future__ import annotations

import datetime
import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .errors import InputError
from .geometry import geodesic_matrix, project_local
from .model import GeoPoint, TripRecord, effective_mode

BALL_SIZE_CAP = 100_000


class SpatialMethod(Enum):
    GRID = "grid"
    BALL = "ball"


@dataclass(frozen=True)
class SpatialClustering:
    method: SpatialMethod
    r: float
    assignment: Mapping[str, int]  # trip_id -> spatial cluster id
    centroids: Mapping[int, GeoPoint]


@dataclass(frozen=True, order=True)
class ClusterKey:
    l: int  # spatial cluster id
    t: int  # departure window index
    s: str  # deduplicated school location id
    m: str  # mode class: "public" | "private" | "mixed"


@dataclass(frozen=True)
class Cluster:
    key: ClusterKey
    day: datetime.date
    trips: tuple[TripRecord, ...]


def _centroid(points: Sequence[GeoPoint]) -> GeoPoint:
    return GeoPoint(
        lat=sum(p.lat for p in points) / len(points),
        lon=sum(p.lon for p in points) / len(points),
    )


def grid_clusters(homes: Mapping[str, GeoPoint], r: float) -> SpatialClustering:
    """Assign homes to square grid cells of edge r meters.

    The bounding box is computed in planar coordinates projected about the
    box center; cells are anchored at the box corner, and a point exactly on
    a cell boundary belongs to the cell with the larger index (floor rule).
    """
    if not homes:
        raise InputError("no home locations to cluster")
    if not r > 0:
        raise InputError(f"cluster size must be positive, got {r}")
    ids = sorted(homes)
    pts = [homes[i] for i in ids]
    center = GeoPoint(
        lat=(min(p.lat for p in pts) + max(p.lat for p in pts)) / 2,
        lon=(min(p.lon for p in pts) + max(p.lon for p in pts)) / 2,
    )
    planar = project_local(pts, center)
    xmin = min(p.x for p in planar)
    ymin = min(p.y for p in planar)
    cells: dict[tuple[int, int], list[int]] = {}
    for idx, p in enumerate(planar):
        cell = (math.floor((p.x - xmin) / r), math.floor((p.y - ymin) / r))
        cells.setdefault(cell, []).append(idx)
    assignment: dict[str, int] = {}
    centroids: dict[int, GeoPoint] = {}
    for cluster_id, cell in enumerate(sorted(cells)):
        members = cells[cell]
        for idx in members:
            assignment[ids[idx]] = cluster_id
        centroids[cluster_id] = _centroid([pts[i] for i in members])
    return SpatialClustering(SpatialMethod.GRID, r, assignment, centroids)


def ball_clusters(
    homes: Mapping[str, GeoPoint], r: float, size_cap: int = BALL_SIZE_CAP
) -> SpatialClustering:
    """Complete-linkage agglomeration on geodesic distances, cut at r.

    Every resulting cluster satisfies max pairwise geodesic distance <= r
    exactly. Merging is deterministic: at equal merge distances the pair with
    the lowest trip ids (after sorting) merges first.
    """
    if not homes:
        raise InputError("no home locations to cluster")
    if not r > 0:
        raise InputError(f"cluster size must be positive, got {r}")
    if len(homes) > size_cap:
        raise InputError(
            f"distance matrix too large ({len(homes)} points > cap {size_cap}); "
            "use the grid method"
        )
    ids = sorted(homes)
    pts = [homes[i] for i in ids]
    n = len(ids)
    dist = geodesic_matrix(
        np.array([p.lat for p in pts]), np.array([p.lon for p in pts])
    )
    np.fill_diagonal(dist, np.inf)
    members: list[list[int] | None] = [[i] for i in range(n)]
    if n > 1:
        while True:
            flat = int(np.argmin(dist))
            i, j = divmod(flat, n)
            if dist[i, j] > r:
                break
            if i > j:  # argmin scans row-major, so i < j; keep it explicit
                i, j = j, i
            members[i].extend(members[j])  # type: ignore[union-attr]
            members[j] = None
            # complete linkage: distance to the merged cluster is the max
            merged = np.maximum(dist[i], dist[j])
            merged[i] = np.inf
            dist[i, :] = merged
            dist[:, i] = merged
            dist[j, :] = np.inf
            dist[:, j] = np.inf
    assignment: dict[str, int] = {}
    centroids: dict[int, GeoPoint] = {}
    cluster_id = 0
    for group in members:
        if group is None:
            continue
        for idx in group:
            assignment[ids[idx]] = cluster_id
        centroids[cluster_id] = _centroid([pts[i] for i in group])
        cluster_id += 1
    return SpatialClustering(SpatialMethod.BALL, r, assignment, centroids)


def spatial_clusters(
    homes: Mapping[str, GeoPoint], r: float, method: SpatialMethod
) -> SpatialClustering:
    if method is SpatialMethod.GRID:
        return grid_clusters(homes, r)
    return ball_clusters(homes, r)


def dedupe_school_locations(schools: Mapping[str, GeoPoint]) -> dict[str, str]:
    """Map each school_id to a canonical id shared by co-located schools.

    Schools at the identical coordinates (e.g. a primary and a secondary
    school on one campus) collapse onto the lexicographically smallest id.
    """
    by_loc: dict[tuple[float, float], str] = {}
    mapping: dict[str, str] = {}
    for school_id in sorted(schools):
        loc = schools[school_id]
        key = (loc.lat, loc.lon)
        canonical = by_loc.setdefault(key, school_id)
        mapping[school_id] = canonical
    return mapping


def key_clusters(
    trips: Sequence[TripRecord],
    spatial: SpatialClustering,
    window_min: float = 20.0,
    min_size: int = 2,
    schools: Mapping[str, GeoPoint] | None = None,
    split_mode: bool = True,
) -> list[Cluster]:
    """Group trips per day by (spatial cell, departure window, school, mode class).

    Departure windows are fixed-boundary: index = floor(depart_time / window),
    so the clusters partition the retained trips. Groups smaller than
    min_size are dropped. With split_mode=False the mode variable is ignored,
    producing the mixed clusters used for cross-mode regret (m = "mixed").
    """
    if not window_min > 0:
        raise InputError(f"window size must be positive, got {window_min}")
    school_map = dedupe_school_locations(schools) if schools else None
    window_s = window_min * 60.0
    groups: dict[tuple, list[TripRecord]] = {}
    for trip in trips:
        if trip.trip_id not in spatial.assignment:
            raise InputError(f"trip {trip.trip_id!r} has no spatial cluster")
        l = spatial.assignment[trip.trip_id]
        t = math.floor(trip.depart_time / window_s)
        s = school_map[trip.school_id] if school_map else trip.school_id
        m = effective_mode(trip).mode_class if split_mode else "mixed"
        groups.setdefault((trip.day, ClusterKey(l, t, s, m)), []).append(trip)
    clusters = []
    for (day, key), group in sorted(groups.items(), key=lambda kv: kv[0]):
        if len(group) < min_size:
            continue
        clusters.append(
            Cluster(key=key, day=day, trips=tuple(sorted(group, key=lambda t: t.trip_id)))
        )
    return clusters
