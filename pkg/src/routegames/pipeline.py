"""End-to-end analysis pipeline: ingest -> filter -> cluster -> reports.

Everything here is deterministic for fixed inputs and the offline provider:
two runs write byte-identical reports (the manifest's generated_at timestamp
is the one exception). All report files are JSON or CSV; plotting is left to
whatever consumes them.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime
import hashlib
import json
import platform
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .clustering import SpatialMethod, key_clusters, spatial_clusters
from .equilibration import (
    build_histories,
    consistent_clusters,
    fastest_persistence,
    mode_consistency,
    route_consistency_rate,
)
from .errors import InputError
from .freeflow import (
    ExternalDirectionsProvider,
    OfflineNetworkProvider,
    RouteCache,
)
from .geometry import ContourParams, DEFAULT_BAND_WIDTH_M
from .ingest import load_dataset
from .model import trim_percentiles
from .regret import (
    cross_mode_regret,
    epsilon_for_delta,
    imitation_regret,
    regret_ccdf,
)
from .simulator import load_network
from .soc import free_flow_durations, poa_soc_corollary, stress_of_catastrophe

EPSILON_DELTAS = (0.01, 0.05, 0.1)


@dataclass
class PipelineConfig:
    trips: Path
    schools: Path
    out: Path
    cluster_method: str = "grid"
    cluster_size_m: float = 400.0
    window_min: float = 20.0
    min_cluster_size: int = 2
    band_width_m: float = DEFAULT_BAND_WIDTH_M
    low_pct: float = 5.0
    high_pct: float = 95.0
    freeflow_provider: str = "offline"
    freeflow_network: Path | None = None
    freeflow_endpoint: str | None = None
    freeflow_cache: Path | None = None
    min_over_runs: list[Path] = field(default_factory=list)
    ground_truth: Path | None = None
    seed: int = 0

    def echo(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Path):
                value = str(value)
            elif isinstance(value, list):
                value = [str(v) for v in value]
            out[f.name] = value
        return out


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def write_manifest(
    out_dir: Path, config_echo: dict, inputs: dict[str, Path], status: str,
    failure_stage: str | None = None, error: str | None = None,
) -> None:
    manifest = {
        "config": config_echo,
        "input_hashes": {
            name: (_sha256(p) if p and Path(p).exists() else None)
            for name, p in inputs.items()
        },
        "versions": {
            "routegames": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        "status": status,
        "failure_stage": failure_stage,
        "error": error,
        "generated_at": datetime.datetime.now(datetime.timezone.utc).isoformat(),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(out_dir / "run_manifest.json", manifest)


def _build_provider(config: PipelineConfig):
    if config.freeflow_provider == "offline":
        if config.freeflow_network is None:
            raise InputError("offline provider needs --freeflow-network")
        return OfflineNetworkProvider(load_network(config.freeflow_network)), True
    if config.freeflow_provider == "external":
        if config.freeflow_endpoint is None:
            raise InputError("external provider needs --freeflow-endpoint")
        return ExternalDirectionsProvider(config.freeflow_endpoint), False
    raise InputError(f"unknown free-flow provider {config.freeflow_provider!r}")


def _key_for_sort(row) -> tuple:
    return (row.day.isoformat(), row.key.l, row.key.t, row.key.s, row.key.m, row.trip_id)


def run_analyze(config: PipelineConfig, provider=None) -> dict:
    """Run every analysis and write the report bundle into config.out.

    A pre-built provider can be injected (used by tests to count calls);
    otherwise one is built from the config. Raises on failure after writing
    a manifest recording the failing stage.
    """
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = {"trips": Path(config.trips), "schools": Path(config.schools)}
    stage = "setup"
    try:
        stage = "ingest"
        result = load_dataset(config.trips, config.schools)
        dataset = result.dataset
        if not dataset.trips:
            raise InputError("empty dataset")

        stage = "filter"
        trips = trim_percentiles(list(dataset.trips), config.low_pct, config.high_pct)
        if not trips:
            raise InputError("empty dataset after percentile filter")

        stage = "cluster"
        homes = {t.trip_id: t.origin for t in trips}
        spatial = spatial_clusters(
            homes, config.cluster_size_m, SpatialMethod(config.cluster_method)
        )
        clusters = key_clusters(
            trips,
            spatial,
            window_min=config.window_min,
            min_size=config.min_cluster_size,
            schools=dataset.schools,
        )
        mixed = key_clusters(
            trips,
            spatial,
            window_min=config.window_min,
            min_size=config.min_cluster_size,
            schools=dataset.schools,
            split_mode=False,
        )

        stage = "consistency"
        histories = build_histories(trips)
        contour = ContourParams(band_width_m=config.band_width_m)
        modes = mode_consistency(histories)
        routes = route_consistency_rate(histories, contour)
        consistent = consistent_clusters(clusters)
        persistence = fastest_persistence(consistent)
        consistency_report = {
            "n_students_multi_day": len(histories),
            "mode_consistency": {
                "three_way": {
                    "consistent": modes.threeway_consistent,
                    "fraction": modes.threeway_fraction,
                    "by_mode": modes.threeway_by_mode,
                },
                "grouped": {
                    "consistent": modes.grouped_consistent,
                    "fraction": modes.grouped_fraction,
                    "by_class": modes.grouped_by_class,
                },
            },
            "route_consistency": {
                "eligible": routes.n_eligible,
                "consistent": routes.n_consistent,
                "fraction": routes.fraction,
                "excluded": routes.n_excluded,
            },
            "consistent_clusters": {
                "distinct_clusters": consistent.n_distinct_clusters,
                "consistent_groups": len(consistent.groups),
                "fastest_persisting": persistence.n_persisting,
                "persistence_fraction": persistence.fraction,
            },
        }
        _emit_consistency(out, consistency_report, routes)

        stage = "regret"
        table = imitation_regret(clusters)
        _write_csv(
            out / "regret_table.csv",
            ["trip_id", "day", "l", "t", "s", "m", "duration_s", "baseline_s", "regret_s", "is_baseline"],
            [
                [
                    r.trip_id,
                    r.day.isoformat(),
                    r.key.l,
                    r.key.t,
                    r.key.s,
                    r.key.m,
                    repr(r.duration_s),
                    repr(r.baseline_s),
                    repr(r.regret_s),
                    int(r.is_baseline),
                ]
                for r in sorted(table.rows, key=_key_for_sort)
            ],
        )
        try:
            ccdf = regret_ccdf(table)
            ccdf_rows = [[repr(x), repr(f)] for x, f in ccdf.points]
            regret_summary = {
                "mean_s": ccdf.mean_s,
                "median_s": ccdf.median_s,
                "n_nonzero": ccdf.count,
            }
        except InputError:
            # exact equilibrium: every row is a baseline
            ccdf_rows = []
            regret_summary = {"mean_s": None, "median_s": None, "n_nonzero": 0}
        _write_csv(out / "regret_ccdf.csv", ["x_seconds", "ccdf"], ccdf_rows)
        regret_summary["n_rows"] = len(table.rows)
        regret_summary["n_clusters"] = len(clusters)
        regret_summary["epsilon_at_delta"] = {
            repr(d): (epsilon_for_delta(table, d).epsilon_s if table.rows else None)
            for d in EPSILON_DELTAS
        }
        mixed_stats = cross_mode_regret(mixed)
        regret_summary["cross_mode"] = {
            "n_mixed_clusters": mixed_stats.n_mixed_clusters,
            "n_fastest_private": mixed_stats.n_fastest_private,
            "n_fastest_public": mixed_stats.n_fastest_public,
            "n_ambiguous": mixed_stats.n_ambiguous,
            "fraction_fastest_private": mixed_stats.fraction_fastest_private,
            "mean_cross_regret_s": mixed_stats.mean_cross_regret_s,
            "mean_transit_duration_s": mixed_stats.mean_transit_duration_s,
            "n_transit_rows": mixed_stats.n_transit_rows,
        }
        _write_json(out / "regret_summary.json", regret_summary)

        stage = "freeflow"
        if provider is None:
            provider, offline = _build_provider(config)
        else:
            offline = isinstance(provider, OfflineNetworkProvider)
        cache = RouteCache(config.freeflow_cache)
        if config.min_over_runs:
            cache.merge_min(RouteCache(p) for p in config.min_over_runs)
        batch = free_flow_durations(
            trips, provider, spatial, dataset.schools, cache=cache, offline=offline
        )

        stage = "soc"
        soc_report = stress_of_catastrophe(trips, batch.estimates)
        soc_json = {
            "soc_overall": soc_report.soc_overall,
            "soc_by_mode": soc_report.soc_by_mode,
            "soc_by_class": soc_report.soc_by_class,
            "soc_by_day": soc_report.soc_by_day,
            "n_trips": soc_report.n_trips,
            "n_by_class": soc_report.n_by_class,
            "n_dropped": len(batch.dropped),
            "provider_calls": batch.provider_calls,
        }
        if config.ground_truth is not None:
            truth = json.loads(Path(config.ground_truth).read_text())
            if truth.get("poa") is not None:
                check = poa_soc_corollary(soc_report.soc_overall, float(truth["poa"]))
                soc_json["poa_ground_truth"] = check.poa
                soc_json["poa_le_soc"] = check.passed
        _write_json(out / "soc_report.json", soc_json)
        _write_csv(
            out / "deviation_histogram.csv",
            ["bin_lo", "bin_hi", "count"],
            [
                [repr(lo), "inf" if hi == float("inf") else repr(hi), n]
                for lo, hi, n in soc_report.deviation_histogram
            ],
        )

        write_manifest(out, config.echo(), inputs, status="ok")
        return {
            "consistency": consistency_report,
            "regret": regret_summary,
            "soc": soc_json,
            "n_trips": len(trips),
            "n_rejected": result.n_rejected,
        }
    except Exception as exc:
        write_manifest(
            out, config.echo(), inputs, status="failed",
            failure_stage=stage, error=str(exc),
        )
        raise


def _emit_consistency(out: Path, report: dict, routes) -> None:
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "consistency_report.json", report)
    mc = report["mode_consistency"]
    _write_csv(
        out / "mode_consistency.csv",
        ["grouping", "category", "consistent_students"],
        [
            *[["three_way", m, n] for m, n in sorted(mc["three_way"]["by_mode"].items())],
            ["three_way", "total", mc["three_way"]["consistent"]],
            *[["grouped", c, n] for c, n in sorted(mc["grouped"]["by_class"].items())],
            ["grouped", "total", mc["grouped"]["consistent"]],
        ],
    )
    _write_csv(
        out / "route_consistency.csv",
        ["student_id", "consistent"],
        [[s, int(v)] for s, v in sorted(routes.per_student.items())],
    )
    cc = report["consistent_clusters"]
    _write_csv(
        out / "cluster_persistence.csv",
        ["metric", "value"],
        [
            ["distinct_clusters", cc["distinct_clusters"]],
            ["consistent_groups", cc["consistent_groups"]],
            ["fastest_persisting", cc["fastest_persisting"]],
            ["persistence_fraction", repr(cc["persistence_fraction"])],
        ],
    )


def run_sensitivity(
    config: PipelineConfig, r_list: list[float], method_list: list[str]
) -> dict:
    """Regret CCDF sweep over cluster sizes and spatial methods."""
    if not r_list:
        raise InputError("r_list must not be empty")
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    inputs = {"trips": Path(config.trips), "schools": Path(config.schools)}
    stage = "setup"
    try:
        stage = "ingest"
        result = load_dataset(config.trips, config.schools)
        if not result.dataset.trips:
            raise InputError("empty dataset")
        stage = "filter"
        trips = trim_percentiles(
            list(result.dataset.trips), config.low_pct, config.high_pct
        )
        homes = {t.trip_id: t.origin for t in trips}
        summary: dict[str, dict] = {}
        for method in method_list:
            for r in r_list:
                stage = f"cluster[{method},{r}]"
                spatial = spatial_clusters(homes, r, SpatialMethod(method))
                clusters = key_clusters(
                    trips,
                    spatial,
                    window_min=config.window_min,
                    min_size=config.min_cluster_size,
                    schools=result.dataset.schools,
                )
                table = imitation_regret(clusters)
                name = f"regret_ccdf_{method}_{int(r)}.csv"
                try:
                    ccdf = regret_ccdf(table)
                    rows = [[repr(x), repr(f)] for x, f in ccdf.points]
                    entry = {
                        "mean_s": ccdf.mean_s,
                        "median_s": ccdf.median_s,
                        "n_nonzero": ccdf.count,
                    }
                except InputError:
                    rows = []
                    entry = {"mean_s": None, "median_s": None, "n_nonzero": 0}
                entry["n_clusters"] = len(clusters)
                entry["file"] = name
                _write_csv(out / name, ["x_seconds", "ccdf"], rows)
                summary[f"{method}_{int(r)}"] = entry
        _write_json(out / "sensitivity_summary.json", summary)
        write_manifest(out, config.echo(), inputs, status="ok")
        return summary
    except Exception as exc:
        write_manifest(
            out, config.echo(), inputs, status="failed",
            failure_stage=stage, error=str(exc),
        )
        raise
