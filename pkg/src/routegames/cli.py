"""Command-line interface.

Subcommands: ingest, analyze, simulate, sensitivity, freeflow-fetch.
A TOML file passed via --config supplies values for any flag not given
explicitly on the command line (flags mirror config keys 1:1, dashes
becoming underscores). Exit codes: 0 success, 1 internal error, 2 invalid
input, 3 provider failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .clustering import SpatialMethod, grid_clusters
from .errors import InputError, ProviderFailure, RoutegamesError
from .freeflow import OfflineNetworkProvider, RouteCache
from .geometry import DEFAULT_BAND_WIDTH_M
from .ingest import load_dataset, write_schools, write_trips
from .model import effective_mode
from .pipeline import PipelineConfig, run_analyze, run_sensitivity, write_manifest
from .simulator import (
    BUILTIN_INSTANCES,
    braess,
    frank_wolfe_equilibrium,
    generate_traces,
    load_demands,
    load_network,
    pigou_bpr,
    pigou_linear,
    pigou_quartic,
    price_of_anarchy,
    random_grid,
)
from .soc import free_flow_durations

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INVALID_INPUT = 2
EXIT_PROVIDER = 3


def _add_analyze_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--trips", type=Path, help="trips.jsonl input")
    parser.add_argument("--schools", type=Path, help="schools.csv input")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--cluster-method", choices=["grid", "ball"])
    parser.add_argument("--cluster-size-m", type=float)
    parser.add_argument("--window-min", type=float)
    parser.add_argument("--min-cluster-size", type=int)
    parser.add_argument("--band-width-m", type=float)
    parser.add_argument("--low-pct", type=float)
    parser.add_argument("--high-pct", type=float)
    parser.add_argument("--freeflow-provider", choices=["offline", "external"])
    parser.add_argument("--freeflow-network", type=Path, help="network.json for the offline provider")
    parser.add_argument("--freeflow-endpoint", help="URL of the external directions service")
    parser.add_argument("--freeflow-cache", type=Path)
    parser.add_argument(
        "--min-over-runs", type=Path, nargs="*",
        help="extra cache files; the minimum duration per key wins",
    )
    parser.add_argument("--ground-truth", type=Path, help="ground_truth.json for the corollary check")
    parser.add_argument("--seed", type=int)


_ANALYZE_DEFAULTS = {
    "cluster_method": "grid",
    "cluster_size_m": 400.0,
    "window_min": 20.0,
    "min_cluster_size": 2,
    "band_width_m": DEFAULT_BAND_WIDTH_M,
    "low_pct": 5.0,
    "high_pct": 95.0,
    "freeflow_provider": "offline",
    "freeflow_network": None,
    "freeflow_endpoint": None,
    "freeflow_cache": None,
    "min_over_runs": [],
    "ground_truth": None,
    "seed": 0,
}


def _merge_config(args: argparse.Namespace, keys: list[str], defaults: dict) -> dict:
    """Explicit flags win over --config values, which win over defaults."""
    file_values = {}
    if getattr(args, "config", None):
        with open(args.config, "rb") as fh:
            file_values = tomllib.load(fh)
    merged = {}
    for key in keys:
        value = getattr(args, key, None)
        if value is None:
            value = file_values.get(key, defaults.get(key))
        merged[key] = value
    return merged


def _pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    keys = ["trips", "schools", "out", *_ANALYZE_DEFAULTS.keys()]
    merged = _merge_config(args, keys, _ANALYZE_DEFAULTS)
    for required in ("trips", "schools", "out"):
        if merged[required] is None:
            raise InputError(f"missing required option --{required}")
    for key in ("trips", "schools", "out", "freeflow_network", "freeflow_cache", "ground_truth"):
        if merged[key] is not None:
            merged[key] = Path(merged[key])
    merged["min_over_runs"] = [Path(p) for p in merged["min_over_runs"] or []]
    return PipelineConfig(**merged)


def _cmd_analyze(args: argparse.Namespace) -> int:
    config = _pipeline_config(args)
    summary = run_analyze(config)
    print(f"analyze: {summary['n_trips']} trips analyzed, reports in {config.out}")
    return EXIT_OK


def _cmd_sensitivity(args: argparse.Namespace) -> int:
    config = _pipeline_config(args)
    merged = _merge_config(
        args, ["r_list", "methods"], {"r_list": [400.0], "methods": ["grid"]}
    )
    r_list = [float(r) for r in merged["r_list"]]
    methods = list(merged["methods"])
    summary = run_sensitivity(config, r_list, methods)
    print(f"sensitivity: {len(summary)} sweeps written to {config.out}")
    return EXIT_OK


def _cmd_ingest(args: argparse.Namespace) -> int:
    merged = _merge_config(args, ["trips", "schools", "out"], {})
    for required in ("trips", "schools", "out"):
        if merged[required] is None:
            raise InputError(f"missing required option --{required}")
    out = Path(merged["out"])
    out.mkdir(parents=True, exist_ok=True)
    inputs = {"trips": Path(merged["trips"]), "schools": Path(merged["schools"])}
    try:
        result = load_dataset(merged["trips"], merged["schools"])
        write_trips(result.dataset.trips, out / "trips.jsonl")
        write_schools(dict(result.dataset.schools), out / "schools.csv")
        summary = {
            "n_read": result.n_read,
            "n_accepted": len(result.dataset.trips),
            "n_rejected": result.n_rejected,
            "rejects_file": str(result.rejects_path) if result.rejects_path else None,
        }
        (out / "ingest_summary.json").write_text(
            json.dumps(summary, indent=2, sort_keys=True) + "\n"
        )
        write_manifest(out, {k: str(v) for k, v in merged.items()}, inputs, status="ok")
        print(
            f"ingest: accepted {summary['n_accepted']}/{summary['n_read']} trips"
            + (f", rejects in {summary['rejects_file']}" if result.n_rejected else "")
        )
        return EXIT_OK
    except Exception as exc:
        write_manifest(
            out, {k: str(v) for k, v in merged.items()}, inputs,
            status="failed", failure_stage="ingest", error=str(exc),
        )
        raise


_SIMULATE_DEFAULTS = {
    "scale_s": 1200.0,
    "demand_scale": 1.0,
    "n_agents": 200,
    "days": 2,
    "noise_sigma_s": 0.0,
    "home_jitter_m": 0.0,
    "seed": 0,
    "tol": 1e-6,
}


def _cmd_simulate(args: argparse.Namespace) -> int:
    merged = _merge_config(
        args,
        ["out", "pigou", "braess", "pigou_bpr", "grid", "network", "demands",
         *_SIMULATE_DEFAULTS.keys()],
        _SIMULATE_DEFAULTS,
    )
    if merged["out"] is None:
        raise InputError("missing required option --out")
    out = Path(merged["out"])
    out.mkdir(parents=True, exist_ok=True)
    scale = float(merged["scale_s"])
    if merged["pigou"] == "linear":
        net, demands = pigou_linear(scale_s=scale)
        instance = "pigou-linear"
    elif merged["pigou"] == "quartic":
        net, demands = pigou_quartic(scale_s=scale)
        instance = "pigou-quartic"
    elif merged["braess"]:
        net, demands = braess(scale_s=scale)
        instance = "braess"
    elif merged["pigou_bpr"]:
        net, demands = pigou_bpr()
        instance = "pigou-bpr"
    elif merged["grid"]:
        net, demands = random_grid(seed=int(merged["seed"]) or 7)
        instance = "grid"
    elif merged["network"] and merged["demands"]:
        net = load_network(merged["network"])
        demands = load_demands(merged["demands"])
        instance = "custom"
    else:
        raise InputError(
            "pick an instance: --pigou {linear,quartic}, --braess, --pigou-bpr, "
            "--grid, or --network FILE --demands FILE"
        )
    if float(merged["demand_scale"]) != 1.0:
        from .simulator import Demand

        demands = [
            Demand(d.origin, d.destination, d.rate * float(merged["demand_scale"]))
            for d in demands
        ]
    inputs = {}
    try:
        tol = float(merged["tol"])
        flow = frank_wolfe_equilibrium(net, demands, tol=tol)
        poa = price_of_anarchy(net, demands, tol=tol)
        dataset, truth = generate_traces(
            net,
            flow,
            demands,
            n_agents=int(merged["n_agents"]),
            noise_sigma_s=float(merged["noise_sigma_s"]),
            day_count=int(merged["days"]),
            seed=int(merged["seed"]),
            home_jitter_m=float(merged["home_jitter_m"]),
        )
        truth.poa = poa
        truth.extra["instance"] = instance
        truth.extra["demand_scale"] = float(merged["demand_scale"])
        write_trips(dataset.trips, out / "trips.jsonl")
        write_schools(dict(dataset.schools), out / "schools.csv")
        (out / "network.json").write_text(
            json.dumps(net.to_json(), indent=2, sort_keys=True) + "\n"
        )
        (out / "ground_truth.json").write_text(
            json.dumps(truth.to_json(), indent=2, sort_keys=True) + "\n"
        )
        write_manifest(
            out, {k: str(v) for k, v in merged.items()}, inputs, status="ok"
        )
        print(
            f"simulate[{instance}]: {len(dataset.trips)} trips, "
            f"PoA {poa:.4f}, SoC {truth.soc_overall:.4f} -> {out}"
        )
        return EXIT_OK
    except Exception as exc:
        write_manifest(
            out, {k: str(v) for k, v in merged.items()}, inputs,
            status="failed", failure_stage="simulate", error=str(exc),
        )
        raise


def _cmd_freeflow_fetch(args: argparse.Namespace) -> int:
    merged = _merge_config(
        args,
        ["trips", "schools", "network", "cache", "cluster_size_m"],
        {"cluster_size_m": 400.0},
    )
    for required in ("trips", "schools", "network", "cache"):
        if merged[required] is None:
            raise InputError(f"missing required option --{required}")
    result = load_dataset(merged["trips"], merged["schools"])
    trips = list(result.dataset.trips)
    if not trips:
        raise InputError("empty dataset")
    homes = {t.trip_id: t.origin for t in trips}
    spatial = grid_clusters(homes, float(merged["cluster_size_m"]))
    provider = OfflineNetworkProvider(load_network(merged["network"]))
    cache = RouteCache(merged["cache"])
    batch = free_flow_durations(
        trips, provider, spatial, dict(result.dataset.schools), cache=cache
    )
    print(
        f"freeflow-fetch: {batch.provider_calls} provider calls, "
        f"{len(cache)} cached keys, {len(batch.dropped)} dropped"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="routegames",
        description="Routing-game analysis of commuter trips, with a congestion-game simulator for validation.",
    )
    parser.add_argument("--config", type=Path, help="TOML file mirroring the flags")
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="validate and normalize a trip dataset")
    p_ingest.add_argument("--trips", type=Path)
    p_ingest.add_argument("--schools", type=Path)
    p_ingest.add_argument("--out", type=Path)
    p_ingest.set_defaults(func=_cmd_ingest)

    p_analyze = sub.add_parser("analyze", help="run the full analysis pipeline")
    _add_analyze_flags(p_analyze)
    p_analyze.set_defaults(func=_cmd_analyze)

    p_sim = sub.add_parser("simulate", help="generate synthetic trips with known ground truth")
    p_sim.add_argument("--out", type=Path)
    p_sim.add_argument("--pigou", choices=["linear", "quartic"])
    p_sim.add_argument("--braess", action="store_const", const=True)
    p_sim.add_argument("--pigou-bpr", action="store_const", const=True)
    p_sim.add_argument("--grid", action="store_const", const=True)
    p_sim.add_argument("--network", type=Path)
    p_sim.add_argument("--demands", type=Path)
    p_sim.add_argument("--scale-s", type=float, help="latency scale in seconds")
    p_sim.add_argument("--demand-scale", type=float)
    p_sim.add_argument("--n-agents", type=int)
    p_sim.add_argument("--days", type=int)
    p_sim.add_argument("--noise-sigma-s", type=float)
    p_sim.add_argument("--home-jitter-m", type=float)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--tol", type=float)
    p_sim.set_defaults(func=_cmd_simulate)

    p_sens = sub.add_parser("sensitivity", help="regret CCDF sweep over cluster sizes/methods")
    _add_analyze_flags(p_sens)
    p_sens.add_argument("--r-list", type=float, nargs="*")
    p_sens.add_argument("--methods", nargs="*", choices=["grid", "ball"])
    p_sens.set_defaults(func=_cmd_sensitivity)

    p_fetch = sub.add_parser("freeflow-fetch", help="prefetch free-flow durations into a cache")
    p_fetch.add_argument("--trips", type=Path)
    p_fetch.add_argument("--schools", type=Path)
    p_fetch.add_argument("--network", type=Path)
    p_fetch.add_argument("--cache", type=Path)
    p_fetch.add_argument("--cluster-size-m", type=float)
    p_fetch.set_defaults(func=_cmd_freeflow_fetch)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    except ProviderFailure as exc:
        print(f"provider error: {exc}", file=sys.stderr)
        return EXIT_PROVIDER
    except (RoutegamesError, OSError, ValueError, KeyError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
