"""Routing-game analysis of commuter trip data.

Clusters comparable trips, measures imitation-regret and route/mode
consistency, estimates the stress of catastrophe against free-flow lower
bounds, and validates every estimator against a built-in nonatomic
congestion-game simulator with analytically known price of anarchy.
"""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    Dataset,
    GeoPoint,
    Mode,
    TripPoint,
    TripRecord,
    principal_mode,
    trim_percentiles,
    validate_trip,
)
