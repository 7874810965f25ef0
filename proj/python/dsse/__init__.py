"""Angle-free weighted least-squares state estimation for radial feeders."""

import json

from ._core import (
    DsseError,
    Network,
    ObservabilityError,
    Solution,
    estimate,
    run_scenario,
    solve,
    validate,
)

__all__ = [
    "DsseError",
    "Network",
    "ObservabilityError",
    "Solution",
    "estimate",
    "estimate_document",
    "run_scenario",
    "solve",
    "validate",
]


def estimate_document(network, truth, **kwargs):
    """Like estimate(), with the estimate document decoded into a dict."""
    out = estimate(network, truth, **kwargs)
    out["estimate"] = json.loads(out["estimate"])
    return out
