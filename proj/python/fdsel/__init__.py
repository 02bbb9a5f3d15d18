"""Python bindings for the fdsel domain-selection library."""

import json

from ._core import (
    FdselError,
    __version__,
    adjust,
    aggregate,
    arcs,
    exit_code_for,
    exp_covariance,
    heatmap_svg,
    huber_rho,
    pointwise_statistic,
    score,
)
from . import _core


def simulate(config=None):
    """Return (csv_text, truth_dict) for a scenario dict."""
    csv, truth = _core.simulate(json.dumps(config or {}))
    return csv, json.loads(truth)


def run_pipeline(config):
    """Run the full workflow; returns (exit_code, manifest_dict)."""
    code, manifest = _core.run_pipeline(json.dumps(config))
    return code, json.loads(manifest)


__all__ = [
    "FdselError",
    "__version__",
    "adjust",
    "aggregate",
    "arcs",
    "exit_code_for",
    "exp_covariance",
    "heatmap_svg",
    "huber_rho",
    "pointwise_statistic",
    "run_pipeline",
    "score",
    "simulate",
]
