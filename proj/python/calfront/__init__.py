"""Calving-front delineation on SAR time series (Python bindings)."""

import json

from ._core import (
    DataError,
    NumericalError,
    ValidationError,
    combine_logits,
    compose_series,
    default_config,
    extract_front,
    iou,
    mde,
    rasterize_polygons,
    synthesize,
)
from ._core import run_experiment as _run_experiment

__all__ = [
    "DataError",
    "NumericalError",
    "ValidationError",
    "combine_logits",
    "compose_series",
    "default_config",
    "extract_front",
    "iou",
    "mde",
    "rasterize_polygons",
    "run_experiment",
    "synthesize",
]


def run_experiment(config=None, tag="baseline", out_dir=""):
    """Train and evaluate one experiment. `config` may be a dict, a JSON string or None (defaults)."""
    if config is None:
        config = default_config()
    elif isinstance(config, dict):
        merged = json.loads(default_config())
        merged.update(config)
        config = json.dumps(merged)
    return json.loads(_run_experiment(config, tag, out_dir))
