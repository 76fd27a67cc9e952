"""Belief-propagation label augmentation with explanatory-subgraph prediction.

The heavy lifting lives in the compiled ``_baed`` extension; this package
re-exports it and adds a couple of convenience wrappers.
"""

import json as _json

from ._baed import *  # noqa: F401,F403
from ._baed import run_experiment_json, strip_timings_json, sweep_json

__all__ = [name for name in dir() if not name.startswith("_")]


def run_experiment(config, out_dir):
    """Run the pipeline from a config dict (or JSON string); returns the report dict."""
    if not isinstance(config, str):
        config = _json.dumps(config)
    return _json.loads(run_experiment_json(config, out_dir))


def sweep(config, axis, values, out_dir):
    """Run a sensitivity sweep; returns {'warnings': [...], 'reports': [...]}."""
    if not isinstance(config, str):
        config = _json.dumps(config)
    return _json.loads(sweep_json(config, axis, list(values), out_dir))


def strip_timings(report):
    """Drop timing/cache fields, leaving the deterministic report body."""
    if not isinstance(report, str):
        report = _json.dumps(report)
    return _json.loads(strip_timings_json(report))
