"""Stochastic GFlowNet training engine (Python front end to the C++ core)."""

import json

from ._core import (
    ConfigError,
    Env,
    NotEnumerableError,
    TrainRun,
    UsageError,
    config_keys,
    l1_error,
    make_env,
    mh_run,
    resolve_config,
    run,
    topk_stats,
)
from ._core import eval_checkpoint as _eval_checkpoint
from ._core import train as _train


def _settings(settings=None, **overrides):
    out = {k: str(v) for k, v in (settings or {}).items()}
    for k, v in overrides.items():
        out[k.replace("__", ".")] = str(v)
    return out


def train(settings, method, seed=0):
    """Train one (method, seed) in memory. Returns a TrainRun."""
    return _train(_settings(settings), method, seed)


def metrics(run):
    """Metrics records of a TrainRun as a list of dicts (JSONL schema)."""
    return json.loads(run.metrics_json())


def eval_checkpoint(settings, method, checkpoint, samples=1000, seed=0):
    return json.loads(_eval_checkpoint(_settings(settings), method, checkpoint, samples, seed))


def read_metrics(path):
    """Read a metrics JSONL file."""
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


__all__ = [
    "ConfigError",
    "Env",
    "NotEnumerableError",
    "TrainRun",
    "UsageError",
    "config_keys",
    "eval_checkpoint",
    "l1_error",
    "make_env",
    "metrics",
    "mh_run",
    "read_metrics",
    "resolve_config",
    "run",
    "topk_stats",
    "train",
]
