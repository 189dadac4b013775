"""Out-of-sight trajectory denoising and prediction.

Thin wrapper over the native core. Configs are plain dicts overlaid on the
built-in defaults; scenes come back as dicts in the JSONL scene schema.
"""

import json

from ._oostraj import OostrajError, dlt_estimate, method_names, mse_t, project
from . import _oostraj

__all__ = [
    "OostrajError",
    "default_config",
    "dlt_estimate",
    "eval",
    "make_scene",
    "method_names",
    "mse_t",
    "project",
    "resolve_config",
    "simulate",
    "train",
]


def _text(config):
    return "" if config is None else json.dumps(config)


def default_config():
    return json.loads(_oostraj.default_config())


def resolve_config(config):
    """Overlay `config` on the defaults and validate it."""
    return json.loads(_oostraj.resolve_config(_text(config)))


def make_scene(seed, config=None):
    return json.loads(_oostraj.make_scene(_text(config), seed))


def simulate(out, config=None):
    return _oostraj.simulate(_text(config), str(out))


def train(dataset, out, methods=("ours",), config=None):
    return _oostraj.train(_text(config), str(dataset), str(out), list(methods))


def eval(dataset, out, checkpoints, methods=(), config=None):
    """Scores methods on the test split; returns the report as CSV text."""
    return _oostraj.eval(_text(config), str(dataset), str(out), list(methods), [str(c) for c in checkpoints])
