"""Reinforced random walks, the VRJP and the hyperbolic sigma model."""

import json as _json

from . import _core
from ._core import ConfigError, ReinforceError, a_c, beta_c, i_beta, i_hat, j_hat

__version__ = _core.version()

__all__ = [
    "ConfigError",
    "ReinforceError",
    "a_c",
    "beta_c",
    "constants",
    "i_beta",
    "i_hat",
    "j_hat",
    "lattice",
    "log_density",
    "run",
    "sample_density",
    "simulate",
    "verify",
]


def lattice(d, n, weight=1.0):
    """Graph description of the box {-n..n}^d."""
    return {"lattice": {"d": d, "n": n, "weight": weight}}


def _graph_text(graph):
    return graph if isinstance(graph, str) else _json.dumps(graph)


def constants(d, beta=None, a=None):
    """Phase constants as a dict; infinite thresholds come back as float('inf')."""
    out = _json.loads(_core.constants_json(d, beta, a))
    return {k: float("inf") if v == "inf" else v for k, v in out.items()}


def log_density(graph, x, root=0):
    return _core.log_density(_graph_text(graph), list(x), root)


def sample_density(graph, n, seed=0, burn_in=10000, root=0):
    """Returns (samples as an n x N array, diagnostics dict)."""
    samples, diagnostics = _core.sample_density(_graph_text(graph), n, seed, burn_in, root)
    return samples, _json.loads(diagnostics)


def simulate(graph, process, seed=0, steps=None, horizon=None, start=0):
    """List of (time, from, to) jumps."""
    return _core.simulate(_graph_text(graph), process, seed, steps, horizon, start)


def verify(suite, seed=0, threads=1, **overrides):
    return _json.loads(_core.verify(suite, _json.dumps(overrides), seed, threads))


def run(config, threads=1):
    """Runs a full experiment config; returns (exit_code, stdout_text, outputs, message)."""
    return _core.run_config(_json.dumps(config), threads)
