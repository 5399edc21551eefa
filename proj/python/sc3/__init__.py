"""Python access to the sc3 simulator."""

import json

from . import _core
from ._core import ConfigError, InvalidArgument, afdm_demodulate, afdm_modulate, ofdm_demodulate, ofdm_modulate

__all__ = [
    "ConfigError",
    "InvalidArgument",
    "afdm_demodulate",
    "afdm_modulate",
    "config_hash",
    "generate_scene",
    "is_los",
    "latency_modes",
    "ofdm_demodulate",
    "ofdm_modulate",
    "reference_config",
    "run",
]


def reference_config():
    return json.loads(_core.reference_config())


def config_hash(config):
    return _core.config_hash(json.dumps(config))


def run(experiment, out, config=None, threads=1):
    """Runs one experiment (ber, latency, sar, mission, closed-loop) and returns its report."""
    text = "" if config is None else json.dumps(config)
    return json.loads(_core.run_experiment(experiment, text, str(out), threads))


def latency_modes(config=None):
    return _core.latency_modes("" if config is None else json.dumps(config))


def generate_scene(seed, n_buildings=12):
    return json.loads(_core.generate_scene(seed, n_buildings))


def is_los(a, b, scene):
    return _core.is_los(list(a), list(b), json.dumps(scene))
