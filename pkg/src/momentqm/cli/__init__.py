"""Batch runner for momentqm scenarios: ``run <config>``, ``suite <dir>``, ``schema``."""

from .config import ConfigError, ScenarioConfig, build_config, load_config
from .runner import RunOutcome, run, suite
from .seeds import splitmix64, substream, substream_seed

__all__ = [
    "ConfigError", "RunOutcome", "ScenarioConfig", "build_config", "load_config", "main", "run",
    "splitmix64", "substream", "substream_seed", "suite",
]


def main(argv=None) -> int:
    from .main import main as _main

    return _main(argv)
