"""Benchmark DAE files and trajectory fixtures shipped with the package."""

from importlib import resources
from pathlib import Path

NAMES = ("intro", "lcfail", "no_matching", "singular_point", "pendulum", "robot_arm",
         "transistor", "ring_modulator")
BENCHMARKS = ("pendulum", "robot_arm", "transistor", "ring_modulator")


def path(name: str) -> Path:
    """Path of a shipped file; ``name`` may omit the ``.dae`` suffix."""
    if "." not in name:
        name += ".dae"
    p = resources.files(__name__) / name
    if not p.is_file():
        raise FileNotFoundError(f"no shipped instance named {name!r}")
    return Path(str(p))


def text(name: str) -> str:
    return path(name).read_text(encoding="utf-8")
