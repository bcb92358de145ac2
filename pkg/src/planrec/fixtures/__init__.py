"""Bundled reference libraries used by the test suite and the CLI."""

from importlib import resources
from pathlib import Path

NAMES = ("fig6", "station")


def path(name: str) -> Path:
    """Filesystem path of a bundled library file ('fig6' or 'station')."""
    if name not in NAMES:
        raise KeyError(f"no bundled library named '{name}'")
    return Path(str(resources.files(__package__) / f"{name}.json"))
