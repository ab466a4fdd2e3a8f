"""Locations of the bundled data files and cached default loaders."""

from __future__ import annotations

import os
from functools import lru_cache
from pathlib import Path

DATA_DIR = Path(__file__).with_name("data")


def data_root() -> Path:
    """``$GEOFLOW_HOME`` if set, else the bundled data directory."""
    home = os.environ.get("GEOFLOW_HOME")
    return Path(home) if home else DATA_DIR


@lru_cache(maxsize=None)
def default_registry():
    from .operators.registry import load_registry

    return load_registry(DATA_DIR / "registry.json")


@lru_cache(maxsize=None)
def default_table():
    from .table import load_transform_table

    return load_transform_table(DATA_DIR / "transform_table.json")
