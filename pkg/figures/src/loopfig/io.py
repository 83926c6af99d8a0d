"""Readers for the versioned CSV/JSON outputs of the looploc CLI.

This package performs no physics: every number plotted comes from a
serialized CLI output, validated for schema version 1 on load.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


class InputError(Exception):
    """Missing or incompatible input file."""


def _check_exists(path: str | Path) -> Path:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"input file not found: {p}")
    return p


def read_curve_csv(path: str | Path) -> dict[str, np.ndarray]:
    """Load a CSV with a ``# schema_version=1`` comment and a header row."""
    p = _check_exists(path)
    with p.open("r", encoding="utf-8") as fh:
        version_line = fh.readline().strip()
        if version_line != f"# schema_version={SCHEMA_VERSION}":
            raise InputError(f"{p}: expected schema_version={SCHEMA_VERSION} header")
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if any(len(r) != len(header) for r in rows):
        raise InputError(f"{p}: ragged CSV rows")
    data = np.array(rows, dtype=float) if rows else np.empty((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}


def read_result_json(path: str | Path) -> dict:
    """Load a JSON result document and validate its schema version."""
    p = _check_exists(path)
    with p.open("r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise InputError(f"{p}: expected schema_version={SCHEMA_VERSION}")
    return doc
