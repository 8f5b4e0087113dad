"""Covariate CSV ingestion and spec loading."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np


class ConfigError(ValueError):
    """Invalid user input: missing files, bad specs, malformed tables."""


@dataclass
class CovariateTable:
    columns: list
    values: np.ndarray
    labels: Optional[np.ndarray] = None
    label_column: Optional[str] = None

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]


def load_covariates(path, label_column: Optional[str] = None) -> CovariateTable:
    """Read a numeric CSV with a header row.

    Every cell must parse as a finite float; the first offending cell is
    reported by 1-based data row and column name.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"covariate file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ConfigError(f"{path}: empty file") from None
        rows = []
        for r, record in enumerate(reader, start=1):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(header):
                raise ConfigError(f"{path}: row {r} has {len(record)} cells, header has {len(header)}")
            parsed = []
            for name, cell in zip(header, record):
                try:
                    v = float(cell)
                except ValueError:
                    raise ConfigError(f"{path}: non-numeric value {cell!r} at row {r}, column {name!r}") from None
                if not math.isfinite(v):
                    raise ConfigError(f"{path}: non-finite value {cell!r} at row {r}, column {name!r}")
                parsed.append(v)
            rows.append(parsed)
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    data = np.array(rows, dtype=float)
    if label_column is None:
        return CovariateTable(header, data)
    if label_column not in header:
        raise ConfigError(f"{path}: label column {label_column!r} not in header {header}")
    j = header.index(label_column)
    keep = [k for k in range(len(header)) if k != j]
    if not keep:
        raise ConfigError(f"{path}: no covariate columns besides the label")
    return CovariateTable([header[k] for k in keep], data[:, keep], data[:, j], label_column)


def read_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"spec file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def dump_json(obj, path) -> None:
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
