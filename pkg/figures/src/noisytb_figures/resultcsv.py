"""Independent reader for the simulator's result CSVs.

The figure scripts are pure consumers of the CSV interchange format:
a '#'-prefixed ``key = value`` preamble followed by a fixed header row
and full-precision numeric columns.  Schema violations raise
``ResultCSVError`` (mapped to a nonzero exit by the CLIs).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

COLUMNS = (
    "t",
    "mean_x2", "mean_x_sq", "mean_var", "mean_pn",
    "stderr_mean_x2", "stderr_mean_x_sq", "stderr_mean_var", "stderr_mean_pn",
)

REQUIRED_META = ("gamma", "unravelling", "n_trajectories")


class ResultCSVError(Exception):
    """Input file does not follow the result CSV schema."""


@dataclass
class ResultTable:
    path: str
    meta: dict
    data: np.ndarray  # shape (n_rows, len(COLUMNS))

    @property
    def gamma(self) -> float:
        return float(self.meta["gamma"])

    @property
    def unravelling(self) -> str:
        return str(self.meta["unravelling"])

    def column(self, name: str) -> np.ndarray:
        return self.data[:, COLUMNS.index(name)]

    def label(self) -> str:
        return f"{self.unravelling} gamma={self.gamma:g}"


def _parse_meta(line: str, meta: dict) -> None:
    body = line[1:].strip()
    if "=" not in body:
        return
    key, _, value = body.partition("=")
    value = value.strip()
    if value.startswith(("'", '"')) and value.endswith(("'", '"')):
        meta[key.strip()] = value[1:-1]
        return
    for cast in (int, float):
        try:
            meta[key.strip()] = cast(value)
            return
        except ValueError:
            continue
    meta[key.strip()] = value


def read_result_csv(path) -> ResultTable:
    p = Path(path)
    if not p.is_file():
        raise ResultCSVError(f"{path}: no such file")
    meta: dict = {}
    header = None
    rows = []
    for line in p.read_text().splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            _parse_meta(line, meta)
            continue
        cells = next(csv.reader([line]))
        if header is None:
            header = cells
            if tuple(header) != COLUMNS:
                raise ResultCSVError(
                    f"{path}: header {header} does not match schema {list(COLUMNS)}"
                )
            continue
        if len(cells) != len(COLUMNS):
            raise ResultCSVError(
                f"{path}: row with {len(cells)} fields (expected {len(COLUMNS)})"
            )
        try:
            rows.append([float(v) for v in cells])
        except ValueError as exc:
            raise ResultCSVError(f"{path}: non-numeric field: {line!r}") from exc
    if header is None or not rows:
        raise ResultCSVError(f"{path}: no data rows")
    for key in REQUIRED_META:
        if key not in meta:
            raise ResultCSVError(f"{path}: missing metadata key {key!r}")
    data = np.asarray(rows, dtype=np.float64)
    if np.any(np.diff(data[:, 0]) <= 0):
        raise ResultCSVError(f"{path}: time column must be strictly increasing")
    return ResultTable(path=str(path), meta=meta, data=data)
