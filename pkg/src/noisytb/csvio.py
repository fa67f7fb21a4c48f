"""Result CSV schema: '#'-prefixed metadata preamble plus fixed columns.

Every output file embeds the complete run specification so any figure is
reproducible from its CSV alone.  Numeric fields are written with
shortest-round-trip precision, so parse(write(summary)) reproduces the
summary exactly.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigurationError
from .observables import EnsembleSummary

SCHEMA_VERSION = 1

COLUMNS = (
    "t",
    "mean_x2", "mean_x_sq", "mean_var", "mean_pn",
    "stderr_mean_x2", "stderr_mean_x_sq", "stderr_mean_var", "stderr_mean_pn",
)

_META_ORDER = (
    "schema_version", "code_version", "unravelling", "noise", "gamma", "dt",
    "n_sites", "boundary", "seed", "t_max", "initial", "variance", "center",
    "n_trajectories",
)


def write_summary(summary: EnsembleSummary, path) -> None:
    buf = io.StringIO()
    meta = dict(summary.meta)
    meta.setdefault("schema_version", SCHEMA_VERSION)
    meta.setdefault("code_version", __version__)
    for key in _META_ORDER:
        if key in meta:
            buf.write(f"# {key} = {meta[key]!r}\n")
    for key in sorted(set(meta) - set(_META_ORDER)):
        buf.write(f"# {key} = {meta[key]!r}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    cols = [summary.grid,
            summary.mean_x2, summary.mean_x_sq, summary.mean_var, summary.mean_pn,
            summary.stderr_mean_x2, summary.stderr_mean_x_sq,
            summary.stderr_mean_var, summary.stderr_mean_pn]
    for row in zip(*cols):
        writer.writerow([repr(float(v)) for v in row])
    Path(path).write_text(buf.getvalue())


def _parse_meta_value(raw: str):
    raw = raw.strip()
    if raw.startswith(("'", '"')) and raw.endswith(("'", '"')):
        return raw[1:-1]
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            continue
    return raw


def read_summary(path) -> EnsembleSummary:
    """Parse a result CSV back into an ``EnsembleSummary``.

    Raises ``ConfigurationError`` on schema violations (wrong columns,
    non-numeric fields, ragged rows).
    """
    meta: dict = {}
    data_lines: list[str] = []
    header: list[str] | None = None
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                meta[key.strip()] = _parse_meta_value(value)
            continue
        if header is None:
            header = next(csv.reader([line]))
            if tuple(header) != COLUMNS:
                raise ConfigurationError(
                    f"unexpected CSV columns {header}; expected {list(COLUMNS)}"
                )
            continue
        data_lines.append(line)
    if header is None or not data_lines:
        raise ConfigurationError(f"{path}: no data rows found")
    rows = []
    for line in data_lines:
        cells = next(csv.reader([line]))
        if len(cells) != len(COLUMNS):
            raise ConfigurationError(f"{path}: row has {len(cells)} fields, expected {len(COLUMNS)}")
        try:
            rows.append([float(v) for v in cells])
        except ValueError as exc:
            raise ConfigurationError(f"{path}: non-numeric field in row: {line!r}") from exc
    arr = np.asarray(rows, dtype=np.float64)
    return EnsembleSummary(
        grid=arr[:, 0],
        mean_x2=arr[:, 1], mean_x_sq=arr[:, 2], mean_var=arr[:, 3], mean_pn=arr[:, 4],
        stderr_mean_x2=arr[:, 5], stderr_mean_x_sq=arr[:, 6],
        stderr_mean_var=arr[:, 7], stderr_mean_pn=arr[:, 8],
        n_trajectories=int(meta.get("n_trajectories", 0)),
        meta=meta,
    )


def append_fit_line(path, text: str) -> None:
    """Append a '#'-prefixed analysis line to an existing result CSV."""
    with open(path, "a") as fh:
        fh.write(f"# {text}\n")
