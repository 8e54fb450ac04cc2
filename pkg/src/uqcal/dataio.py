"""CSV and TOML input/output.

CSV is the interface of record: floats are written with 17 significant
digits so outputs round-trip exactly and identical runs produce
byte-identical files. Readers raise DataFormatError with the offending
line number.
"""

from __future__ import annotations

import csv
import datetime as _dt
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

__all__ = [
    "format_value",
    "write_csv",
    "read_case_series",
    "read_serial_interval",
    "read_wastewater",
    "load_config",
]


def format_value(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def write_csv(path, header, rows):
    """Write rows with deterministic formatting and newline bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    lines.extend(",".join(format_value(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", newline="\n")


def _read_rows(path, expected_columns):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataFormatError(str(exc), path=str(path)) from None
    reader = csv.reader(text.splitlines())
    rows = list(reader)
    if not rows:
        raise DataFormatError("file is empty", path=str(path), line=1)
    header = [h.strip() for h in rows[0]]
    if header != expected_columns:
        raise DataFormatError(
            f"expected header {','.join(expected_columns)!r}, got {','.join(header)!r}",
            path=str(path),
            line=1,
        )
    body = []
    for i, row in enumerate(rows[1:], start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(expected_columns):
            raise DataFormatError(
                f"expected {len(expected_columns)} fields, got {len(row)}",
                path=str(path),
                line=i,
            )
        body.append((i, [cell.strip() for cell in row]))
    if not body:
        raise DataFormatError("no data rows", path=str(path), line=1)
    return body


def _parse_date(text, path, line):
    try:
        return _dt.date.fromisoformat(text)
    except ValueError:
        raise DataFormatError(f"bad ISO date {text!r}", path=path, line=line) from None


def _parse_int(text, path, line, minimum=None):
    try:
        value = int(text)
    except ValueError:
        raise DataFormatError(f"bad integer {text!r}", path=path, line=line) from None
    if minimum is not None and value < minimum:
        raise DataFormatError(f"value {value} below {minimum}", path=path, line=line)
    return value


def _parse_float(text, path, line, positive=False):
    try:
        value = float(text)
    except ValueError:
        raise DataFormatError(f"bad number {text!r}", path=path, line=line) from None
    if not np.isfinite(value) or (positive and value <= 0):
        raise DataFormatError(f"bad value {value}", path=path, line=line)
    return value


def read_case_series(path):
    """Read a `date,cases` file; returns (dates, counts)."""
    body = _read_rows(path, ["date", "cases"])
    dates, counts = [], []
    prev = None
    for line, (date_text, cases_text) in body:
        day = _parse_date(date_text, str(path), line)
        if prev is not None and day != prev + _dt.timedelta(days=1):
            raise DataFormatError(
                f"dates must be consecutive days; {day} follows {prev}",
                path=str(path),
                line=line,
            )
        prev = day
        dates.append(day)
        counts.append(_parse_int(cases_text, str(path), line, minimum=0))
    return dates, np.array(counts, dtype=np.int64)


def read_serial_interval(path):
    """Read a `lag,weight` file; returns weights for lags 1..S."""
    body = _read_rows(path, ["lag", "weight"])
    pairs = []
    for line, (lag_text, weight_text) in body:
        lag = _parse_int(lag_text, str(path), line, minimum=1)
        weight = _parse_float(weight_text, str(path), line)
        if weight < 0:
            raise DataFormatError("weights must be >= 0", path=str(path), line=line)
        pairs.append((lag, weight, line))
    pairs.sort()
    lags = [p[0] for p in pairs]
    if lags != list(range(1, len(lags) + 1)):
        raise DataFormatError(
            f"lags must cover 1..{len(lags)} exactly, got {lags}", path=str(path), line=1
        )
    return np.array([p[1] for p in pairs], dtype=float)


def read_wastewater(path):
    """Read a `date,concentration,catchment_population` file.

    Rows list sampled days only; returns {date: (concentration, catchment)}.
    """
    body = _read_rows(path, ["date", "concentration", "catchment_population"])
    out = {}
    for line, (date_text, conc_text, pop_text) in body:
        day = _parse_date(date_text, str(path), line)
        if day in out:
            raise DataFormatError(f"duplicate date {day}", path=str(path), line=line)
        conc = _parse_float(conc_text, str(path), line, positive=True)
        pop = _parse_float(pop_text, str(path), line, positive=True)
        out[day] = (conc, pop)
    return out


def load_config(path):
    """Load a TOML config with flat per-command sections."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            return _toml.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None
