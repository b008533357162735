"""Observed-data container and its CSV schema.

CSV layout (header required): ``y, w, delta, z1..zp`` plus optional ``x_true``,
``c`` and ``eps``. ``w`` may be an empty field only on rows with ``delta = 0``.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from completecase.errors import ArgumentError, DataFormatError

_Z_COL = re.compile(r"^z(\d+)$")
OPTIONAL_COLUMNS = ("x_true", "c", "eps")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Columns of one sample. ``w`` holds NaN where it is unspecified."""

    y: np.ndarray
    w: np.ndarray
    delta: np.ndarray
    z: np.ndarray
    x_true: np.ndarray | None = None
    c: np.ndarray | None = None
    eps: np.ndarray | None = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).reshape(-1)
        n = y.shape[0]
        if n < 1:
            raise ArgumentError("dataset must have at least one row")
        w = np.asarray(self.w, dtype=float).reshape(-1)
        delta = np.asarray(self.delta)
        if delta.dtype == bool:
            delta = delta.astype(np.int8)
        delta = delta.reshape(-1)
        z = np.asarray(self.z, dtype=float)
        if z.ndim == 1:
            z = z.reshape(n, -1) if z.size else np.zeros((n, 0))
        for name, col in (("w", w), ("delta", delta)):
            if col.shape[0] != n:
                raise ArgumentError(f"column {name} has length {col.shape[0]}, expected {n}")
        if z.ndim != 2 or z.shape[0] != n:
            raise ArgumentError(f"z must have {n} rows, got shape {z.shape}")
        if not np.all((delta == 0) | (delta == 1)):
            raise ArgumentError("delta must be 0/1")
        delta = delta.astype(np.int8)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "z", z)
        for name in OPTIONAL_COLUMNS:
            col = getattr(self, name)
            if col is None:
                continue
            col = np.asarray(col, dtype=float).reshape(-1)
            if col.shape[0] != n:
                raise ArgumentError(f"column {name} has length {col.shape[0]}, expected {n}")
            object.__setattr__(self, name, col)

        obs = delta == 1
        if self.x_true is not None and not np.array_equal(w[obs], self.x_true[obs]):
            raise ArgumentError("w must equal x_true on rows with delta = 1")
        if self.x_true is not None and self.c is not None:
            if not np.array_equal(obs, self.x_true <= self.c):
                raise ArgumentError("delta must equal I(x_true <= c)")
            if not np.array_equal(w, np.minimum(self.x_true, self.c)):
                raise ArgumentError("w must equal min(x_true, c)")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return self.z.shape[1]

    @property
    def n_observed(self) -> int:
        return int(self.delta.sum())

    def replace(self, **changes) -> "Dataset":
        fields = {k: getattr(self, k) for k in ("y", "w", "delta", "z", *OPTIONAL_COLUMNS)}
        fields.update(changes)
        return Dataset(**fields)


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def write_dataset_csv(data: Dataset, path) -> None:
    """Write ``data`` using the dataset schema; NaN ``w`` becomes an empty field."""
    header = ["y", "w", "delta"] + [f"z{j + 1}" for j in range(data.p)]
    extras = [name for name in OPTIONAL_COLUMNS if getattr(data, name) is not None]
    header += extras
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(data.n):
            row = [_fmt(data.y[i]), _fmt(data.w[i]), str(int(data.delta[i]))]
            row += [_fmt(v) for v in data.z[i]]
            row += [_fmt(getattr(data, name)[i]) for name in extras]
            writer.writerow(row)


def _parse_float(text: str, row: int, col: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataFormatError(f"row {row}, column {col!r}: cannot parse {text!r} as a number") from None
    if not math.isfinite(value):
        raise DataFormatError(f"row {row}, column {col!r}: value must be finite")
    return value


def read_dataset_csv(path) -> Dataset:
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError(f"{path}: empty file, header required") from None
        rows = [r for r in reader if any(field.strip() for field in r)]

    for required in ("y", "w", "delta"):
        if required not in header:
            raise DataFormatError(f"{path}: missing required column {required!r}")
    if len(set(header)) != len(header):
        raise DataFormatError(f"{path}: duplicate column names in header")
    z_cols = sorted((int(m.group(1)), h) for h in header if (m := _Z_COL.match(h)))
    if [k for k, _ in z_cols] != list(range(1, len(z_cols) + 1)):
        raise DataFormatError(f"{path}: z columns must be z1..zp without gaps")
    known = {"y", "w", "delta", *OPTIONAL_COLUMNS} | {h for _, h in z_cols}
    unknown = [h for h in header if h not in known]
    if unknown:
        raise DataFormatError(f"{path}: unknown column(s) {', '.join(unknown)}")
    if not rows:
        raise DataFormatError(f"{path}: no data rows")

    idx = {h: k for k, h in enumerate(header)}
    n = len(rows)
    y = np.empty(n)
    w = np.full(n, np.nan)
    delta = np.empty(n, dtype=np.int8)
    z = np.empty((n, len(z_cols)))
    extras = {name: np.full(n, np.nan) for name in OPTIONAL_COLUMNS if name in idx}

    for i, row in enumerate(rows):
        line = i + 2  # 1-based, header is line 1
        if len(row) != len(header):
            raise DataFormatError(f"row {line}: expected {len(header)} fields, got {len(row)}")
        d = row[idx["delta"]].strip()
        if d not in ("0", "1"):
            raise DataFormatError(f"row {line}, column 'delta': expected 0 or 1, got {d!r}")
        delta[i] = int(d)
        y[i] = _parse_float(row[idx["y"]].strip(), line, "y")
        w_text = row[idx["w"]].strip()
        if w_text == "":
            if delta[i] == 1:
                raise DataFormatError(f"row {line}, column 'w': missing value on a row with delta = 1")
        else:
            w[i] = _parse_float(w_text, line, "w")
        for j, (_, name) in enumerate(z_cols):
            z[i, j] = _parse_float(row[idx[name]].strip(), line, name)
        for name, col in extras.items():
            text = row[idx[name]].strip()
            if text:
                col[i] = _parse_float(text, line, name)

    x_true = extras.get("x_true")
    if x_true is not None and np.isnan(x_true).any():
        raise DataFormatError(f"{path}: column 'x_true' has empty fields")
    c = extras.get("c")
    if c is not None and np.isnan(c).any():
        raise DataFormatError(f"{path}: column 'c' has empty fields")
    try:
        return Dataset(y=y, w=w, delta=delta, z=z, x_true=x_true, c=c, eps=extras.get("eps"))
    except ArgumentError as exc:
        raise DataFormatError(f"{path}: {exc}") from None
