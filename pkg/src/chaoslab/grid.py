"""Uniform cell-centred grid fields and their CSV serialization."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

DENSITY_MASS_TOL = 1e-6


def format_value(v: float) -> str:
    """Render a float for CSV output: '.' decimal, shortest round-trip digits, scientific below 1e-4."""
    v = float(v)
    if v == 0.0:
        return "0"
    # repr switches to exponent notation exactly when |v| < 1e-4 (or >= 1e16)
    return repr(v)


@dataclass(frozen=True)
class GridField:
    """Scalar field sampled at the cell centres of a uniform grid.

    ``origin`` is the lower corner of the domain, so the centre of cell ``k``
    along axis ``i`` sits at ``origin[i] + (k + 0.5) * spacing[i]``.
    ``values`` has shape ``shape`` (row-major when flattened).
    """

    origin: tuple[float, ...]
    spacing: tuple[float, ...]
    values: np.ndarray
    time_label: float | None = None
    shape: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        origin = tuple(float(o) for o in np.atleast_1d(self.origin))
        spacing = tuple(float(s) for s in np.atleast_1d(self.spacing))
        values = np.array(self.values, dtype=float)
        if values.ndim == 0:
            raise ValueError("GridField values must have at least one axis")
        if len(origin) != values.ndim or len(spacing) != values.ndim:
            raise ValueError(
                f"origin/spacing length {len(origin)}/{len(spacing)} does not match "
                f"values dimension {values.ndim}"
            )
        if any(s <= 0 for s in spacing):
            raise ValueError(f"spacing must be positive, got {spacing}")
        if not np.all(np.isfinite(values)):
            raise ValueError("GridField values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "shape", values.shape)

    @classmethod
    def from_function(cls, func, lower, upper, n, time_label=None) -> "GridField":
        """Sample ``func`` at cell centres of ``n`` cells per axis over [lower, upper]."""
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        n = np.broadcast_to(np.atleast_1d(n), lower.shape).astype(int)
        spacing = (upper - lower) / n
        axes = [lower[i] + (np.arange(n[i]) + 0.5) * spacing[i] for i in range(lower.size)]
        if lower.size == 1:
            vals = func(axes[0])
        else:
            vals = func(*np.meshgrid(*axes, indexing="ij"))
        return cls(tuple(lower), tuple(spacing), np.asarray(vals, dtype=float), time_label)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis(self, i: int = 0) -> np.ndarray:
        return self.origin[i] + (np.arange(self.shape[i]) + 0.5) * self.spacing[i]

    @property
    def lower(self) -> np.ndarray:
        return np.asarray(self.origin)

    @property
    def upper(self) -> np.ndarray:
        return np.asarray(self.origin) + np.asarray(self.spacing) * np.asarray(self.shape)

    def centers(self) -> np.ndarray:
        """All cell centres as an array of shape (cells, d), row-major order."""
        mesh = np.meshgrid(*[self.axis(i) for i in range(self.ndim)], indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def mass(self) -> float:
        return float(self.values.sum() * self.cell_volume)

    def with_values(self, values, time_label=None) -> "GridField":
        return replace(self, values=np.asarray(values, dtype=float), time_label=time_label)

    def check_density(self, tol: float = DENSITY_MASS_TOL) -> None:
        if np.min(self.values) < -1e-12:
            raise ValueError(f"density has negative values (min {np.min(self.values):.3e})")
        m = self.mass()
        if abs(m - 1.0) > tol:
            raise ValueError(f"density mass {m:.10f} deviates from 1 by more than {tol:g}")

    def interp(self, x) -> np.ndarray:
        """Linear interpolation of a 1D field, zero outside the grid."""
        if self.ndim != 1:
            raise ValueError("interp is only defined for 1D fields")
        return np.interp(np.asarray(x, dtype=float), self.axis(0), self.values, left=0.0, right=0.0)


# -- CSV ----------------------------------------------------------------------
# Two-column schema "key,value". Each field is a block of four header rows
# (origin, spacing, shape, time_label) followed by one "value" row per cell in
# row-major order. Multi-axis entries are space separated.


def _write_block(writer, f: GridField) -> None:
    writer.writerow(["origin", " ".join(format_value(o) for o in f.origin)])
    writer.writerow(["spacing", " ".join(format_value(s) for s in f.spacing)])
    writer.writerow(["shape", " ".join(str(n) for n in f.shape)])
    writer.writerow(["time_label", "" if f.time_label is None else format_value(f.time_label)])
    for v in f.values.ravel():
        writer.writerow(["value", format_value(v)])


def fields_to_csv(fields: Iterable[GridField]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["key", "value"])
    for f in fields:
        _write_block(writer, f)
    return buf.getvalue()


def write_fields(path, fields: Iterable[GridField]) -> Path:
    path = Path(path)
    path.write_text(fields_to_csv(fields))
    return path


def fields_from_csv(text: str) -> list[GridField]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["key", "value"]:
        raise ValueError("GridField CSV must start with the header 'key,value'")
    out: list[GridField] = []
    i = 1
    while i < len(rows):
        head = {}
        for key in ("origin", "spacing", "shape", "time_label"):
            if i >= len(rows) or rows[i][0] != key:
                raise ValueError(f"row {i + 1}: expected '{key}'")
            head[key] = rows[i][1]
            i += 1
        shape = tuple(int(s) for s in head["shape"].split())
        count = int(np.prod(shape))
        vals = []
        for _ in range(count):
            if i >= len(rows) or rows[i][0] != "value":
                raise ValueError(f"row {i + 1}: expected {count} value rows")
            vals.append(float(rows[i][1]))
            i += 1
        out.append(
            GridField(
                origin=tuple(float(o) for o in head["origin"].split()),
                spacing=tuple(float(s) for s in head["spacing"].split()),
                values=np.array(vals).reshape(shape),
                time_label=float(head["time_label"]) if head["time_label"] else None,
            )
        )
    return out


def read_fields(path) -> list[GridField]:
    return fields_from_csv(Path(path).read_text())


@dataclass(frozen=True)
class DensityPath:
    """Time-indexed sequence of 1D density snapshots on a shared grid."""

    times: np.ndarray
    fields: tuple[GridField, ...]

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or times.size != len(self.fields):
            raise ValueError("times and fields must have the same length")
        if times.size > 1 and np.any(np.diff(times) <= 0):
            raise ValueError("snapshot times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "fields", tuple(self.fields))

    @property
    def grid(self) -> GridField:
        return self.fields[0]

    def values(self) -> np.ndarray:
        return np.stack([f.values for f in self.fields])

    def at(self, t: float) -> GridField:
        """Snapshot at time ``t``, linearly interpolated between neighbours."""
        times = self.times
        tol = 1e-9 * max(1.0, abs(t))
        if t < times[0] - tol or t > times[-1] + tol:
            raise ValueError(
                f"no density snapshot covers t={t:.6g} (range [{times[0]:.6g}, {times[-1]:.6g}])"
            )
        k = int(np.searchsorted(times, t))
        if k < times.size and abs(times[k] - t) <= tol:
            return self.fields[k]
        if k > 0 and abs(times[k - 1] - t) <= tol:
            return self.fields[k - 1]
        k = min(max(k, 1), times.size - 1)
        w = (t - times[k - 1]) / (times[k] - times[k - 1])
        vals = (1 - w) * self.fields[k - 1].values + w * self.fields[k].values
        return self.fields[k].with_values(vals, time_label=t)

    def final(self) -> GridField:
        return self.fields[-1]

    def __len__(self) -> int:
        return len(self.fields)
