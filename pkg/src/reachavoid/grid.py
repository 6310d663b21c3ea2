"""Rectilinear grids, node-valued fields, ghost cells and interpolation.

Fields are stored as numpy arrays shaped ``grid.counts`` in C order, so the
last-listed dimension varies fastest. The on-disk HJRA format writes the same
flattened order.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

MIN_COUNT = 7
MAX_NDIM = 4
HJRA_MAGIC = b"HJRA"
HJRA_VERSION = 1


class GridError(ValueError):
    """Invalid grid construction or a query outside the grid box."""


@dataclass(frozen=True)
class Grid:
    mins: tuple[float, ...]
    maxs: tuple[float, ...]
    counts: tuple[int, ...]
    spacing: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        spacing = tuple((hi - lo) / (n - 1) for lo, hi, n in zip(self.mins, self.maxs, self.counts))
        object.__setattr__(self, "spacing", spacing)

    @property
    def ndim(self) -> int:
        return len(self.counts)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    def axis(self, dim: int) -> np.ndarray:
        """Node coordinates along ``dim``.

        The first half is built from ``mins`` and the second half from
        ``maxs``, so a box symmetric about zero gives coordinates that are
        exact negatives of each other.
        """
        n = self.counts[dim]
        lo, hi, h = self.mins[dim], self.maxs[dim], self.spacing[dim]
        i = np.arange(n, dtype=float)
        x = lo + i * h
        upper = i >= (n - 1) / 2.0
        x[upper] = hi - (n - 1 - i[upper]) * h
        return x

    def axes(self) -> list[np.ndarray]:
        return [self.axis(d) for d in range(self.ndim)]

    def mesh(self) -> np.ndarray:
        """Node coordinates as an array shaped ``(ndim, *counts)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"))

    def contains(self, x: Sequence[float], tol: float = 1e-12) -> bool:
        x = np.asarray(x, dtype=float)
        lo = np.asarray(self.mins) - tol
        hi = np.asarray(self.maxs) + tol
        return bool(np.all(x >= lo) and np.all(x <= hi))

    def same_as(self, other: "Grid") -> bool:
        return self.mins == other.mins and self.maxs == other.maxs and self.counts == other.counts


def create_grid(mins: Sequence[float], maxs: Sequence[float], counts: Sequence[int]) -> Grid:
    """Validate the box and node counts and build a :class:`Grid`."""
    mins = tuple(float(v) for v in mins)
    maxs = tuple(float(v) for v in maxs)
    counts = tuple(int(n) for n in counts)
    if not (len(mins) == len(maxs) == len(counts)):
        raise GridError(f"dimension mismatch: {len(mins)} mins, {len(maxs)} maxs, {len(counts)} counts")
    if not 1 <= len(counts) <= MAX_NDIM:
        raise GridError(f"grid must have 1..{MAX_NDIM} dimensions, got {len(counts)}")
    for d, (lo, hi, n) in enumerate(zip(mins, maxs, counts)):
        if n < MIN_COUNT:
            raise GridError(f"dimension {d}: {n} nodes is below the stencil minimum of {MIN_COUNT}")
        if not (np.isfinite(lo) and np.isfinite(hi)) or hi <= lo:
            raise GridError(f"dimension {d}: degenerate extent [{lo}, {hi}]")
    return Grid(mins, maxs, counts)


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    values: np.ndarray
    time: float

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != self.grid.shape:
            if values.size != self.grid.size:
                raise GridError(f"field has {values.size} values, grid needs {self.grid.size}")
            values = values.reshape(self.grid.shape)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "time", float(self.time))

    def with_values(self, values: np.ndarray, time: float | None = None) -> "ScalarField":
        return ScalarField(self.grid, values, self.time if time is None else time)

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))


def extend_with_ghosts(values: np.ndarray | ScalarField, dim: int, width: int) -> np.ndarray:
    """Pad every grid line along ``dim`` by linear extrapolation.

    Each side continues with the slope of its outermost cell, so globally
    linear data is extended exactly.
    """
    if isinstance(values, ScalarField):
        values = values.values
    values = np.asarray(values, dtype=float)
    if width < 1:
        raise ValueError("ghost width must be positive")
    if values.shape[dim] < 2:
        raise ValueError("need at least two nodes to extrapolate")
    v = np.moveaxis(values, dim, -1)
    k = np.arange(1, width + 1, dtype=float)
    left_slope = (v[..., 1] - v[..., 0])[..., None]
    right_slope = (v[..., -1] - v[..., -2])[..., None]
    left = v[..., :1] - k[::-1] * left_slope
    right = v[..., -1:] + k * right_slope
    out = np.concatenate([left, v, right], axis=-1)
    return np.moveaxis(out, -1, dim)


def _cell_weights(grid: Grid, x: np.ndarray):
    """Lower-corner indices and fractional offsets for points ``x`` (npts, ndim)."""
    idx = np.empty(x.shape, dtype=np.intp)
    frac = np.empty(x.shape, dtype=float)
    for d in range(grid.ndim):
        s = (x[:, d] - grid.mins[d]) / grid.spacing[d]
        # snap round-off so queries at nodes return the stored value exactly
        r = np.round(s)
        s = np.where(np.abs(s - r) < 1e-9, r, s)
        i = np.clip(np.floor(s).astype(np.intp), 0, grid.counts[d] - 2)
        idx[:, d] = i
        frac[:, d] = s - i
    return idx, frac


def interpolate_many(values: np.ndarray, grid: Grid, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Multilinear interpolation of node values at ``points`` shaped (npts, ndim)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != grid.ndim:
        raise GridError(f"points have {points.shape[1]} coordinates, grid has {grid.ndim}")
    lo = np.asarray(grid.mins)
    hi = np.asarray(grid.maxs)
    span = (hi - lo) * tol
    outside = np.any((points < lo - span) | (points > hi + span), axis=1)
    if np.any(outside):
        bad = points[np.argmax(outside)]
        raise GridError(f"point {bad.tolist()} lies outside the grid box")
    idx, frac = _cell_weights(grid, points)
    out = np.zeros(len(points))
    for corner in range(1 << grid.ndim):
        w = np.ones(len(points))
        index = []
        for d in range(grid.ndim):
            bit = (corner >> d) & 1
            w = w * (frac[:, d] if bit else 1.0 - frac[:, d])
            index.append(idx[:, d] + bit)
        out += w * values[tuple(index)]
    return out


def interpolate(field: ScalarField, x: Sequence[float]) -> float:
    """Value of ``field`` at ``x`` by multilinear interpolation.

    Raises:
        GridError: if ``x`` lies outside the grid box.
    """
    return float(interpolate_many(field.values, field.grid, np.asarray(x, dtype=float)[None, :])[0])


def slice_field(field: ScalarField, axis: int, value: float) -> ScalarField:
    """Cut ``field`` at coordinate ``value`` along ``axis`` (linear between nodes).

    Raises:
        GridError: if ``value`` lies outside the axis range or the field is 1D.
    """
    grid = field.grid
    if grid.ndim < 2:
        raise GridError("cannot slice a 1-dimensional field")
    if not 0 <= axis < grid.ndim:
        raise GridError(f"axis {axis} out of range for a {grid.ndim}-dim grid")
    pos = (value - grid.mins[axis]) / grid.spacing[axis]
    n = grid.counts[axis]
    if pos < -1e-9 or pos > n - 1 + 1e-9:
        raise GridError(f"coordinate {value} outside [{grid.mins[axis]}, {grid.maxs[axis]}]")
    i = int(np.clip(np.floor(pos + 1e-9), 0, n - 2))
    w = pos - i
    lo = np.take(field.values, i, axis=axis)
    hi = np.take(field.values, i + 1, axis=axis)
    if abs(w) < 1e-9:
        values = lo
    elif abs(w - 1.0) < 1e-9:
        values = hi
    else:
        values = (1.0 - w) * lo + w * hi
    keep = [d for d in range(grid.ndim) if d != axis]
    sub = create_grid([grid.mins[d] for d in keep], [grid.maxs[d] for d in keep], [grid.counts[d] for d in keep])
    return ScalarField(sub, np.array(values), field.time)


def write_field(path: str | Path, field: ScalarField) -> None:
    """Write ``field`` in the little-endian HJRA binary format."""
    grid = field.grid
    parts = [HJRA_MAGIC, struct.pack("<II", HJRA_VERSION, grid.ndim)]
    for n, lo, hi in zip(grid.counts, grid.mins, grid.maxs):
        parts.append(struct.pack("<Qdd", n, lo, hi))
    parts.append(struct.pack("<d", field.time))
    parts.append(np.ascontiguousarray(field.values, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(parts))


def read_field(path: str | Path) -> ScalarField:
    data = Path(path).read_bytes()
    if data[:4] != HJRA_MAGIC:
        raise GridError(f"{path}: not an HJRA field file")
    version, ndim = struct.unpack_from("<II", data, 4)
    if version != HJRA_VERSION:
        raise GridError(f"{path}: unsupported HJRA version {version}")
    offset = 12
    counts, mins, maxs = [], [], []
    for _ in range(ndim):
        n, lo, hi = struct.unpack_from("<Qdd", data, offset)
        offset += 24
        counts.append(n)
        mins.append(lo)
        maxs.append(hi)
    (time,) = struct.unpack_from("<d", data, offset)
    offset += 8
    grid = create_grid(mins, maxs, counts)
    values = np.frombuffer(data, dtype="<f8", count=grid.size, offset=offset).astype(float)
    return ScalarField(grid, values.reshape(grid.shape), time)
