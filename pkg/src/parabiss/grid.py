"""Uniform grids on intervals and rectangles, scalar fields and their norms.

Nodes are stored in C order.  A node is a boundary node when any of its
indices sits on an extreme of its axis; every other node is interior.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np


class GridMismatchError(ValueError):
    """Two fields that live on different grids were combined."""


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid on ``[0, L1]`` or ``[0, L1] x [0, L2]``."""

    lengths: tuple[float, ...]
    shape: tuple[int, ...]

    def __post_init__(self):
        if len(self.lengths) != len(self.shape) or len(self.shape) not in (1, 2):
            raise ValueError("grid must be 1-D or 2-D with one length per axis")
        for n in self.shape:
            if int(n) != n or n < 3:
                raise ValueError(f"nodes_per_axis must be an integer >= 3, got {n}")
        for L in self.lengths:
            if not (L > 0 and math.isfinite(L)):
                raise ValueError(f"side lengths must be positive, got {L}")

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @cached_property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / (n - 1) for L, n in zip(self.lengths, self.shape))

    @cached_property
    def axes(self) -> tuple[np.ndarray, ...]:
        return tuple(np.linspace(0.0, L, n) for L, n in zip(self.lengths, self.shape))

    @cached_property
    def coords(self) -> np.ndarray:
        """Node coordinates, shape ``(size, ndim)``."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @cached_property
    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for ax, n in enumerate(self.shape):
            lo = [slice(None)] * self.ndim
            hi = [slice(None)] * self.ndim
            lo[ax] = 0
            hi[ax] = n - 1
            mask[tuple(lo)] = True
            mask[tuple(hi)] = True
        mask = mask.ravel()
        mask.flags.writeable = False
        return mask

    @cached_property
    def boundary_indices(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_mask)

    @cached_property
    def interior_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary_mask)

    @cached_property
    def boundary_distance(self) -> np.ndarray:
        """Exact Euclidean distance of each node to the boundary of the box."""
        c = self.coords
        L = np.asarray(self.lengths)
        return np.min(np.concatenate([c, L - c], axis=1), axis=1)

    @cached_property
    def quadrature_weights(self) -> np.ndarray:
        """Tensorized composite-trapezoid weights."""
        w = np.ones(1)
        for h, n in zip(self.spacing, self.shape):
            w1 = np.full(n, h)
            w1[[0, -1]] = h / 2
            w = np.multiply.outer(w, w1)
        return w.ravel()

    @property
    def measure(self) -> float:
        return float(np.prod(self.lengths))

    def describe(self) -> dict:
        return {"lengths": list(self.lengths), "shape": list(self.shape)}


def make_grid(domain: float | Sequence[float], nodes_per_axis: int | Sequence[int]) -> Grid:
    """Build a uniform grid.

    ``domain`` is a length ``L`` (interval) or a pair ``(L1, L2)`` (rectangle);
    ``nodes_per_axis`` is an int, broadcast over axes, or one int per axis.
    """
    lengths = (float(domain),) if np.isscalar(domain) else tuple(float(x) for x in domain)
    if np.isscalar(nodes_per_axis):
        shape = (int(nodes_per_axis),) * len(lengths)
        if nodes_per_axis != shape[0]:
            raise ValueError(f"nodes_per_axis must be an integer, got {nodes_per_axis}")
    else:
        shape = tuple(int(n) for n in nodes_per_axis)
    return Grid(lengths, shape)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Node values of a state on a grid.  Values are read-only."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, grid: Grid, c: float) -> ScalarField:
        return cls(grid, np.full(grid.size, float(c)))

    @classmethod
    def from_function(cls, grid: Grid, fn) -> ScalarField:
        """``fn`` receives one coordinate array per axis."""
        return cls(grid, fn(*grid.coords.T))

    @property
    def boundary_trace(self) -> np.ndarray:
        return self.values[self.grid.boundary_indices]

    @property
    def interior(self) -> np.ndarray:
        return self.values[self.grid.interior_indices]

    def with_values(self, values) -> ScalarField:
        return ScalarField(self.grid, values)

    def _other(self, other):
        if isinstance(other, ScalarField):
            _check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return self.with_values(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_values(self.values - self._other(other))

    def __rsub__(self, other):
        return self.with_values(self._other(other) - self.values)

    def __mul__(self, c: float):
        return self.with_values(self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def maximum(self, other: ScalarField) -> ScalarField:
        return self.with_values(np.maximum(self.values, self._other(other)))

    def minimum(self, other: ScalarField) -> ScalarField:
        return self.with_values(np.minimum(self.values, self._other(other)))

    def norm(self, p: float = math.inf) -> float:
        return lp_norm(self, p)


def _check_same_grid(f: ScalarField, g: ScalarField) -> None:
    if f.grid != g.grid:
        raise GridMismatchError(f"grid mismatch: {f.grid.describe()} vs {g.grid.describe()}")


def leq(f: ScalarField, g: ScalarField, tol: float = 0.0) -> bool:
    """Pointwise order ``f <= g`` (up to ``tol``)."""
    _check_same_grid(f, g)
    return bool(np.all(f.values <= g.values + tol))


def lp_norm(f: ScalarField, p: float = math.inf) -> float:
    """L^p norm; trapezoid quadrature for finite p, node maximum for p = inf."""
    p = float(p)
    if not p >= 1:
        raise ValueError(f"norm exponent must be >= 1, got {p}")
    a = np.abs(f.values)
    if math.isinf(p):
        return float(a.max())
    w = f.grid.quadrature_weights
    if p == 1:
        return float(w @ a)
    amax = a.max()
    if amax == 0:
        return 0.0
    # scale first so large values and large p don't overflow
    return float(amax * (w @ (a / amax) ** p) ** (1.0 / p))


def cutoff_blend(x: ScalarField, a: float, delta: float) -> ScalarField:
    """Blend ``x`` toward the constant ``a`` near the boundary.

    Returns ``(1 - k) x + a k`` with ``k = clip(1 - dist/delta, 0, 1)``, so the
    result equals ``a`` on the boundary and ``x`` at distance >= ``delta``.
    """
    if not delta > 0:
        raise ValueError(f"cutoff width delta must be > 0, got {delta}")
    k = np.clip(1.0 - x.grid.boundary_distance / delta, 0.0, 1.0)
    out = (1.0 - k) * x.values + a * k
    out[x.grid.boundary_mask] = a
    return x.with_values(out)


def field_to_csv(f: ScalarField, path: str | Path | None = None) -> str:
    """Write node coordinates and values as CSV.  Returns the text."""
    names = ["z1", "z2"][: f.grid.ndim]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*names, "value"])
    for row, v in zip(f.grid.coords, f.values):
        w.writerow([*(repr(float(c)) for c in row), repr(float(v))])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def field_from_csv(path: str | Path, grid: Grid | None = None) -> ScalarField:
    """Read a field written by :func:`field_to_csv`.

    Without ``grid`` the grid is inferred from the distinct coordinates.
    """
    text = Path(path).read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    data = np.array([[float(x) for x in r] for r in body if r])
    ndim = len(header) - 1
    coords, values = data[:, :ndim], data[:, ndim]
    if grid is None:
        shape = tuple(len(np.unique(coords[:, k])) for k in range(ndim))
        lengths = tuple(float(coords[:, k].max()) for k in range(ndim))
        grid = Grid(lengths, shape)
    if not np.allclose(coords, grid.coords, rtol=0, atol=1e-12 * max(grid.lengths)):
        raise GridMismatchError("CSV coordinates do not match the grid")
    return ScalarField(grid, values)
