"""Boundary inputs: bounded functions of time on the boundary nodes.

Every signal knows its sup norm over ``t >= 0`` and the boundary, and its
exact infimum/supremum, which is what the constant envelope needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import Grid


class BoundarySignal:
    """Base class.  Subclasses implement :meth:`scalar` or override :meth:`evaluate`."""

    kind = "abstract"

    def scalar(self, t: float) -> float:
        raise NotImplementedError

    def evaluate(self, t: float, grid: Grid) -> np.ndarray:
        """Values on ``grid.boundary_indices`` at time ``t``."""
        if t < 0:
            raise ValueError("signals are defined for t >= 0")
        return np.full(grid.boundary_indices.size, self.scalar(t))

    def bounds(self) -> tuple[float, float]:
        """Exact ``(inf, sup)`` over all ``t >= 0`` and boundary points."""
        raise NotImplementedError

    @property
    def sup_norm(self) -> float:
        lo, hi = self.bounds()
        return max(abs(lo), abs(hi))

    def shifted(self, tau: float) -> BoundarySignal:
        """The time shift ``u(tau + .)``."""
        return ShiftedSignal(self, tau)

    def descriptor(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantInput(BoundarySignal):
    """Input constant in time and space."""

    value: float
    kind = "constant"

    def scalar(self, t):
        return float(self.value)

    def bounds(self):
        return (float(self.value), float(self.value))

    def shifted(self, tau):
        return self

    def descriptor(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class SinusoidSignal(BoundarySignal):
    """``offset + amplitude * sin(omega * t + phase)``, uniform on the boundary."""

    amplitude: float
    omega: float
    phase: float = 0.0
    offset: float = 0.0
    kind = "sinusoid"

    def scalar(self, t):
        return self.offset + self.amplitude * math.sin(self.omega * t + self.phase)

    def bounds(self):
        a = abs(self.amplitude)
        if self.omega == 0:
            v = self.scalar(0.0)
            return (v, v)
        return (self.offset - a, self.offset + a)

    def descriptor(self):
        return {"kind": self.kind, "amplitude": self.amplitude, "omega": self.omega,
                "phase": self.phase, "offset": self.offset}


@dataclass(frozen=True)
class PiecewiseConstantSignal(BoundarySignal):
    """``values[i]`` on ``[breaks[i-1], breaks[i])``; the last value holds forever."""

    breaks: tuple[float, ...]
    values: tuple[float, ...]
    kind = "piecewise-constant"

    def __post_init__(self):
        if len(self.values) != len(self.breaks) + 1:
            raise ValueError("need exactly one more value than break times")
        if any(b <= 0 for b in self.breaks) or list(self.breaks) != sorted(set(self.breaks)):
            raise ValueError("break times must be positive and strictly increasing")

    def scalar(self, t):
        return float(self.values[int(np.searchsorted(self.breaks, t, side="right"))])

    def bounds(self):
        return (float(min(self.values)), float(max(self.values)))

    def descriptor(self):
        return {"kind": self.kind, "breaks": list(self.breaks), "values": list(self.values)}


@dataclass(frozen=True, eq=False)
class TabulatedSignal(BoundarySignal):
    """Samples ``traces[j]`` at ``times[j]``, linear in between, held after the last.

    ``traces`` is ``(m,)`` for a spatially uniform signal or ``(m, n_boundary)``.
    """

    times: np.ndarray
    traces: np.ndarray = field(repr=False)
    kind = "tabulated"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.traces, dtype=float)
        if t.ndim != 1 or t.size < 1 or t[0] != 0 or np.any(np.diff(t) <= 0):
            raise ValueError("times must start at 0 and increase strictly")
        if v.shape[0] != t.size or v.ndim not in (1, 2):
            raise ValueError("traces must have one row per time")
        if not np.all(np.isfinite(v)):
            raise ValueError("tabulated signal must be finite")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "traces", v)

    @property
    def uniform(self) -> bool:
        return self.traces.ndim == 1

    def _at(self, t):
        if t >= self.times[-1]:
            return self.traces[-1]
        j = int(np.searchsorted(self.times, t, side="right")) - 1
        w = (t - self.times[j]) / (self.times[j + 1] - self.times[j])
        if w == 0:
            return self.traces[j]
        return (1 - w) * self.traces[j] + w * self.traces[j + 1]

    def scalar(self, t):
        if not self.uniform:
            raise ValueError("spatially varying signal has no scalar value")
        return float(self._at(t))

    def evaluate(self, t, grid):
        if t < 0:
            raise ValueError("signals are defined for t >= 0")
        if self.uniform:
            return np.full(grid.boundary_indices.size, float(self._at(t)))
        if self.traces.shape[1] != grid.boundary_indices.size:
            raise ValueError("trace length does not match the grid boundary")
        return np.array(self._at(t), dtype=float)

    def bounds(self):
        return (float(self.traces.min()), float(self.traces.max()))

    def descriptor(self):
        return {"kind": self.kind, "times": self.times.tolist(), "traces": self.traces.tolist()}


@dataclass(frozen=True)
class ShiftedSignal(BoundarySignal):
    base: BoundarySignal
    tau: float
    kind = "shifted"

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("shift must be nonnegative")

    def scalar(self, t):
        return self.base.scalar(self.tau + t)

    def evaluate(self, t, grid):
        return self.base.evaluate(self.tau + t, grid)

    def bounds(self):
        # the tail never exceeds the full range; exact for the periodic/held types
        return self.base.bounds()

    def descriptor(self):
        return {"kind": self.kind, "tau": self.tau, "base": self.base.descriptor()}


@dataclass(frozen=True)
class ScaledSumSignal(BoundarySignal):
    """``sum_i c_i u_i``; used for the linearity property."""

    terms: tuple[tuple[float, BoundarySignal], ...]
    kind = "combination"

    def evaluate(self, t, grid):
        return sum(c * s.evaluate(t, grid) for c, s in self.terms)

    def scalar(self, t):
        return sum(c * s.scalar(t) for c, s in self.terms)

    def bounds(self):
        lo = hi = 0.0
        for c, s in self.terms:
            a, b = s.bounds()
            lo += min(c * a, c * b)
            hi += max(c * a, c * b)
        return (lo, hi)

    def descriptor(self):
        return {"kind": self.kind, "terms": [[c, s.descriptor()] for c, s in self.terms]}


@dataclass(frozen=True)
class SwitchedSignal(BoundarySignal):
    """``before`` on ``[0, t_switch]``, ``after`` afterwards."""

    before: BoundarySignal
    after: BoundarySignal
    t_switch: float
    kind = "switched"

    def evaluate(self, t, grid):
        return (self.before if t <= self.t_switch else self.after).evaluate(t, grid)

    def scalar(self, t):
        return (self.before if t <= self.t_switch else self.after).scalar(t)

    def bounds(self):
        a, b = self.before.bounds()
        c, d = self.after.bounds()
        return (min(a, c), max(b, d))

    def descriptor(self):
        return {"kind": self.kind, "t_switch": self.t_switch,
                "before": self.before.descriptor(), "after": self.after.descriptor()}


def signal_from_descriptor(d: dict) -> BoundarySignal:
    kind = d.get("kind")
    if kind == "constant":
        return ConstantInput(float(d["value"]))
    if kind == "sinusoid":
        return SinusoidSignal(float(d["amplitude"]), float(d["omega"]),
                              float(d.get("phase", 0.0)), float(d.get("offset", 0.0)))
    if kind == "piecewise-constant":
        return PiecewiseConstantSignal(tuple(map(float, d["breaks"])), tuple(map(float, d["values"])))
    if kind == "tabulated":
        return TabulatedSignal(np.asarray(d["times"]), np.asarray(d["traces"]))
    if kind == "shifted":
        return ShiftedSignal(signal_from_descriptor(d["base"]), float(d["tau"]))
    if kind == "switched":
        return SwitchedSignal(signal_from_descriptor(d["before"]), signal_from_descriptor(d["after"]),
                              float(d["t_switch"]))
    if kind == "combination":
        return ScaledSumSignal(tuple((float(c), signal_from_descriptor(s)) for c, s in d["terms"]))
    raise ValueError(f"unknown or unbounded signal descriptor: {kind!r}")
