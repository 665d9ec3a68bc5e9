"""Control-system axioms checked on the discrete flow: identity, causality,
cocycle, plus linearity for linear specs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, ScalarField
from .monotone import random_admissible_state, random_signal
from .signals import BoundarySignal, ScaledSumSignal, SwitchedSignal
from .solver import NEWTON_TOL, NonlinearitySpec, Trajectory, as_operator, simulate_boundary


def identity_gap(tr: Trajectory, x0: ScalarField) -> float:
    return float(np.max(np.abs(tr.states[0] - x0.values)))


def cocycle_gap(spec, grid: Grid, x0: ScalarField, u: BoundarySignal, T: float, dt: float,
                restart_step: int) -> float:
    """Max per-stamp gap between a direct run and one restarted at stamp ``restart_step``."""
    op = as_operator(spec, grid)
    direct = simulate_boundary(op, grid, x0, u, T, dt)
    if not 0 < restart_step < len(direct) - 1:
        raise ValueError("restart step must be an interior stamp")
    t1 = float(direct.times[restart_step])
    tail = simulate_boundary(op, grid, direct.field(restart_step), u.shifted(t1), T - t1, dt)
    ref = direct.states[restart_step:]
    if tail.states.shape != ref.shape:
        raise ValueError("restarted run has a different number of stamps")
    return float(np.max(np.abs(tail.states - ref)))


def causality_gap(spec, grid: Grid, x0: ScalarField, u: BoundarySignal, other: BoundarySignal,
                  T: float, dt: float, switch_step: int) -> float:
    """Inputs agreeing up to stamp ``switch_step`` must give identical states there."""
    op = as_operator(spec, grid)
    t1 = switch_step * dt
    w = SwitchedSignal(u, other, t1)
    a = simulate_boundary(op, grid, x0, u, T, dt)
    b = simulate_boundary(op, grid, x0, w, T, dt)
    return float(np.max(np.abs(a.states[: switch_step + 1] - b.states[: switch_step + 1])))


def linearity_gap(spec, grid: Grid, x0: ScalarField, u: BoundarySignal, x1: ScalarField, v: BoundarySignal,
                  alpha: float, beta: float, T: float, dt: float) -> float:
    op = as_operator(spec, grid)
    if not op.spec.linear:
        raise ValueError("linearity holds for linear specs only")
    a = simulate_boundary(op, grid, x0, u, T, dt)
    b = simulate_boundary(op, grid, x1, v, T, dt)
    c = simulate_boundary(op, grid, x0 * alpha + x1 * beta, ScaledSumSignal(((alpha, u), (beta, v))), T, dt)
    return float(np.max(np.abs(c.states - (alpha * a.states + beta * b.states))))


@dataclass(frozen=True)
class AxiomReport:
    identity: float
    causality: float
    cocycle: float
    runs: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.identity == 0.0 and self.causality == 0.0 and self.cocycle <= self.tol

    def to_dict(self) -> dict:
        return {"identity": self.identity, "causality": self.causality, "cocycle": self.cocycle,
                "runs": self.runs, "tol": self.tol, "passed": self.passed}


def axiom_suite(spec: NonlinearitySpec, grid: Grid, runs: int = 20, seed: int = 0, *, T: float = 0.4,
                dt: float = 0.01, data_range: tuple[float, float] = (0.0, 1.0)) -> AxiomReport:
    """Worst identity, causality and cocycle gaps over ``runs`` random runs.

    Identity and causality must hold exactly; the cocycle gap may not exceed
    ten Newton tolerances (scaled by the state magnitude).
    """
    op = as_operator(spec, grid)
    rng = np.random.default_rng(seed)
    lo, hi = data_range
    n = round(T / dt)
    worst = [0.0, 0.0, 0.0]
    scale = 1.0
    for _ in range(runs):
        u = random_signal(rng, lo, hi, T)
        x0 = random_admissible_state(rng, grid, u, lo, hi)
        other = random_signal(rng, lo, hi, T)
        k = int(rng.integers(1, n - 1))
        tr = simulate_boundary(op, grid, x0, u, T, dt)
        scale = max(scale, float(np.max(np.abs(tr.states))))
        worst[0] = max(worst[0], identity_gap(tr, x0))
        worst[1] = max(worst[1], causality_gap(op, grid, x0, u, other, T, dt, k))
        worst[2] = max(worst[2], cocycle_gap(op, grid, x0, u, T, dt, k))
    return AxiomReport(*worst, runs=runs, tol=10 * NEWTON_TOL * scale)


__all__ = ["AxiomReport", "axiom_suite", "causality_gap", "cocycle_gap", "identity_gap", "linearity_gap"]
