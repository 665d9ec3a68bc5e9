"""Order preservation, constant envelopes of inputs and sandwich states."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .grid import Grid, ScalarField, cutoff_blend, leq, lp_norm
from .signals import (
    BoundarySignal,
    ConstantInput,
    PiecewiseConstantSignal,
    ScaledSumSignal,
    SinusoidSignal,
    TabulatedSignal,
)
from .solver import NonlinearitySpec, Trajectory, assemble, simulate_boundary


class SandwichError(RuntimeError):
    """A constructed sandwich broke one of its invariants."""


@dataclass(frozen=True)
class OrderReport:
    """``max_violation`` is the largest ``lower - upper`` seen; <= 0 means ordered."""

    max_violation: float
    stamp: int | None = None
    node: int | None = None
    pair_id: int | None = None

    @property
    def ordered(self) -> bool:
        return self.max_violation <= 0


def compare_runs(lower: Trajectory, upper: Trajectory, pair_id: int | None = None) -> OrderReport:
    if lower.grid != upper.grid or lower.times.shape != upper.times.shape:
        raise ValueError("runs must share grid and time stamps")
    diff = lower.states - upper.states
    k, i = np.unravel_index(np.argmax(diff), diff.shape)
    return OrderReport(float(diff[k, i]), int(k), int(i), pair_id)


def constant_envelope(u: BoundarySignal, eps: float = 0.0) -> tuple[ConstantInput, ConstantInput]:
    """Constants ``u- <= u <= u+`` with ``|u+-| <= ||u|| + eps``."""
    if eps < 0:
        raise ValueError("slack must be >= 0")
    try:
        lo, hi = u.bounds()
    except NotImplementedError:
        raise ValueError(f"signal {type(u).__name__} has no finite bounds") from None
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise ValueError("unbounded signal")
    return ConstantInput(lo - eps), ConstantInput(hi + eps)


@dataclass(frozen=True, eq=False)
class Sandwich:
    lower: ScalarField
    upper: ScalarField
    u_lower: ConstantInput
    u_upper: ConstantInput
    eps: float
    delta: float
    eta_ratio: float
    xi_ratio: float
    p: float = math.inf


def default_eps(u: BoundarySignal) -> float:
    return 1e-3 * (1.0 + u.sup_norm)


def sandwich_states(x: ScalarField, u: BoundarySignal, eps: float | None = None,
                    delta: float | None = None, p: float = math.inf) -> Sandwich:
    """Admissible constant-input pairs ``(x-, u-) <= (x, u) <= (x+, u+)``.

    ``x+`` is ``x + eps`` blended toward ``u+`` within ``delta`` of the
    boundary, then maxed with ``x``; ``x-`` mirrors it.  ``eta_ratio`` and ``xi_ratio``
    are the realized constants of the linear bounds
    ``max|u+-| <= eta (||u|| + eps)`` and
    ``max ||x+-||_p <= xi (||x||_p + ||u|| + eps)``.
    """
    g = x.grid
    eps = default_eps(u) if eps is None else float(eps)
    delta = 2 * max(g.spacing) if delta is None else float(delta)
    if not eps > 0 or not delta > 0:
        raise ValueError("eps and delta must be > 0")
    u0 = u.evaluate(0.0, g)
    if np.max(np.abs(x.boundary_trace - u0)) > 1e-12:
        raise ValueError("x and u are not trace compatible")
    lo, hi = u.bounds()
    trace = x.boundary_trace
    u_lo = ConstantInput(min(lo, float(trace.min())) - eps)
    u_hi = ConstantInput(max(hi, float(trace.max())) + eps)
    x_hi = cutoff_blend(x + eps, u_hi.value, delta).maximum(x)
    x_lo = cutoff_blend(x - eps, u_lo.value, delta).minimum(x)

    problems = []
    if not (leq(x_lo, x) and leq(x, x_hi)):
        problems.append("state order")
    if np.any(x_hi.boundary_trace != u_hi.value) or np.any(x_lo.boundary_trace != u_lo.value):
        problems.append("boundary traces")
    if not (u_lo.value <= lo and hi <= u_hi.value):
        problems.append("input order")
    unorm = u.sup_norm
    eta_ratio = max(abs(u_lo.value), abs(u_hi.value)) / (unorm + eps)
    if eta_ratio > 1 + 1e-15:
        problems.append("input norm bound")
    xi_ratio = max(lp_norm(x_lo, p), lp_norm(x_hi, p)) / (lp_norm(x, p) + unorm + eps)
    if problems:
        raise SandwichError("sandwich invariants violated: " + ", ".join(problems))
    return Sandwich(x_lo, x_hi, u_lo, u_hi, eps, delta, eta_ratio, xi_ratio, p)


def squared_sine_bump(grid: Grid, modes: Sequence[int]) -> np.ndarray:
    """``prod_i sin^2(m_i pi z_i / L_i)``: in [0, 1], exactly zero on the boundary."""
    s = np.ones(grid.size)
    for d, m in enumerate(modes):
        s *= np.sin(m * np.pi * grid.coords[:, d] / grid.lengths[d]) ** 2
    s[grid.boundary_mask] = 0.0
    return s


def random_signal(rng: np.random.Generator, lo: float, hi: float, T: float) -> BoundarySignal:
    """A bounded uniform-in-space signal with values in ``[lo, hi]``."""
    kind = rng.integers(0, 4)
    if kind == 0:
        return ConstantInput(float(rng.uniform(lo, hi)))
    if kind == 1:
        amp = float(rng.uniform(0, (hi - lo) / 2))
        offset = float(rng.uniform(lo + amp, hi - amp))
        return SinusoidSignal(amp, float(rng.uniform(0.5, 4.0) * 2 * np.pi / max(T, 1e-9)),
                              float(rng.uniform(0, 2 * np.pi)), offset)
    if kind == 2:
        nb = int(rng.integers(1, 4))
        breaks = tuple(np.sort(rng.uniform(0.05 * T, 0.95 * T, nb)).tolist())
        if len(set(breaks)) < nb:
            return ConstantInput(float(rng.uniform(lo, hi)))
        return PiecewiseConstantSignal(breaks, tuple(rng.uniform(lo, hi, nb + 1).tolist()))
    m = int(rng.integers(3, 8))
    times = np.linspace(0.0, T, m)
    return TabulatedSignal(times, rng.uniform(lo, hi, m))


def random_admissible_state(rng: np.random.Generator, grid: Grid, u: BoundarySignal,
                            lo: float, hi: float) -> ScalarField:
    """``u(0) + c * bump`` with values in ``[lo, hi]`` (``u(0)`` must lie there)."""
    u0 = float(u.evaluate(0.0, grid)[0])
    modes = rng.integers(1, 4, grid.ndim)
    c = rng.uniform(lo - u0, hi - u0)
    vals = u0 + c * squared_sine_bump(grid, modes)
    vals[grid.boundary_mask] = u.evaluate(0.0, grid)
    return ScalarField(grid, vals)


def random_ordered_pair(rng: np.random.Generator, grid: Grid, lo: float, hi: float, T: float):
    """``((x0, u), (y0, v))`` with ``x0 <= y0``, ``u <= v``, both trace compatible."""
    mid = 0.5 * (lo + hi)
    u = random_signal(rng, lo, mid, T)
    x0 = random_admissible_state(rng, grid, u, lo, mid)
    gap = hi - mid
    kind = rng.integers(0, 2)
    if kind == 0:
        d: BoundarySignal = ConstantInput(float(rng.uniform(0, gap)))
    else:
        amp = float(rng.uniform(0, gap / 2))
        d = SinusoidSignal(amp, float(rng.uniform(1, 8) / max(T, 1e-9)), float(rng.uniform(0, 2 * np.pi)),
                           float(rng.uniform(amp, gap - amp)))
    v = ScaledSumSignal(((1.0, u), (1.0, d)))
    d0 = d.scalar(0.0)
    bump = squared_sine_bump(grid, rng.integers(1, 4, grid.ndim))
    c2 = rng.uniform(0, max(gap - d0, 0.0))
    y0 = x0.values + d0 + c2 * bump
    y0[grid.boundary_mask] = v.evaluate(0.0, grid)
    return (x0, u), (ScalarField(grid, y0), v)


@dataclass(frozen=True)
class BatteryReport:
    reports: tuple[OrderReport, ...]
    spec: str
    seed: int

    @property
    def max_violation(self) -> float:
        return max(r.max_violation for r in self.reports)

    @property
    def worst(self) -> OrderReport:
        return max(self.reports, key=lambda r: r.max_violation)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pair_id", "max_violation", "stamp", "node"])
        for r in self.reports:
            w.writerow([r.pair_id, repr(r.max_violation), r.stamp, r.node])
        return buf.getvalue()

    def summary(self) -> dict:
        worst = self.worst
        return {
            "spec": self.spec,
            "seed": self.seed,
            "pairs": len(self.reports),
            "max_violation": worst.max_violation,
            "worst_pair": worst.pair_id,
            "worst_stamp": worst.stamp,
            "worst_node": worst.node,
        }


def monotone_system_test(spec: NonlinearitySpec, grid: Grid, battery_size: int, seed: int, *,
                         T: float = 0.5, dt: float = 0.01, data_range: tuple[float, float] = (0.0, 1.0),
                         pairs: Sequence | None = None) -> BatteryReport:
    """Simulate random ordered pairs and record the worst order violation.

    ``pairs`` overrides the random battery with explicit
    ``((x0, u), (y0, v))`` tuples.
    """
    op = assemble(spec, grid)
    if pairs is None:
        rng = np.random.default_rng(seed)
        pairs = [random_ordered_pair(rng, grid, *data_range, T) for _ in range(battery_size)]
    reports = []
    for pid, ((x0, u), (y0, v)) in enumerate(pairs):
        try:
            lower = simulate_boundary(op, grid, x0, u, T, dt)
            upper = simulate_boundary(op, grid, y0, v, T, dt)
        except Exception as e:
            raise RuntimeError(f"battery pair {pid}: {type(e).__name__}: {e}") from e
        reports.append(compare_runs(lower, upper, pid))
    return BatteryReport(tuple(reports), spec.name, seed)


# --- ODE counterpart ---------------------------------------------------------


class NonCooperativeError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CooperativeODE:
    """``x' = rhs(x, u)`` with ``x`` in R^dim (dim 1 or 2) and scalar input ``u``."""

    rhs: Callable[[np.ndarray, float], np.ndarray]
    dim: int = 1
    jac_x: Callable | None = None
    jac_u: Callable | None = None
    name: str = "ode"

    def jacobians(self, x, u, h=1e-7):
        if self.jac_x is not None:
            Jx = np.atleast_2d(self.jac_x(x, u))
        else:
            Jx = np.empty((self.dim, self.dim))
            for j in range(self.dim):
                e = np.zeros(self.dim)
                e[j] = h
                Jx[:, j] = (self.rhs(x + e, u) - self.rhs(x - e, u)) / (2 * h)
        if self.jac_u is not None:
            Ju = np.atleast_1d(self.jac_u(x, u))
        else:
            Ju = (np.asarray(self.rhs(x, u + h)) - np.asarray(self.rhs(x, u - h))) / (2 * h)
        return Jx, Ju


def check_cooperative(ode: CooperativeODE, box: float = 5.0, samples: int = 200, seed: int = 0) -> None:
    if ode.dim not in (1, 2):
        raise NonCooperativeError("only scalar or 2-state systems are supported")
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        x = rng.uniform(-box, box, ode.dim)
        u = rng.uniform(-box, box)
        Jx, Ju = ode.jacobians(x, u)
        off = Jx - np.diag(np.diag(Jx))
        if np.any(off < -1e-9) or np.any(Ju < -1e-9):
            raise NonCooperativeError(f"{ode.name} is not cooperative near x={x.tolist()}, u={u:g}")


def integrate_ode(ode: CooperativeODE, x0, u: BoundarySignal, T: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Backward Euler with Newton; order preserving for cooperative systems."""
    n = int(round(T / dt)) if abs(T / dt - round(T / dt)) < 1e-9 else math.ceil(T / dt)
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    xs = [x.copy()]
    I = np.eye(ode.dim)
    for k in range(1, n + 1):
        uk = u.scalar(k * dt)
        x_old = x.copy()
        for _ in range(50):
            r = x - x_old - dt * np.asarray(ode.rhs(x, uk))
            if np.max(np.abs(r)) <= 1e-13:
                break
            Jx, _ = ode.jacobians(x, uk)
            x = x - np.linalg.solve(I - dt * Jx, r)
        xs.append(x.copy())
    return np.arange(n + 1) * dt, np.array(xs)


@dataclass
class ODEReductionReport:
    sandwiched: list[bool]
    max_violation: float
    gain: object
    majorized: list[bool]
    runs: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(self.sandwiched) and all(self.majorized)


def ode_reduction_demo(ode: CooperativeODE, signals: Sequence[BoundarySignal], x0=0.0, *,
                       T: float = 20.0, dt: float = 0.01, eps: float = 1e-3,
                       constants: Sequence[float] | None = None) -> ODEReductionReport:
    """Check that constant envelopes sandwich time-varying responses and that the
    gain fitted from constant inputs majorizes every time-varying run."""
    from .comparison import fit_gain

    check_cooperative(ode)
    envs = [constant_envelope(u, eps) for u in signals]
    ks = set(constants or [])
    for lo, hi in envs:
        ks.update([lo.value, hi.value])
    tail = slice(None)
    samples = []
    const_runs = {}
    for k in sorted(ks):
        t, xs = integrate_ode(ode, x0, ConstantInput(k), T, dt)
        const_runs[k] = xs
        tail = slice(len(t) // 2, None)
        samples.append((abs(k), float(np.max(np.abs(xs[tail])))))
    gain = fit_gain(samples)

    sandwiched, majorized, runs = [], [], []
    worst = -math.inf
    for u, (lo, hi) in zip(signals, envs):
        t, xs = integrate_ode(ode, x0, u, T, dt)
        lower, upper = const_runs[lo.value], const_runs[hi.value]
        viol = float(max(np.max(lower - xs), np.max(xs - upper)))
        worst = max(worst, viol)
        sandwiched.append(viol <= 1e-12)
        asym = float(np.max(np.abs(xs[tail])))
        bound = float(gain(max(abs(lo.value), abs(hi.value))))
        majorized.append(asym <= bound + 1e-12)
        runs.append({"input": u.descriptor(), "violation": viol, "asymptotic_norm": asym, "gain_bound": bound})
    return ODEReductionReport(sandwiched, worst, gain, majorized, runs)
