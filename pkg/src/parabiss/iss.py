"""Checking ISS / exp-ISS / 0-UGAS estimates on simulated trajectories, and the
two reductions: constant inputs suffice, and boundary inputs may be traded
for a constant distributed input with zero boundary data.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .comparison import GainFit, KLFit, fit_exp_kl, fit_gain
from .grid import Grid, ScalarField, cutoff_blend, lp_norm
from .monotone import compare_runs, sandwich_states, squared_sine_bump
from .signals import BoundarySignal, ConstantInput
from .solver import (
    DiscreteOperator,
    NonlinearitySpec,
    Trajectory,
    as_operator,
    simulate_boundary,
    simulate_distributed,
)

NOTIONS = ("ISS", "exp-ISS", "0-UGAS")
ORDER_TOL = 1e-10
STEADY_TOL = 1e-9


@dataclass
class ISSReport:
    """Outcome of checking an estimate on a set of runs.

    ``margins[i]`` is ``min_t (bound(t) - ||phi(t)||)`` for run ``i``.
    """

    notion: str
    beta: dict
    gamma: dict | None
    margins: list[float]
    tolerance: float
    violations: list[dict] = field(default_factory=list)
    manifest: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return all(m >= -self.tolerance for m in self.margins)

    def to_dict(self) -> dict:
        return {
            "notion": self.notion,
            "holds": self.holds,
            "beta": self.beta,
            "gamma": self.gamma,
            "margins": self.margins,
            "tolerance": self.tolerance,
            "violations": self.violations,
            "manifest": self.manifest,
        }


def verify_estimate(trajectories: Sequence[Trajectory], beta: KLFit, gamma: GainFit | None,
                    notion: str = "exp-ISS", p: float = math.inf, rel_tol: float = 1e-8) -> ISSReport:
    """Compare ``||phi(t)||_p`` with ``beta(||x0||_p, t) + gamma(||u||)`` at every stamp."""
    if notion not in NOTIONS:
        raise ValueError(f"notion must be one of {NOTIONS}")
    if notion != "0-UGAS" and gamma is None:
        raise ValueError(f"{notion} needs a gain")
    norms, bounds = [], []
    for tr in trajectories:
        if notion == "0-UGAS" and tr.input_norm != 0:
            raise ValueError("0-UGAS is checked with zero input only")
        n = tr.norms(p)
        b = beta(n[0], tr.times)
        if notion != "0-UGAS":
            b = b + gamma(tr.input_norm)
        norms.append(n)
        bounds.append(np.asarray(b))
    scale = max([1.0] + [float(n.max()) for n in norms])
    tol = rel_tol * scale
    margins, violations = [], []
    for i, (n, b) in enumerate(zip(norms, bounds)):
        gap = b - n
        k = int(np.argmin(gap))
        margins.append(float(gap[k]))
        if gap[k] < -tol:
            violations.append({"run": i, "stamp": k, "t": float(trajectories[i].times[k]), "margin": float(gap[k])})
    return ISSReport(notion, beta.to_dict(), None if gamma is None else gamma.to_dict(), margins, tol,
                     violations, {"runs": len(trajectories), "p": p})


def asymptotic_norm(tr: Trajectory, p: float = math.inf) -> float:
    """Max of the norms over the last half of the recorded stamps."""
    n = tr.norms(p)
    return float(n[n.size // 2:].max())


@dataclass
class GainSweep:
    constants: list[float]
    samples: list[tuple[float, float]]
    steady: list[ScalarField]
    settled: list[bool]
    gain: GainFit
    times: list[float]

    @property
    def all_settled(self) -> bool:
        return all(self.settled)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "abs_k", "response_norm", "settled", "t_end"])
        for k, (r, y), s, t in zip(self.constants, self.samples, self.settled, self.times):
            w.writerow([repr(k), repr(r), repr(y), int(s), repr(t)])
        return buf.getvalue()


def equilibrium_start(grid: Grid, k: float, delta: float | None = None) -> ScalarField:
    """Zero in the interior, blended to ``k`` at the boundary."""
    delta = 2 * max(grid.spacing) if delta is None else delta
    return cutoff_blend(ScalarField.constant(grid, 0.0), k, delta)


def constant_input_gain_sweep(spec: NonlinearitySpec | DiscreteOperator, grid: Grid, constants: Sequence[float],
                              T: float = 50.0, dt: float = 0.01, p: float = math.inf, *,
                              delta: float | None = None, steady_tol: float = STEADY_TOL) -> GainSweep:
    """Run each constant boundary input to (near) steady state and fit the gain.

    Runs that have not settled by ``T`` are flagged in ``settled``; their
    samples are still recorded.
    """
    op = as_operator(spec, grid)
    samples, steady, settled, times = [], [], [], []
    for k in constants:
        x0 = equilibrium_start(grid, k, delta)
        tr = simulate_boundary(op, grid, x0, ConstantInput(k), T, dt, steady_tol=steady_tol)
        samples.append((abs(k), asymptotic_norm(tr, p)))
        steady.append(tr.final)
        settled.append(bool(tr.metadata["settled"]))
        times.append(float(tr.times[-1]))
    return GainSweep(list(map(float, constants)), samples, steady, settled, fit_gain(samples), times)


def zero_input_decay(op: DiscreteOperator, grid: Grid, initial: Sequence[ScalarField], T: float, dt: float,
                     p: float = math.inf) -> tuple[KLFit, list[Trajectory]]:
    runs = [simulate_boundary(op, grid, x0, ConstantInput(0.0), T, dt) for x0 in initial]
    return fit_exp_kl([(tr.times, tr.norms(p)) for tr in runs]), runs


@dataclass
class ReductionReport:
    """Constant-input reduction: sandwich bound, constant estimate, composite bound."""

    sandwich_margins: list[float]
    order_violations: list[float]
    composite_margins: list[float]
    constant_estimate: ISSReport
    kl: KLFit
    kl_decay: KLFit
    gain: GainFit
    tolerance: float
    violations: list[dict]
    sweep: GainSweep

    @property
    def holds(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "holds": self.holds,
            "tolerance": self.tolerance,
            "sandwich_margins": self.sandwich_margins,
            "order_violations": self.order_violations,
            "composite_margins": self.composite_margins,
            "kl": self.kl.to_dict(),
            "kl_from_decay": self.kl_decay.to_dict(),
            "gain": self.gain.to_dict(),
            "constant_estimate": self.constant_estimate.to_dict(),
            "violations": self.violations,
        }


def reduction_experiment(spec: NonlinearitySpec | DiscreteOperator, grid: Grid,
                         battery: Sequence[tuple[ScalarField, BoundarySignal]], *, T: float = 2.0,
                         dt: float = 0.01, p: float = math.inf, eps: float | None = None,
                         delta: float | None = None, sweep_T: float = 50.0,
                         rel_tol: float = 1e-8) -> ReductionReport:
    """Majorize time-varying responses by constant-input ones.

    For each ``(x0, u)`` the sandwich ``(x-, u-) <= (x0, u) <= (x+, u+)`` is
    simulated alongside, and the following are recorded per stamp:

    * order of the three runs (violation must stay <= 1e-10);
    * ``||phi(x, u)||_p <= ||phi(x-, u-)||_p + ||phi(x+, u+)||_p``;
    * the same right-hand side bounded through the constant-input estimate
      ``M exp(-lam t) ||x+-|| + gamma(|u+-|)``.

    ``lam`` comes from zero-input decay; ``M`` is the least scale (at that
    ``lam``) making the estimate hold on the constant-input runs, and never
    below the decay fit's ``M``.  ``gamma`` comes from a constant-input sweep
    that includes every sandwich constant.
    """
    op = as_operator(spec, grid)
    sandwiches = [sandwich_states(x0, u, eps, delta, p) for x0, u in battery]
    ks = sorted({s.u_lower.value for s in sandwiches} | {s.u_upper.value for s in sandwiches})
    sweep = constant_input_gain_sweep(op, grid, ks, sweep_T, dt, p, delta=delta)
    gamma = sweep.gain

    delta_ = 2 * max(grid.spacing) if delta is None else delta
    decay_init = [cutoff_blend(x0, 0.0, delta_) for x0, _ in battery]
    decay_init.append(ScalarField(grid, squared_sine_bump(grid, [1] * grid.ndim) * max(1.0, max(abs(k) for k in ks))))
    decay_init = [x for x in decay_init if lp_norm(x, p) > 0]
    kl_decay, _ = zero_input_decay(op, grid, decay_init, T, dt, p)
    lam = kl_decay.lam

    runs = []
    for (x0, u), s in zip(battery, sandwiches):
        mid = simulate_boundary(op, grid, x0, u, T, dt)
        lo = simulate_boundary(op, grid, s.lower, s.u_lower, T, dt)
        hi = simulate_boundary(op, grid, s.upper, s.u_upper, T, dt)
        runs.append((mid, lo, hi))

    M = kl_decay.M
    for _, lo, hi in runs:
        for tr in (lo, hi):
            n = tr.norms(p)
            excess = np.maximum(n - gamma(tr.input_norm), 0.0) * np.exp(lam * tr.times)
            if n[0] > 0:
                M = max(M, float(excess.max() / n[0]))
    M *= 1.0 + 8 * np.finfo(float).eps
    kl = KLFit(M, lam, kl_decay.raw_rate)
    const_runs = [tr for _, lo, hi in runs for tr in (lo, hi)]
    const_report = verify_estimate(const_runs, kl, gamma, "exp-ISS", p, rel_tol)

    scale = max([1.0] + [float(tr.norms(p).max()) for run in runs for tr in run])
    tol = rel_tol * scale
    sandwich_margins, order_violations, composite_margins, violations = [], [], [], []
    for i, (mid, lo, hi) in enumerate(runs):
        ov = max(compare_runs(lo, mid).max_violation, compare_runs(mid, hi).max_violation)
        order_violations.append(ov)
        if ov > ORDER_TOL:
            violations.append({"run": i, "kind": "order", "value": ov,
                               "note": "order violation with dt*k < 1 enforced: discretization bug"})
        n_mid, n_lo, n_hi = mid.norms(p), lo.norms(p), hi.norms(p)
        gap = n_lo + n_hi - n_mid
        sandwich_margins.append(float(gap.min()))
        if gap.min() < -tol:
            violations.append({"run": i, "kind": "sandwich-bound", "value": float(gap.min())})
        bound = (kl(n_lo[0], mid.times) + gamma(lo.input_norm)
                 + kl(n_hi[0], mid.times) + gamma(hi.input_norm))
        cgap = bound - n_mid
        composite_margins.append(float(cgap.min()))
        if cgap.min() < -10 * tol:
            violations.append({"run": i, "kind": "composite-bound", "value": float(cgap.min())})
    if not const_report.holds:
        violations.append({"kind": "constant-estimate", "value": min(const_report.margins)})
    return ReductionReport(sandwich_margins, order_violations, composite_margins, const_report, kl, kl_decay,
                           gamma, tol, violations, sweep)


@dataclass
class EquivalenceRow:
    k: float
    gamma_boundary: float
    gamma_distributed: float
    shifted_norm: float
    identity_gap: float
    t_end: float
    settled: bool


@dataclass
class EquivalenceReport:
    rows: list[EquivalenceRow]
    gain_boundary: GainFit
    gain_distributed: GainFit
    tolerance: float
    flags: list[str]

    @property
    def consistent(self) -> bool:
        return not self.flags

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "gamma_boundary", "gamma_distributed", "norm_y_plus_k", "identity_gap", "t_end", "settled"])
        for r in self.rows:
            w.writerow([repr(r.k), repr(r.gamma_boundary), repr(r.gamma_distributed), repr(r.shifted_norm),
                        repr(r.identity_gap), repr(r.t_end), int(r.settled)])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "consistent": self.consistent,
            "tolerance": self.tolerance,
            "rows": [vars(r) for r in self.rows],
            "gain_boundary": self.gain_boundary.to_dict(),
            "gain_distributed": self.gain_distributed.to_dict(),
            "flags": self.flags,
        }


def equivalence_experiment(spec: NonlinearitySpec | DiscreteOperator, grid: Grid, constants: Sequence[float],
                           p: float = math.inf, *, T: float = 50.0, dt: float = 0.01,
                           delta: float | None = None, tol: float = 1e-8) -> EquivalenceReport:
    """Constant-input sweeps through the boundary and the distributed channel.

    The distributed run is integrated for exactly as many steps as the
    boundary run needed to settle, so the two are compared stamp for stamp.
    """
    op = as_operator(spec, grid)
    rows, flags = [], []
    for k in constants:
        x0 = equilibrium_start(grid, k, delta)
        bnd = simulate_boundary(op, grid, x0, ConstantInput(k), T, dt, steady_tol=STEADY_TOL)
        t_end = float(bnd.times[-1])
        dist = simulate_distributed(op, grid, x0 - k, ConstantInput(k), t_end, dt)
        x_inf = bnd.final
        y_inf = dist.final
        gap = float(np.max(np.abs((y_inf.values + k) - x_inf.values)))
        gb = lp_norm(x_inf, p)
        gd = lp_norm(y_inf, p)
        shifted = lp_norm(y_inf + k, p)
        rows.append(EquivalenceRow(float(k), gb, gd, shifted, gap, t_end, bool(bnd.metadata["settled"])))
        if gap > tol:
            flags.append(f"k={k:g}: identity gap {gap:.3e} > {tol:g} (discretization inconsistency)")
        if abs(gb - shifted) > tol * max(1.0, gb):
            flags.append(f"k={k:g}: boundary gain {gb:g} != ||y + k|| = {shifted:g}")
        if not bnd.metadata["settled"]:
            flags.append(f"k={k:g}: not settled by T={T:g} (candidate instability)")
    gain_b = fit_gain([(abs(r.k), r.gamma_boundary) for r in rows])
    gain_d = fit_gain([(abs(r.k), r.gamma_distributed) for r in rows])
    return EquivalenceReport(rows, gain_b, gain_d, tol, flags)
