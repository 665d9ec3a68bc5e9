"""Closed forms for x_t = Laplace(x) + a x with Dirichlet data, and the
linear-case experiment tying spectral stability, zero-input decay and the
existence of a linear gain together.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .comparison import fit_exp_kl
from .grid import Grid, ScalarField, lp_norm, make_grid
from .iss import constant_input_gain_sweep
from .signals import ConstantInput
from .solver import assemble, heat_spec, simulate_boundary

EXCLUSION_BAND = 0.2


class NoSteadyStateError(ValueError):
    pass


def _lengths(domain) -> tuple[float, ...]:
    if isinstance(domain, Grid):
        return domain.lengths
    if np.isscalar(domain):
        return (float(domain),)
    lengths = tuple(float(x) for x in domain)
    if len(lengths) not in (1, 2) or any(L <= 0 for L in lengths):
        raise ValueError(f"unsupported domain {domain!r}: need an interval or a rectangle")
    return lengths


def dirichlet_eigenvalues(domain, count: int) -> list[float]:
    """Smallest ``count`` eigenvalues of ``-Laplace`` with zero Dirichlet data."""
    if count < 1:
        raise ValueError("count must be >= 1")
    L = _lengths(domain)
    if len(L) == 1:
        return [(k * math.pi / L[0]) ** 2 for k in range(1, count + 1)]
    vals = sorted((k1 * math.pi / L[0]) ** 2 + (k2 * math.pi / L[1]) ** 2
                  for k1 in range(1, count + 1) for k2 in range(1, count + 1))
    return vals[:count]


@dataclass(frozen=True)
class SpectralReport:
    a: float
    eigenvalues: tuple[float, ...]
    margin: float

    @property
    def stable(self) -> bool:
        return self.margin < 0


def spectral_margin(a: float, domain, count: int = 5) -> SpectralReport:
    lam = dirichlet_eigenvalues(domain, count)
    return SpectralReport(float(a), tuple(lam), float(a) - lam[0])


def analytic_heat_solution(coeffs: Sequence[float], a: float, t: float, grid: Grid) -> ScalarField:
    """``sum_k c_k exp((a - (k pi / L)^2) t) sin(k pi z / L)`` on an interval."""
    if grid.ndim != 1:
        raise ValueError("analytic series solution is implemented for intervals only")
    L = grid.lengths[0]
    z = grid.coords[:, 0]
    out = np.zeros(grid.size)
    for k, c in enumerate(coeffs, start=1):
        out += c * math.exp((a - (k * math.pi / L) ** 2) * t) * np.sin(k * math.pi * z / L)
    out[grid.boundary_mask] = 0.0
    return ScalarField(grid, out)


def steady_state_constant_boundary(a: float, c: float, grid: Grid) -> ScalarField:
    """Solution of ``Laplace(w) + a w = 0``, ``w = c`` on the boundary, ``a < lambda_1``.

    Closed form on an interval; on a rectangle the discrete problem is
    solved directly (banded LU).
    """
    lam1 = dirichlet_eigenvalues(grid.lengths, 1)[0]
    if a >= lam1:
        raise NoSteadyStateError(f"a={a:g} >= lambda_1={lam1:g}: no stable steady state")
    if grid.ndim == 2:
        return _discrete_steady_state(a, c, grid)
    L = grid.lengths[0]
    s = grid.coords[:, 0] - L / 2
    if a == 0:
        w = np.full(grid.size, float(c))
    elif a > 0:
        r = math.sqrt(a)
        w = c * np.cos(r * s) / math.cos(r * L / 2)
    else:
        r = math.sqrt(-a)
        w = c * np.cosh(r * s) / math.cosh(r * L / 2)
    w[grid.boundary_mask] = c
    return ScalarField(grid, w)


def _discrete_steady_state(a: float, c: float, grid: Grid) -> ScalarField:
    op = assemble(heat_spec(0.0), grid)
    A = op.laplacian_rows()
    x = np.zeros(grid.size)
    x[grid.boundary_indices] = c
    rhs = -(A[:, grid.boundary_indices] @ x[grid.boundary_indices])
    Aii = A[:, op.idx] + a * np.eye(op.n)
    b = op.bandwidth
    ab = np.zeros((2 * b + 1, op.n))
    for j in range(op.n):
        lo, hi = max(0, j - b), min(op.n, j + b + 1)
        ab[b + lo - j: b + hi - j, j] = Aii[lo:hi, j]
    x[op.idx] = scipy.linalg.solve_banded((b, b), ab, rhs)
    return ScalarField(grid, x)


def steady_state_residual(a: float, w: ScalarField) -> float:
    """Interior ``||Laplace_h w + a w||_inf`` of a (closed-form) steady state."""
    op = assemble(heat_spec(0.0), w.grid)
    return float(np.max(np.abs(op.laplacian_rows() @ w.values + a * w.interior)))


@dataclass(frozen=True)
class LiftedInput:
    """Constant extension ``nu = c`` of a constant boundary value; ``forcing = Laplace(nu) - nu_t = 0``."""

    nu: ScalarField
    forcing: ScalarField

    def to_state(self, y: ScalarField, a: float, t: float) -> ScalarField:
        """``x = exp(a t) (y + nu)``."""
        return (y + self.nu) * math.exp(a * t)


def lift_constant(c: float, grid: Grid) -> LiftedInput:
    return LiftedInput(ScalarField.constant(grid, c), ScalarField.constant(grid, 0.0))


# --- linear-case experiment ----------------------------------------------------


@dataclass
class LinearCaseRow:
    a: float
    margin: float
    spectral_stable: bool
    decay_rate: float
    expected_rate: float
    decay_stable: bool
    gain_slope: float | None
    gain_residual: float | None
    closed_form_ratio: float | None
    gain_exists: bool
    decay_curve: tuple[np.ndarray, np.ndarray] = field(repr=False, default=None)
    gain_samples: list = field(repr=False, default_factory=list)

    @property
    def agree(self) -> bool:
        return self.spectral_stable == self.decay_stable == self.gain_exists

    @property
    def rate_error(self) -> float | None:
        if not self.spectral_stable:
            return None
        return abs(self.decay_rate - self.expected_rate) / abs(self.expected_rate)

    @property
    def slope_error(self) -> float | None:
        if self.gain_slope is None or self.closed_form_ratio is None:
            return None
        return abs(self.gain_slope - self.closed_form_ratio) / self.closed_form_ratio


@dataclass
class LinearCaseReport:
    rows: list[LinearCaseRow]
    grid: Grid
    dt: float

    @property
    def agree(self) -> bool:
        return all(r.agree for r in self.rows)

    def counterexamples(self) -> list[dict]:
        return [vars(r) | {"decay_curve": None} for r in self.rows if not r.agree]

    def spectrum_csv(self, count: int = 5) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        lam = dirichlet_eigenvalues(self.grid.lengths, count)
        w.writerow(["a", "margin", "stable", *(f"lambda_{k}" for k in range(1, count + 1))])
        for r in self.rows:
            w.writerow([repr(r.a), repr(r.margin), int(r.spectral_stable), *map(repr, lam)])
        return buf.getvalue()

    def decay_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["a", "t", "norm"])
        for r in self.rows:
            for t, n in zip(*r.decay_curve):
                w.writerow([repr(r.a), repr(float(t)), repr(float(n))])
        return buf.getvalue()

    def gains_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["a", "abs_k", "response_norm", "settled"])
        for r in self.rows:
            for (k, y), s in r.gain_samples:
                w.writerow([repr(r.a), repr(k), repr(y), int(s)])
        return buf.getvalue()

    def table(self) -> list[dict]:
        return [
            {
                "a": r.a, "margin": r.margin, "spectral_stable": r.spectral_stable,
                "decay_rate": r.decay_rate, "expected_rate": r.expected_rate, "rate_error": r.rate_error,
                "decay_stable": r.decay_stable, "gain_slope": r.gain_slope, "gain_residual": r.gain_residual,
                "closed_form_ratio": r.closed_form_ratio, "slope_error": r.slope_error,
                "gain_exists": r.gain_exists, "agree": r.agree,
            }
            for r in self.rows
        ]


def _closed_form_ratio(a: float, L: float) -> float:
    """``||w||_inf / c`` of the interval steady state."""
    if a > 0:
        return 1.0 / math.cos(math.sqrt(a) * L / 2)
    return 1.0


def corollary1_experiment(a_values: Sequence[float], domain=1.0, grid: Grid | None = None, dt: float = 0.01,
                          constants: Sequence[float] = (0.5, 1.0, 2.0), p: float = math.inf,
                          linear_tol: float = 0.05) -> LinearCaseReport:
    """For each ``a``: spectral verdict, zero-input decay verdict, linear-gain verdict."""
    grid = grid or make_grid(domain, 51)
    if grid.ndim != 1:
        raise ValueError("the linear-case experiment runs on intervals")
    L = grid.lengths[0]
    lam1 = dirichlet_eigenvalues(grid.lengths, 1)[0]
    for a in a_values:
        if abs(a - lam1) < EXCLUSION_BAND:
            raise ValueError(f"a={a:g} lies within {EXCLUSION_BAND} of lambda_1={lam1:g}")
    rows = []
    z = grid.coords[:, 0]
    for a in a_values:
        spec = spectral_margin(a, grid.lengths)
        margin = spec.margin
        op = assemble(heat_spec(a), grid)
        T_decay = min(max(10.0 / abs(margin), 1.0), 50.0)
        # backward Euler shifts the decay rate by ~ rate^2 dt / 2; keep that near 1%
        dt_decay = min(dt, 0.02 / abs(margin))
        x0 = ScalarField(grid, np.where(grid.boundary_mask, 0.0, np.sin(math.pi * z / L)))
        tr = simulate_boundary(op, grid, x0, ConstantInput(0.0), T_decay, dt_decay)
        norms = tr.norms(p)
        kl = fit_exp_kl([(tr.times, norms)])
        decay_stable = kl.raw_rate > 0 and norms[-1] < norms[0]

        if margin < 0:
            T_sweep = min(40.0 / abs(margin), 200.0)
        else:
            T_sweep = min(max(10.0 / abs(margin), 1.0), 50.0)
        sweep = constant_input_gain_sweep(op, grid, constants, T_sweep, dt, p)
        gain = sweep.gain
        gain_exists = sweep.all_settled and gain.linear_residual is not None and gain.linear_residual < linear_tol
        rows.append(LinearCaseRow(
            a=float(a), margin=margin, spectral_stable=spec.stable,
            decay_rate=kl.raw_rate, expected_rate=-margin, decay_stable=bool(decay_stable),
            gain_slope=gain.slope if gain_exists else None,
            gain_residual=gain.linear_residual,
            closed_form_ratio=_closed_form_ratio(a, L) if spec.stable else None,
            gain_exists=bool(gain_exists),
            decay_curve=(tr.times, norms),
            gain_samples=list(zip(sweep.samples, sweep.settled)),
        ))
    return LinearCaseReport(rows, grid, dt)
