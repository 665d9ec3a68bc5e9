"""Monotone backward-Euler finite differences for

    x_t = sum_i a_i(z) x_{z_i z_i} + f(z, x, grad x)

with Dirichlet boundary data (boundary-input mode) or homogeneous Dirichlet
data and a constant shift inside ``f`` (distributed-input mode).

Diffusion uses the 3-point central stencil per axis, the gradient inside
``f`` is upwinded by the sign of ``df/dxi``.  With ``dt * k < 1`` for the
one-sided Lipschitz constant ``k`` of ``f`` the Newton Jacobian is an
M-matrix, so the discrete step map is order preserving.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.linalg

from .grid import Grid, ScalarField, lp_norm
from .signals import BoundarySignal, ConstantInput

NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 50
SCHEME = "backward-euler/central-diffusion/upwind-gradient"


class UnsupportedFeatureError(ValueError):
    pass


class EllipticityError(ValueError):
    def __init__(self, z, xi, value, K):
        self.z, self.xi, self.value, self.K = z, xi, value, K
        super().__init__(
            f"uniform parabolicity fails at z={np.round(z, 12).tolist()}, xi={xi.tolist()}: "
            f"sum a_ij xi_i xi_j = {value:g} < K|xi|^2 = {K:g}"
        )


class LipschitzCertificateError(ValueError):
    pass


class TimeStepError(ValueError):
    """``dt * k(W) >= 1``: the implicit step is no longer order preserving."""


class NewtonConvergenceError(RuntimeError):
    def __init__(self, residual: float, iterations: int, t: float | None = None):
        self.residual = residual
        self.iterations = iterations
        self.t = t
        where = "" if t is None else f" at t={t:g}"
        super().__init__(f"Newton failed{where}: residual {residual:.3e} after {iterations} iterations")


class AdmissibilityError(ValueError):
    """Initial state and input are not trace compatible."""


def _fd_derivative(fn, arg: int, args, h=1e-7):
    lo, hi = list(args), list(args)
    lo[arg] = args[arg] - h
    hi[arg] = args[arg] + h
    return (fn(*hi) - fn(*lo)) / (2 * h)


@dataclass(frozen=True, eq=False)
class NonlinearitySpec:
    """Operator data.

    ``reaction(z, w, xi)`` is vectorized: ``z`` is ``(N, d)``, ``w`` is
    ``(N,)``, ``xi`` is ``(N, d)``.  ``diffusion(z)`` returns ``(N, d, d)``
    matrices (identity when omitted).  ``lipschitz(lo, hi)`` returns a
    constant ``k`` with ``f(z, w1, xi) - f(z, w2, xi) <= k (w1 - w2)`` for
    ``lo <= w2 < w1 <= hi``.
    """

    name: str
    reaction: Callable
    lipschitz: Callable[[float, float], float]
    dfdw: Callable | None = None
    dfdxi: Callable | None = None
    diffusion: Callable | None = None
    K: float = 1.0
    working_range: tuple[float, float] = (-2.0, 2.0)
    differentiable: bool = True
    linear: bool = False
    params: dict = field(default_factory=dict)

    def df_dw(self, z, w, xi):
        if self.dfdw is not None:
            return np.broadcast_to(self.dfdw(z, w, xi), w.shape)
        return _fd_derivative(self.reaction, 1, (z, w, xi))

    def df_dxi(self, z, w, xi):
        if self.dfdxi is not None:
            return np.broadcast_to(self.dfdxi(z, w, xi), xi.shape)
        out = np.empty_like(xi)
        for d in range(xi.shape[1]):
            e = np.zeros_like(xi)
            e[:, d] = 1e-7
            out[:, d] = (self.reaction(z, w, xi + e) - self.reaction(z, w, xi - e)) / 2e-7
        return out

    def describe(self) -> dict:
        return {"name": self.name, "params": self.params, "K": self.K}


def heat_spec(a: float = 0.0) -> NonlinearitySpec:
    """``f = a w``."""
    a = float(a)
    return NonlinearitySpec(
        name="heat",
        reaction=lambda z, w, xi: a * w,
        dfdw=lambda z, w, xi: np.full_like(w, a),
        dfdxi=lambda z, w, xi: np.zeros_like(xi),
        lipschitz=lambda lo, hi: max(a, 0.0),
        linear=True,
        params={"a": a},
    )


def fisher_spec(r: float = 1.0) -> NonlinearitySpec:
    """``f = r w (1 - w)``; ``df/dw = r (1 - 2w)`` is largest at the bottom of W."""
    r = float(r)
    return NonlinearitySpec(
        name="fisher",
        reaction=lambda z, w, xi: r * w * (1.0 - w),
        dfdw=lambda z, w, xi: r * (1.0 - 2.0 * w),
        dfdxi=lambda z, w, xi: np.zeros_like(xi),
        lipschitz=lambda lo, hi: max(r * (1.0 - 2.0 * lo), 0.0),
        params={"r": r},
    )


def logistic_advection_spec(b: float = 1.0, r: float = 1.0) -> NonlinearitySpec:
    """``f = r w (1 - w) + b * xi_1`` (drift along the first axis)."""
    b, r = float(b), float(r)

    def dfdxi(z, w, xi):
        out = np.zeros_like(xi)
        out[:, 0] = b
        return out

    return NonlinearitySpec(
        name="logistic-advection",
        reaction=lambda z, w, xi: r * w * (1.0 - w) + b * xi[:, 0],
        dfdw=lambda z, w, xi: r * (1.0 - 2.0 * w),
        dfdxi=dfdxi,
        lipschitz=lambda lo, hi: max(r * (1.0 - 2.0 * lo), 0.0),
        params={"b": b, "r": r},
    )


class DiscreteOperator:
    """Interior residual and banded Jacobian of one implicit step on a grid.

    Unknowns are the interior nodes in C order; neighbours that are
    boundary nodes enter only through the residual.
    """

    def __init__(self, spec: NonlinearitySpec, grid: Grid, coeffs: np.ndarray):
        self.spec = spec
        self.grid = grid
        self.coeffs = coeffs  # (n_interior, d) diagonal diffusion
        g = grid
        self.idx = g.interior_indices
        self.z = g.coords[self.idx]
        strides = np.array([int(np.prod(g.shape[k + 1:])) for k in range(g.ndim)])
        self.plus = [self.idx + s for s in strides]
        self.minus = [self.idx - s for s in strides]
        self.h = np.array(g.spacing)
        full_to_int = np.full(g.size, -1)
        full_to_int[self.idx] = np.arange(self.idx.size)
        self.plus_int = [full_to_int[p] for p in self.plus]
        self.minus_int = [full_to_int[m] for m in self.minus]
        # bandwidth in interior numbering: last axis +-1, first axis +-(n_last - 2)
        self.int_strides = [int(np.prod([n - 2 for n in g.shape[k + 1:]])) for k in range(g.ndim)]
        self.bandwidth = max(self.int_strides)

    @property
    def n(self) -> int:
        return self.idx.size

    def laplacian_rows(self) -> np.ndarray:
        """Dense diffusion operator: interior rows, all-node columns."""
        A = np.zeros((self.n, self.grid.size))
        rows = np.arange(self.n)
        for d in range(self.grid.ndim):
            c = self.coeffs[:, d] / self.h[d] ** 2
            A[rows, self.plus[d]] += c
            A[rows, self.minus[d]] += c
            A[rows, self.idx] -= 2 * c
        return A

    def gradient(self, x: np.ndarray, direction: np.ndarray) -> np.ndarray:
        """One-sided differences: forward where ``direction >= 0``, backward otherwise."""
        xi = np.empty((self.n, self.grid.ndim))
        xc = x[self.idx]
        for d in range(self.grid.ndim):
            fwd = (x[self.plus[d]] - xc) / self.h[d]
            bwd = (xc - x[self.minus[d]]) / self.h[d]
            xi[:, d] = np.where(direction[:, d] >= 0, fwd, bwd)
        return xi

    def upwind_direction(self, x: np.ndarray, shift: float = 0.0) -> np.ndarray:
        """Sign of ``df/dxi`` at the (centrally differenced) state ``x``."""
        xc = x[self.idx]
        xi = np.stack([(x[p] - x[m]) / (2 * h) for p, m, h in zip(self.plus, self.minus, self.h)], axis=1)
        return np.sign(self.spec.df_dxi(self.z, xc + shift, xi))

    def rhs(self, x: np.ndarray, direction: np.ndarray, shift: float = 0.0) -> np.ndarray:
        xc = x[self.idx]
        out = np.zeros(self.n)
        for d in range(self.grid.ndim):
            out += self.coeffs[:, d] * (x[self.plus[d]] - 2 * xc + x[self.minus[d]]) / self.h[d] ** 2
        return out + self.spec.reaction(self.z, xc + shift, self.gradient(x, direction))

    def step_residual(self, x, x_old_int, dt, direction, shift=0.0) -> np.ndarray:
        """``x - x_old - dt * rhs(x)`` on interior nodes (state units)."""
        return x[self.idx] - x_old_int - dt * self.rhs(x, direction, shift)

    def step_jacobian(self, x, dt, direction, shift=0.0) -> np.ndarray:
        """``I - dt * d(rhs)/dx`` in LAPACK banded storage ``(2b+1, n)``."""
        b = self.bandwidth
        ab = np.zeros((2 * b + 1, self.n))
        xc = x[self.idx]
        xi = self.gradient(x, direction)
        fw = self.spec.df_dw(self.z, xc + shift, xi)
        fxi = self.spec.df_dxi(self.z, xc + shift, xi)
        diag = 1.0 - dt * fw
        cols = np.arange(self.n)
        for d in range(self.grid.ndim):
            a = self.coeffs[:, d] / self.h[d] ** 2
            adv = fxi[:, d] / self.h[d]
            fwd = direction[:, d] >= 0
            # d rhs / d x_plus and d x_minus
            c_plus = a + np.where(fwd, adv, 0.0)
            c_minus = a - np.where(fwd, 0.0, adv)
            diag += dt * (2 * a + np.where(fwd, adv, -adv))
            for nbr, c in ((self.plus_int[d], c_plus), (self.minus_int[d], c_minus)):
                inside = nbr >= 0
                # entry (row i, col j) lives at ab[b + i - j, j]
                i = cols[inside]
                j = nbr[inside]
                ab[b + i - j, j] = -dt * c[inside]
        ab[b, :] = diag
        return ab

    def is_m_matrix(self, x, dt, direction, shift=0.0) -> bool:
        """Nonpositive off-diagonals and strict row diagonal dominance."""
        ab = self.step_jacobian(x, dt, direction, shift)
        b = self.bandwidth
        off = np.delete(ab, b, axis=0)
        if np.any(off > 0):
            return False
        J = np.zeros((self.n, self.n))
        for r in range(2 * b + 1):
            for j in range(self.n):
                i = j + r - b
                if 0 <= i < self.n:
                    J[i, j] = ab[r, j]
        d = np.diag(J)
        return bool(np.all(d > np.abs(J).sum(axis=1) - np.abs(d)))


def _diffusion_coeffs(spec: NonlinearitySpec, grid: Grid) -> np.ndarray:
    z = grid.coords
    d = grid.ndim
    if spec.diffusion is None:
        A = np.broadcast_to(np.eye(d), (z.shape[0], d, d))
    else:
        A = np.asarray(spec.diffusion(z), dtype=float)
        if A.ndim == 1:
            A = A[:, None, None] * np.eye(d)
        A = np.broadcast_to(A, (z.shape[0], d, d))
    off = A - A * np.eye(d)
    if np.any(off != 0):
        raise UnsupportedFeatureError("mixed-derivative coefficients a_ij (i != j) are not supported")
    diag = np.einsum("nii->ni", A)
    worst = np.unravel_index(np.argmin(diag), diag.shape)
    if diag[worst] < spec.K:
        xi = np.zeros(d)
        xi[worst[1]] = 1.0
        raise EllipticityError(z[worst[0]], xi, float(diag[worst]), spec.K)
    return np.ascontiguousarray(diag)


def _check_lipschitz(spec: NonlinearitySpec, grid: Grid, n_samples: int = 64) -> None:
    lo, hi = spec.working_range
    k = spec.lipschitz(lo, hi)
    rng = np.random.default_rng(0)
    idx = rng.integers(0, grid.size, n_samples)
    z = grid.coords[idx]
    w = np.sort(rng.uniform(lo, hi, (n_samples, 2)), axis=1)
    xi = rng.normal(size=(n_samples, grid.ndim))
    w2, w1 = w[:, 0], w[:, 1]
    gap = w1 - w2
    ok = gap > 0
    lhs = spec.reaction(z, w1, xi) - spec.reaction(z, w2, xi)
    if np.any(lhs[ok] > k * gap[ok] + 1e-12 * (1 + np.abs(lhs[ok]))):
        bad = int(np.argmax(np.where(ok, lhs - k * gap, -np.inf)))
        raise LipschitzCertificateError(
            f"one-sided Lipschitz certificate k={k:g} on W=[{lo:g}, {hi:g}] fails at "
            f"w1={w1[bad]:g}, w2={w2[bad]:g}"
        )


def assemble(spec: NonlinearitySpec, grid: Grid) -> DiscreteOperator:
    """Check the operator data on the grid and build the discrete operator."""
    coeffs = _diffusion_coeffs(spec, grid)
    _check_lipschitz(spec, grid)
    return DiscreteOperator(spec, grid, coeffs[grid.interior_indices])


def _newton(op: DiscreteOperator, x: np.ndarray, x_old_int: np.ndarray, dt: float,
            direction: np.ndarray, shift: float, tol: float, max_iter: int) -> tuple[np.ndarray, int, float]:
    idx = op.idx
    b = op.bandwidth
    # absolute for O(1) states; relative once roundoff in large states exceeds tol
    tol = tol * max(1.0, float(np.max(np.abs(x))), float(np.max(np.abs(x_old_int), initial=0.0)))
    r = op.step_residual(x, x_old_int, dt, direction, shift)
    rn = float(np.max(np.abs(r))) if r.size else 0.0
    for it in range(max_iter):
        # at least one update: linear steps are then exact to roundoff
        if rn <= tol and it > 0:
            return x, it, rn
        ab = op.step_jacobian(x, dt, direction, shift)
        dx = scipy.linalg.solve_banded((b, b), ab, -r, check_finite=False)
        lam = 1.0
        while True:
            x_try = x.copy()
            x_try[idx] += lam * dx
            r_try = op.step_residual(x_try, x_old_int, dt, direction, shift)
            rn_try = float(np.max(np.abs(r_try)))
            # damped fallback: halve until the residual decreases
            if rn_try < rn or rn_try <= tol or lam < 1e-4:
                break
            lam *= 0.5
        x, r, rn = x_try, r_try, rn_try
    if rn <= tol:
        return x, max_iter, rn
    raise NewtonConvergenceError(rn, max_iter)


def step(op: DiscreteOperator, state: ScalarField, boundary_values, dt: float, *,
         shift: float = 0.0, input_norm: float | None = None,
         working_range: tuple[float, float] | None = None,
         tol: float = NEWTON_TOL, max_iter: int = NEWTON_MAX_ITER) -> ScalarField:
    """One backward-Euler step.

    ``boundary_values`` are the Dirichlet data at the end of the step
    (array over boundary nodes or a scalar).  ``shift`` is the constant
    distributed input ``v`` inside ``f(z, w + v, xi)``.
    """
    if not dt > 0:
        raise ValueError("dt must be > 0")
    g = op.grid
    bvals = np.broadcast_to(np.asarray(boundary_values, dtype=float), (g.boundary_indices.size,))
    if input_norm is None:
        input_norm = float(np.max(np.abs(bvals))) if bvals.size else 0.0
        input_norm = max(input_norm, abs(shift))
    if working_range is None:
        v = state.values + shift
        working_range = (float(v.min()), float(v.max()))
    lo = working_range[0] - input_norm - 1.0
    hi = working_range[1] + input_norm + 1.0
    k = op.spec.lipschitz(lo, hi)
    if dt * k >= 1:
        raise TimeStepError(
            f"dt*k(W) = {dt:g}*{k:g} = {dt * k:g} >= 1 on W=[{lo:g}, {hi:g}]; need dt < {1 / k:g}"
        )
    x = state.values.copy()
    x[g.boundary_indices] = bvals
    direction = op.upwind_direction(state.values, shift)
    x, _, _ = _newton(op, x, state.values[op.idx], dt, direction, shift, tol, max_iter)
    return ScalarField(g, x)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Recorded solution: ``states[k]`` at ``times[k]``."""

    grid: Grid
    times: np.ndarray
    states: np.ndarray = field(repr=False)
    signal: BoundarySignal
    input_norm: float
    metadata: dict

    def __post_init__(self):
        for name in ("times", "states"):
            a = np.asarray(getattr(self, name), dtype=float)
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    def __len__(self):
        return self.times.size

    def field(self, k: int) -> ScalarField:
        return ScalarField(self.grid, self.states[k])

    @property
    def final(self) -> ScalarField:
        return self.field(-1)

    @property
    def initial(self) -> ScalarField:
        return self.field(0)

    def norms(self, p: float = math.inf) -> np.ndarray:
        if math.isinf(p):
            return np.abs(self.states).max(axis=1)
        return np.array([lp_norm(self.field(k), p) for k in range(len(self))])

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", *(f"x{i}" for i in range(self.grid.size))])
        for t, row in zip(self.times, self.states):
            w.writerow([repr(float(t)), *(repr(float(v)) for v in row)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def manifest(self) -> dict:
        return {
            **self.metadata,
            "grid": self.grid.describe(),
            "input": self.signal.descriptor(),
            "input_norm": self.input_norm,
            "stamps": int(self.times.size),
        }

    def write_manifest(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.manifest(), indent=2, sort_keys=True), encoding="utf-8")


def _n_steps(T: float, dt: float) -> int:
    q = T / dt
    n = round(q)
    return int(n if abs(q - n) <= 1e-9 * max(1.0, q) else math.ceil(q))


def _integrate(op, x0: ScalarField, bc: Callable[[float], np.ndarray], T, dt, *, shift, input_norm,
               signal, mode, record_every=1, steady_tol=None, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER,
               spec_name="") -> Trajectory:
    if not (T > 0 and dt > 0):
        raise ValueError("T and dt must be positive")
    n = _n_steps(T, dt)
    times = [0.0]
    states = [x0.values.copy()]
    state = x0
    v = x0.values + shift
    lo, hi = float(v.min()), float(v.max())
    settled = False
    for k in range(1, n + 1):
        t = k * dt
        try:
            new = step(op, state, bc(t), dt, shift=shift, input_norm=input_norm,
                       working_range=(lo, hi), tol=tol, max_iter=max_iter)
        except NewtonConvergenceError as e:
            raise NewtonConvergenceError(e.residual, e.iterations, t) from None
        vv = new.values + shift
        lo, hi = min(lo, float(vv.min())), max(hi, float(vv.max()))
        if steady_tol is not None and np.max(np.abs(new.values - state.values)) / dt < steady_tol:
            settled = True
        state = new
        if k % record_every == 0 or k == n or settled:
            times.append(t)
            states.append(state.values.copy())
        if settled:
            break
    meta = {
        "mode": mode,
        "spec": spec_name,
        "dt": dt,
        "T": T,
        "newton_tol": tol,
        "scheme": SCHEME,
        "shift": shift,
    }
    if steady_tol is not None:
        meta["settled"] = settled
        meta["steady_tol"] = steady_tol
    return Trajectory(op.grid, np.array(times), np.array(states), signal, input_norm, meta)


def as_operator(spec_or_op, grid) -> DiscreteOperator:
    if isinstance(spec_or_op, DiscreteOperator):
        return spec_or_op
    return assemble(spec_or_op, grid)


def simulate_boundary(spec: NonlinearitySpec | DiscreteOperator, grid: Grid, x0: ScalarField,
                      u: BoundarySignal, T: float, dt: float, *, compat_tol: float = 1e-12,
                      record_every: int = 1, steady_tol: float | None = None,
                      tol: float = NEWTON_TOL) -> Trajectory:
    """Solve with Dirichlet data ``x = u(t, .)`` on the boundary."""
    op = as_operator(spec, grid)
    u0 = u.evaluate(0.0, grid)
    gap = float(np.max(np.abs(x0.boundary_trace - u0)))
    if gap > compat_tol:
        raise AdmissibilityError(
            f"initial boundary trace differs from u(0, .) by {gap:g} (> {compat_tol:g}); "
            "the input is not admissible for this state"
        )
    return _integrate(op, x0, lambda t: u.evaluate(t, grid), T, dt, shift=0.0, input_norm=u.sup_norm,
                      signal=u, mode="boundary", record_every=record_every, steady_tol=steady_tol,
                      tol=tol, spec_name=op.spec.name)


def simulate_distributed(spec: NonlinearitySpec | DiscreteOperator, grid: Grid, y0: ScalarField,
                         v: ConstantInput | float, T: float, dt: float, *, record_every: int = 1,
                         steady_tol: float | None = None, tol: float = NEWTON_TOL) -> Trajectory:
    """Solve ``y_t = diffusion(y) + f(z, y + v, grad y)`` with ``y = 0`` on the boundary."""
    op = as_operator(spec, grid)
    if not isinstance(v, ConstantInput):
        v = ConstantInput(float(v))
    if np.any(y0.boundary_trace != 0):
        raise AdmissibilityError("distributed-input initial state must vanish on the boundary")
    zeros = np.zeros(grid.boundary_indices.size)
    return _integrate(op, y0, lambda t: zeros, T, dt, shift=float(v.value), input_norm=abs(v.value),
                      signal=v, mode="distributed", record_every=record_every, steady_tol=steady_tol,
                      tol=tol, spec_name=op.spec.name)


def transform_check(spec: NonlinearitySpec | DiscreteOperator, grid: Grid, x0: ScalarField,
                    v: ConstantInput | float, T: float, dt: float) -> float:
    """Max over stamps of ``|phi_y(t, x0 - v, v) - (phi(t, x0, v) - v)|_inf``."""
    op = as_operator(spec, grid)
    if not isinstance(v, ConstantInput):
        v = ConstantInput(float(v))
    if np.any(x0.boundary_trace != v.value):
        raise AdmissibilityError("x0 must equal v on the boundary")
    bnd = simulate_boundary(op, grid, x0, v, T, dt)
    y0 = x0 - v.value
    # y0 is exactly zero on the boundary since the trace equals v
    dist = simulate_distributed(op, grid, y0, v, T, dt)
    return float(np.max(np.abs(dist.states - (bnd.states - v.value))))
