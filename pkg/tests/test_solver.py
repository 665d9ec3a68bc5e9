import math

import numpy as np
import pytest

from parabiss.grid import ScalarField, make_grid
from parabiss.signals import ConstantInput, SinusoidSignal, TabulatedSignal
from parabiss.solver import (
    AdmissibilityError,
    EllipticityError,
    LipschitzCertificateError,
    NewtonConvergenceError,
    NonlinearitySpec,
    TimeStepError,
    UnsupportedFeatureError,
    assemble,
    fisher_spec,
    heat_spec,
    logistic_advection_spec,
    simulate_boundary,
    simulate_distributed,
    step,
    transform_check,
)


def zero_reaction(name="zero", **kw):
    return NonlinearitySpec(name=name, reaction=lambda z, w, xi: np.zeros_like(w),
                            lipschitz=lambda lo, hi: 0.0, **kw)


def sine(grid, k=1):
    L = grid.lengths[0]
    vals = np.sin(k * np.pi * grid.coords[:, 0] / L)
    vals[grid.boundary_mask] = 0.0
    return ScalarField(grid, vals)


class TestAssemble:
    def test_three_point_stencil(self):
        op = assemble(zero_reaction(), make_grid(1.0, 5))
        A = op.laplacian_rows()
        assert A[1].tolist() == [0.0, 16.0, -32.0, 16.0, 0.0]

    def test_scaled_diffusion(self):
        spec = zero_reaction(diffusion=lambda z: np.full(len(z), 2.0))
        A = assemble(spec, make_grid(1.0, 5)).laplacian_rows()
        assert A[1].tolist() == [0.0, 32.0, -64.0, 32.0, 0.0]

    def test_negative_diffusion_rejected(self):
        spec = zero_reaction(diffusion=lambda z: np.full(len(z), -1.0))
        with pytest.raises(EllipticityError) as e:
            assemble(spec, make_grid(1.0, 5))
        assert e.value.value == -1.0

    def test_mixed_derivatives_rejected(self):
        def diff(z):
            A = np.tile(np.eye(2), (len(z), 1, 1))
            A[:, 0, 1] = A[:, 1, 0] = 0.1
            return A

        with pytest.raises(UnsupportedFeatureError):
            assemble(zero_reaction(diffusion=diff), make_grid((1.0, 1.0), (5, 5)))

    def test_bad_lipschitz_certificate(self):
        spec = NonlinearitySpec(name="cubic", reaction=lambda z, w, xi: w**3, lipschitz=lambda lo, hi: 0.0)
        with pytest.raises(LipschitzCertificateError):
            assemble(spec, make_grid(1.0, 11))

    def test_2d_stencil_rows(self):
        g = make_grid((1.0, 2.0), (5, 9))
        A = assemble(zero_reaction(), g).laplacian_rows()
        assert np.allclose(A.sum(axis=1), 0.0)
        assert A[0, g.interior_indices[0]] == pytest.approx(-2 / 0.25**2 - 2 / 0.25**2)


class TestJacobian:
    @pytest.mark.parametrize("spec", [fisher_spec(2.0), logistic_advection_spec(-1.5, 1.0), heat_spec(3.0)])
    def test_banded_matches_finite_difference(self, spec):
        g = make_grid((1.0, 1.0), (7, 6))
        op = assemble(spec, g)
        rng = np.random.default_rng(2)
        x = rng.uniform(0, 1, g.size)
        direction = op.upwind_direction(x)
        dt = 0.01
        ab = op.step_jacobian(x, dt, direction)
        b = op.bandwidth
        J = np.zeros((op.n, op.n))
        for r in range(2 * b + 1):
            for j in range(op.n):
                i = j + r - b
                if 0 <= i < op.n:
                    J[i, j] = ab[r, j]
        old = x[op.idx]
        Jfd = np.zeros_like(J)
        for j in range(op.n):
            e = np.zeros(g.size)
            e[op.idx[j]] = 1e-6
            Jfd[:, j] = (op.step_residual(x + e, old, dt, direction) - op.step_residual(x - e, old, dt, direction)) / 2e-6
        assert np.allclose(J, Jfd, atol=1e-7)

    @pytest.mark.parametrize("spec", [fisher_spec(1.0), logistic_advection_spec(2.0, 1.0)])
    def test_m_matrix_under_step_bound(self, spec):
        g = make_grid(1.0, 21)
        op = assemble(spec, g)
        x = np.random.default_rng(3).uniform(0, 1, g.size)
        assert op.is_m_matrix(x, 0.05, op.upwind_direction(x))


class TestStep:
    def test_constants_are_equilibria(self):
        g = make_grid((1.0, 1.0), (9, 9))
        op = assemble(zero_reaction(), g)
        out = step(op, ScalarField.constant(g, 3.25), 3.25, 0.1)
        assert np.all(out.values == 3.25)

    def test_fisher_zero_state(self):
        g = make_grid(1.0, 21)
        out = step(assemble(fisher_spec(), g), ScalarField.constant(g, 0.0), 0.0, 0.01)
        assert np.all(out.values == 0.0)

    def test_time_step_bound_named(self):
        g = make_grid(1.0, 11)
        with pytest.raises(TimeStepError, match=r"dt\*k"):
            step(assemble(heat_spec(5.0), g), ScalarField.constant(g, 0.0), 0.0, 0.5)

    def test_newton_failure_reports_residual(self):
        g = make_grid(1.0, 21)
        op = assemble(fisher_spec(3.0), g)
        x = ScalarField(g, np.where(g.boundary_mask, 0.0, 0.9))
        with pytest.raises(NewtonConvergenceError) as e:
            step(op, x, 0.0, 0.05, max_iter=1)
        assert e.value.residual > 1e-10

    def test_boundary_pinned(self):
        g = make_grid(1.0, 11)
        out = step(assemble(heat_spec(0.0), g), ScalarField.constant(g, 0.0), 0.7, 0.01)
        assert np.all(out.boundary_trace == 0.7)


class TestSimulateBoundary:
    def test_heat_decay_oracle(self):
        g = make_grid(1.0, 201)
        tr = simulate_boundary(heat_spec(0.0), g, sine(g), ConstantInput(0.0), 0.1, 1e-4)
        assert len(tr) == 1001
        assert tr.norms()[-1] == pytest.approx(math.exp(-math.pi**2 * 0.1), rel=0.02)

    def test_constant_trajectory(self):
        g = make_grid(1.0, 11)
        tr = simulate_boundary(zero_reaction(), g, ScalarField.constant(g, 5.0), ConstantInput(5.0), 0.2, 0.02)
        assert np.all(tr.states == 5.0)

    def test_admissibility(self):
        g = make_grid(1.0, 11)
        with pytest.raises(AdmissibilityError):
            simulate_boundary(heat_spec(0.0), g, sine(g), ConstantInput(1.0), 0.1, 0.01)

    def test_maximum_principle_ramp(self):
        g = make_grid(1.0, 41)
        u = TabulatedSignal(np.array([0.0, 1.0]), np.array([0.0, 1.0]))  # min(t, 1)
        tr = simulate_boundary(zero_reaction(), g, ScalarField.constant(g, 0.0), u, 3.0, 0.01)
        assert tr.norms().max() <= 1.0
        assert tr.states.min() >= 0.0

    def test_identity_and_trace(self):
        g = make_grid((1.0, 1.0), (9, 9))
        u = SinusoidSignal(0.3, 5.0, 0.0, 0.5)
        x0 = ScalarField(g, np.where(g.boundary_mask, 0.5, 0.2))
        tr = simulate_boundary(fisher_spec(), g, x0, u, 0.3, 0.01)
        assert np.array_equal(tr.states[0], x0.values)
        for t, row in zip(tr.times, tr.states):
            assert np.array_equal(row[g.boundary_indices], u.evaluate(t, g))

    def test_2d_decay_rate(self):
        g = make_grid((1.0, 1.0), (41, 41))
        z = g.coords
        x0 = ScalarField(g, np.where(g.boundary_mask, 0.0, np.sin(np.pi * z[:, 0]) * np.sin(np.pi * z[:, 1])))
        tr = simulate_boundary(heat_spec(0.0), g, x0, ConstantInput(0.0), 0.05, 5e-4)
        assert tr.norms()[-1] == pytest.approx(math.exp(-2 * math.pi**2 * 0.05), rel=0.01)

    def test_step_count_rounds_up(self):
        g = make_grid(1.0, 5)
        tr = simulate_boundary(heat_spec(0.0), g, ScalarField.constant(g, 0.0), ConstantInput(0.0), 0.25, 0.1)
        assert tr.times.tolist() == pytest.approx([0.0, 0.1, 0.2, 0.3])

    def test_record_every_and_steady_stop(self):
        g = make_grid(1.0, 21)
        x0 = ScalarField(g, np.where(g.boundary_mask, 1.0, 0.0))
        tr = simulate_boundary(heat_spec(0.0), g, x0, ConstantInput(1.0), 50.0, 0.01, record_every=10,
                               steady_tol=1e-9)
        assert tr.metadata["settled"]
        assert tr.times[-1] < 50.0
        assert np.allclose(tr.final.values, 1.0, atol=1e-8)

    def test_upwind_follows_drift_sign(self):
        g = make_grid(1.0, 11)
        x = np.linspace(0, 1, 11)
        assert np.all(assemble(logistic_advection_spec(2.0), g).upwind_direction(x) > 0)
        assert np.all(assemble(logistic_advection_spec(-2.0), g).upwind_direction(x) < 0)

    def test_csv_and_manifest(self, tmp_path):
        g = make_grid(1.0, 5)
        tr = simulate_boundary(heat_spec(-1.0), g, ScalarField.constant(g, 0.0), ConstantInput(0.0), 0.02, 0.01)
        text = tr.to_csv(tmp_path / "tr.csv")
        lines = text.splitlines()
        assert lines[0] == "t,x0,x1,x2,x3,x4"
        assert len(lines) == 4
        tr.write_manifest(tmp_path / "m.json")
        m = tr.manifest()
        for key in ("spec", "dt", "T", "newton_tol", "scheme", "input"):
            assert key in m
        assert m["spec"] == "heat"


class TestDistributed:
    def test_zero(self):
        g = make_grid(1.0, 11)
        tr = simulate_distributed(fisher_spec(), g, ScalarField.constant(g, 0.0), 0.0, 0.1, 0.01)
        assert np.all(tr.states == 0.0)

    def test_nonzero_trace_rejected(self):
        g = make_grid(1.0, 11)
        with pytest.raises(AdmissibilityError):
            simulate_distributed(heat_spec(0.0), g, ScalarField.constant(g, 0.1), 0.0, 0.1, 0.01)

    def test_shifted_linear_residual(self):
        a, v, dt = 2.0, 0.7, 0.01
        g = make_grid(1.0, 21)
        op = assemble(heat_spec(a), g)
        tr = simulate_distributed(op, g, sine(g) * 0.3, v, 0.05, dt)
        lap = op.laplacian_rows()
        for k in range(1, len(tr)):
            y1, y0 = tr.states[k], tr.states[k - 1]
            res = (y1 - y0)[op.idx] / dt - (lap @ y1 + a * (y1[op.idx] + v))
            assert np.max(np.abs(res)) < 1e-7

    @pytest.mark.parametrize("spec, v", [(heat_spec(0.0), 0.0), (heat_spec(0.0), 1.0), (heat_spec(3.0), -1.0),
                                         (fisher_spec(), 0.3), (logistic_advection_spec(1.0), 0.5)])
    def test_transform_identity(self, spec, v):
        g = make_grid(1.0, 41)
        x0 = ScalarField(g, v + 0.5 * np.where(g.boundary_mask, 0.0, np.sin(np.pi * g.coords[:, 0])))
        assert transform_check(spec, g, x0, v, 0.5, 0.01) <= 1e-9

    def test_transform_needs_matching_trace(self):
        g = make_grid(1.0, 11)
        with pytest.raises(AdmissibilityError):
            transform_check(heat_spec(0.0), g, ScalarField.constant(g, 0.0), 1.0, 0.1, 0.01)


def test_spatial_second_order_against_time_matched_oracle():
    # the scheme's temporal factor applied to the exact eigenvalue isolates the spatial error
    dt, T = 1e-3, 0.1
    n_steps = round(T / dt)
    errs = []
    for n in (21, 41, 81):
        g = make_grid(1.0, n)
        tr = simulate_boundary(heat_spec(0.0), g, sine(g), ConstantInput(0.0), T, dt)
        oracle = (1 + math.pi**2 * dt) ** (-n_steps) * sine(g).values
        errs.append(np.max(np.abs(tr.final.values - oracle)))
    r1, r2 = errs[0] / errs[1], errs[1] / errs[2]
    assert 3.6 < r1 < 4.4 and 3.6 < r2 < 4.4
