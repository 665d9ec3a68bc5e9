import numpy as np
import pytest

from parabiss.axioms import axiom_suite, causality_gap, cocycle_gap, linearity_gap
from parabiss.grid import ScalarField, make_grid
from parabiss.signals import ConstantInput, PiecewiseConstantSignal, SinusoidSignal
from parabiss.solver import NEWTON_TOL, fisher_spec, heat_spec, logistic_advection_spec

G = make_grid(1.0, 31)


def bump(c, base=0.0):
    return ScalarField(G, base + c * np.where(G.boundary_mask, 0.0, np.sin(np.pi * G.coords[:, 0])))


def test_cocycle_restart():
    u = SinusoidSignal(0.2, 4.0, 0.0, 0.4)
    assert cocycle_gap(fisher_spec(), G, bump(0.3, 0.4), u, 0.5, 0.01, 17) <= 10 * NEWTON_TOL


def test_causality_exact():
    u = ConstantInput(0.5)
    other = PiecewiseConstantSignal((0.1,), (0.5, 1.0))
    assert causality_gap(fisher_spec(), G, bump(0.2, 0.5), u, other, 0.4, 0.01, 20) == 0.0


def test_restart_bounds():
    with pytest.raises(ValueError):
        cocycle_gap(heat_spec(0.0), G, bump(1.0), ConstantInput(0.0), 0.1, 0.01, 0)


def test_linearity():
    u, v = SinusoidSignal(1.0, 3.0), ConstantInput(-0.5)
    x0 = ScalarField(G, np.where(G.boundary_mask, 0.0, 0.4))
    x1 = ScalarField(G, np.where(G.boundary_mask, -0.5, 0.1))
    assert linearity_gap(heat_spec(2.0), G, x0, u, x1, v, 2.0, -3.0, 0.3, 0.01) <= 10 * NEWTON_TOL
    with pytest.raises(ValueError):
        linearity_gap(fisher_spec(), G, x0, u, x1, v, 1.0, 1.0, 0.1, 0.01)


@pytest.mark.parametrize("spec", [heat_spec(1.0), logistic_advection_spec(1.0)])
def test_suite(spec):
    rep = axiom_suite(spec, make_grid((1.0, 1.0), (9, 9)), runs=5, seed=2, T=0.2)
    assert rep.passed, rep.to_dict()
