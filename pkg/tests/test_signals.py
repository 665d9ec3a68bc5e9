import numpy as np
import pytest

from parabiss.grid import make_grid
from parabiss.signals import (
    ConstantInput,
    PiecewiseConstantSignal,
    ScaledSumSignal,
    SinusoidSignal,
    SwitchedSignal,
    TabulatedSignal,
    signal_from_descriptor,
)

G = make_grid((1.0, 1.0), (5, 5))


def test_constant():
    u = ConstantInput(-2.0)
    assert np.all(u.evaluate(3.0, G) == -2.0)
    assert u.evaluate(0.0, G).size == G.boundary_indices.size
    assert u.sup_norm == 2.0


def test_sinusoid_bounds():
    u = SinusoidSignal(0.5, 2.0, 0.3, 1.0)
    assert u.bounds() == (0.5, 1.5)
    ts = np.linspace(0, 20, 5001)
    vals = [u.scalar(t) for t in ts]
    assert min(vals) >= 0.5 and max(vals) <= 1.5


def test_piecewise():
    u = PiecewiseConstantSignal((1.0,), (2.0, -1.0))
    assert u.scalar(0.5) == 2.0
    assert u.scalar(1.0) == -1.0
    assert u.bounds() == (-1.0, 2.0)


def test_tabulated_interpolates_and_holds():
    u = TabulatedSignal(np.array([0.0, 1.0]), np.array([0.0, 2.0]))
    assert u.scalar(0.25) == pytest.approx(0.5)
    assert u.scalar(5.0) == 2.0


def test_tabulated_per_node():
    nb = G.boundary_indices.size
    traces = np.vstack([np.zeros(nb), np.arange(nb, dtype=float)])
    u = TabulatedSignal(np.array([0.0, 2.0]), traces)
    assert np.allclose(u.evaluate(1.0, G), 0.5 * np.arange(nb))
    assert u.bounds() == (0.0, nb - 1.0)


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        ConstantInput(1.0).evaluate(-1.0, G)


def test_shift_and_switch():
    u = PiecewiseConstantSignal((1.0,), (2.0, -1.0))
    assert u.shifted(1.5).scalar(0.0) == -1.0
    w = SwitchedSignal(ConstantInput(1.0), ConstantInput(3.0), 0.5)
    assert w.scalar(0.5) == 1.0 and w.scalar(0.51) == 3.0
    assert w.bounds() == (1.0, 3.0)


def test_combination_bounds():
    s = ScaledSumSignal(((2.0, ConstantInput(1.0)), (-1.0, SinusoidSignal(1.0, 1.0))))
    assert s.bounds() == (1.0, 3.0)


@pytest.mark.parametrize("u", [
    ConstantInput(0.3),
    SinusoidSignal(0.2, 3.0, 0.1, 0.5),
    PiecewiseConstantSignal((0.5, 1.0), (1.0, 0.0, 2.0)),
    TabulatedSignal(np.array([0.0, 0.5, 1.0]), np.array([0.0, 1.0, 0.5])),
    SwitchedSignal(ConstantInput(1.0), SinusoidSignal(1.0, 1.0), 0.2),
    ScaledSumSignal(((1.0, ConstantInput(1.0)), (0.5, SinusoidSignal(1.0, 2.0)))),
])
def test_descriptor_round_trip(u):
    v = signal_from_descriptor(u.descriptor())
    for t in (0.0, 0.3, 0.75, 2.0):
        assert np.array_equal(u.evaluate(t, G), v.evaluate(t, G))
    assert v.bounds() == u.bounds()


def test_unknown_descriptor():
    with pytest.raises(ValueError):
        signal_from_descriptor({"kind": "white-noise"})
