"""Acceptance criteria, each run at its stated tolerance.

Every test records one PASS/FAIL line; the lines are repeated in the pytest
terminal summary under "acceptance criteria".
"""

import math
import time
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from parabiss.axioms import axiom_suite
from parabiss.cli import main
from parabiss.grid import ScalarField, make_grid
from parabiss.heat import analytic_heat_solution, corollary1_experiment, steady_state_constant_boundary
from parabiss.iss import constant_input_gain_sweep, reduction_experiment
from parabiss.monotone import monotone_system_test, random_admissible_state, random_signal
from parabiss.presets import build_spec
from parabiss.signals import ConstantInput
from parabiss.solver import fisher_spec, heat_spec, simulate_boundary, transform_check

PI2 = math.pi**2


def sine_state(grid, amp=1.0, base=0.0):
    vals = base + amp * np.sin(np.pi * grid.coords[:, 0] / grid.lengths[0])
    vals[grid.boundary_mask] = base
    return ScalarField(grid, vals)


def test_criterion_1_heat_decay_oracle(record_criterion):
    g = make_grid(1.0, 201)
    t0 = time.perf_counter()
    tr = simulate_boundary(heat_spec(0.0), g, sine_state(g), ConstantInput(0.0), 0.2, 1e-4)
    elapsed = time.perf_counter() - t0
    norms = tr.norms()
    errs = {}
    for t in (0.05, 0.1, 0.2):
        k = int(np.argmin(np.abs(tr.times - t)))
        assert abs(tr.times[k] - t) < 1e-12
        errs[t] = abs(norms[k] - math.exp(-PI2 * t)) / math.exp(-PI2 * t)
    ok = max(errs.values()) <= 0.02 and elapsed < 10.0
    record_criterion("1", "heat decay oracle", ok,
                     ", ".join(f"rel err t={t:g}: {e:.2e}" for t, e in errs.items()) + f"; runtime {elapsed:.2f}s")
    assert ok


def test_criterion_2_steady_state_gain(record_criterion):
    exact = 1 / math.cos(math.sqrt(5) / 2)
    # closed form vs an independent dense BVP solve of w'' + 5w = 0, w = 1 at both ends
    n = 1001
    h = 1.0 / (n - 1)
    m = n - 2
    A = (np.diag(np.full(m, -2.0)) + np.diag(np.ones(m - 1), 1) + np.diag(np.ones(m - 1), -1)) / h**2
    A += 5 * np.eye(m)
    rhs = np.zeros(m)
    rhs[0] = rhs[-1] = -1 / h**2
    dense = float(np.linalg.solve(A, rhs).max())
    g = make_grid(1.0, 101)
    closed = steady_state_constant_boundary(5.0, 1.0, g).norm()
    sweep = constant_input_gain_sweep(heat_spec(5.0), g, [1.0], T=50.0, dt=0.01)
    sim = sweep.samples[0][1]
    rel = abs(sim - exact) / exact
    ok = rel <= 0.01 and abs(closed - exact) < 1e-12 and abs(dense - exact) / exact < 1e-3 and sweep.all_settled
    record_criterion("2", "steady-state gain oracle", ok,
                     f"simulated {sim:.6f} vs 1/cos(sqrt5/2)={exact:.6f} (rel {rel:.2e}); dense BVP {dense:.6f}")
    assert ok


def test_criterion_3_comparison_principle(record_criterion):
    g = make_grid(1.0, 41)
    worst = {}
    for name, spec in (("heat", build_spec("heat")), ("fisher", fisher_spec())):
        rep = monotone_system_test(spec, g, 100, seed=2024, T=0.5, dt=0.01, data_range=(0.0, 1.0))
        assert len(rep.reports) == 100
        worst[name] = rep.max_violation
    ok = max(worst.values()) <= 1e-10
    record_criterion("3", "discrete comparison principle", ok,
                     ", ".join(f"{k}: max violation {v:.3e}" for k, v in worst.items()) + " (100 pairs each)")
    assert ok


def test_criterion_4_transform_identity(record_criterion):
    g = make_grid(1.0, 101)
    cases = [("heat", heat_spec(0.0), v) for v in (-1.0, 0.5, 1.0)] + [("fisher", fisher_spec(), 0.3)]
    gaps = {}
    for name, spec, v in cases:
        x0 = sine_state(g, 0.5, v)
        gaps[f"{name} v={v:g}"] = transform_check(spec, g, x0, v, 1.0, 0.01)
    ok = max(gaps.values()) <= 1e-9
    record_criterion("4", "transform identity", ok, ", ".join(f"{k}: {e:.1e}" for k, e in gaps.items()))
    assert ok


def time_varying_battery(rng, grid, lo, hi, T, size):
    out = []
    while len(out) < size:
        u = random_signal(rng, lo, hi, T)
        if isinstance(u, ConstantInput):
            continue
        lo_u, hi_u = u.bounds()
        if hi_u - lo_u <= 0:
            continue
        out.append((random_admissible_state(rng, grid, u, lo, hi), u))
    return out


def test_criterion_5_constant_input_reduction(record_criterion):
    g = make_grid(1.0, 41)
    rng = np.random.default_rng(55)
    details, ok = [], True
    for name in ("heat", "fisher", "logistic-advection"):
        battery = time_varying_battery(rng, g, 0.0, 0.5, 2.0, 20)
        rep = reduction_experiment(build_spec(name), g, battery, T=2.0, dt=0.01, sweep_T=50.0, rel_tol=1e-8)
        worst = min(min(rep.sandwich_margins), min(rep.composite_margins))
        ok = ok and rep.holds and worst >= -rep.tolerance
        details.append(f"{name}: min margin {worst:.3e} (tol {rep.tolerance:.0e}), {len(rep.violations)} violations")
    record_criterion("5", "constant-input reduction", ok, "; ".join(details))
    assert ok


def test_criterion_6_linear_case_agreement(record_criterion):
    rep = corollary1_experiment([-5.0, 0.0, 5.0, 9.0, 11.0, 15.0], domain=1.0)
    rate = [r.rate_error for r in rep.rows if r.spectral_stable]
    slope = [r.slope_error for r in rep.rows if r.spectral_stable]
    ok = rep.agree and all(e is not None and e <= 0.10 for e in rate) and all(
        e is not None and e <= 0.05 for e in slope)
    verdicts = " ".join(f"a={r.a:g}:{'S' if r.spectral_stable else 'U'}{'S' if r.decay_stable else 'U'}"
                        f"{'G' if r.gain_exists else '-'}" for r in rep.rows)
    record_criterion("6", "linear-case verdict agreement", ok,
                     f"{verdicts}; max rate err {max(rate):.2%}, max slope err {max(slope):.2%}")
    assert ok


def test_criterion_7_grid_convergence(record_criterion):
    errs = []
    for n in (51, 101, 201):
        g = make_grid(1.0, n)
        tr = simulate_boundary(heat_spec(0.0), g, sine_state(g), ConstantInput(0.0), 0.1, 1e-5)
        exact = analytic_heat_solution([1.0], 0.0, 0.1, g)
        errs.append(float(np.max(np.abs(tr.final.values - exact.values))))
    ratios = [errs[0] / errs[1], errs[1] / errs[2]]
    ok = all(3.2 <= r <= 4.8 for r in ratios)
    record_criterion("7", "grid convergence", ok,
                     "errors " + ", ".join(f"{e:.3e}" for e in errs) + "; ratios " + ", ".join(f"{r:.2f}" for r in ratios)
                     + " (target [3.2, 4.8])")
    assert ok


def test_criterion_8_axiom_suite(record_criterion):
    details, ok = [], True
    for i, name in enumerate(("heat", "fisher", "logistic-advection")):
        rep = axiom_suite(build_spec(name), make_grid(1.0, 41), runs=20, seed=800 + i, T=0.5, dt=0.01)
        ok = ok and rep.passed
        details.append(f"{name}: identity {rep.identity:.0e}, causality {rep.causality:.0e}, "
                       f"cocycle {rep.cocycle:.1e} (tol {rep.tol:.0e})")
    record_criterion("8", "axiom suite (20 runs per preset)", ok, "; ".join(details))
    assert ok


DET_CONFIGS = {
    "monotone.ini": "[experiment]\nschema = 1\nkind = monotone-test\n[problem]\npreset = fisher\nn = 31\nT = 0.3\n"
                    "[battery]\nsize = 10\n",
    "reduction.ini": "[experiment]\nschema = 1\nkind = reduction\n[problem]\npreset = heat\na = -1\nn = 31\nT = 1\n"
                     "[battery]\nsize = 4\ndata_max = 0.5\n[sweep]\nT = 30\n",
    "linear.ini": "[experiment]\nschema = 1\nkind = linear-analysis\n[problem]\npreset = heat\nn = 41\n"
                  "[sweep]\na_values = -5, 0, 15\n",
}


def test_criterion_9_determinism(record_criterion, tmp_path):
    compared, mismatched = 0, []
    for name, text in DET_CONFIGS.items():
        cfg = tmp_path / name
        cfg.write_text(text, encoding="utf-8")
        dirs = []
        for rep in range(2):
            out = tmp_path / f"{name}-{rep}"
            res = CliRunner().invoke(main, ["run", "--config", str(cfg), "--out", str(out), "--seed", "12345"])
            assert res.exit_code == 0, res.output
            (d,) = [p for p in out.iterdir() if p.is_dir()]
            dirs.append(d)
        csvs = sorted(p.name for p in dirs[0].glob("*.csv"))
        assert csvs and csvs == sorted(p.name for p in dirs[1].glob("*.csv"))
        for f in csvs:
            compared += 1
            if (dirs[0] / f).read_bytes() != (dirs[1] / f).read_bytes():
                mismatched.append(f"{name}:{f}")
    ok = not mismatched
    record_criterion("9", "determinism", ok,
                     f"{compared} CSV files compared across repeated runs, {len(mismatched)} differ")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([str(Path(__file__)), "-q"]))
