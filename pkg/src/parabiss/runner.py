"""Experiment orchestration and artifact persistence."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path

import numpy as np

from . import __version__
from .axioms import identity_gap
from .config import ExperimentConfig
from .grid import ScalarField, make_grid
from .heat import corollary1_experiment
from .iss import ORDER_TOL, equivalence_experiment, reduction_experiment
from .monotone import monotone_system_test, random_admissible_state, random_signal, squared_sine_bump
from .presets import build_spec
from .signals import signal_from_descriptor
from .solver import simulate_boundary
from .svg import line_chart

RATE_TOL = 0.10
SLOPE_TOL = 0.05


@dataclass
class RunResult:
    kind: str
    passed: bool
    checks: dict
    files: dict[str, str] = field(default_factory=dict)


def jsonable(obj):
    """Plain JSON types; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), indent=2, sort_keys=True) + "\n"


def _rows_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _grid(cfg: ExperimentConfig):
    n = cfg.n if len(cfg.n) == len(cfg.domain) else cfg.n * len(cfg.domain)
    return make_grid(cfg.domain, n)


def _run_simulate(cfg: ExperimentConfig) -> RunResult:
    grid = _grid(cfg)
    spec = build_spec(cfg.preset, **cfg.params)
    u = signal_from_descriptor(cfg.signal)
    vals = u.evaluate(0.0, grid)[0] + cfg.initial_amplitude * squared_sine_bump(grid, [1] * grid.ndim)
    vals[grid.boundary_mask] = u.evaluate(0.0, grid)
    x0 = ScalarField(grid, vals)
    tr = simulate_boundary(spec, grid, x0, u, cfg.T, cfg.dt)
    trace_gap = max(float(np.max(np.abs(tr.states[k][grid.boundary_indices] - u.evaluate(t, grid))))
                    for k, t in enumerate(tr.times))
    norms = tr.norms(cfg.p)
    checks = {"identity_gap": identity_gap(tr, x0), "trace_gap": trace_gap}
    files = {
        "trajectory.csv": tr.to_csv(),
        "norms.csv": _rows_csv(["t", "norm"], zip(tr.times, norms)),
        "norms.svg": line_chart([("||x(t)||", tr.times, norms)], title=f"{cfg.preset}: state norm",
                                xlabel="t", ylabel="norm"),
        "trajectory_manifest.json": dumps(tr.manifest()),
    }
    return RunResult(cfg.kind, checks["identity_gap"] == 0 and trace_gap == 0, checks, files)


def _run_monotone(cfg: ExperimentConfig) -> RunResult:
    grid = _grid(cfg)
    spec = build_spec(cfg.preset, **cfg.params)
    rep = monotone_system_test(spec, grid, cfg.battery_size, cfg.seed, T=cfg.T, dt=cfg.dt,
                               data_range=cfg.data_range)
    summary = rep.summary() | {"tolerance": ORDER_TOL, "passed": rep.max_violation <= ORDER_TOL}
    ids = [r.pair_id for r in rep.reports]
    files = {
        "battery.csv": rep.to_csv(),
        "summary.json": dumps(summary),
        "violations.svg": line_chart([("max(lower - upper)", ids, [r.max_violation for r in rep.reports])],
                                     title=f"{cfg.preset}: order margin per pair", xlabel="pair",
                                     ylabel="violation"),
    }
    return RunResult(cfg.kind, summary["passed"], summary, files)


def _battery(cfg: ExperimentConfig, grid):
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.data_range
    out = []
    for _ in range(cfg.battery_size):
        u = random_signal(rng, lo, hi, cfg.T)
        out.append((random_admissible_state(rng, grid, u, lo, hi), u))
    return out


def _run_reduction(cfg: ExperimentConfig) -> RunResult:
    grid = _grid(cfg)
    spec = build_spec(cfg.preset, **cfg.params)
    rep = reduction_experiment(spec, grid, _battery(cfg, grid), T=cfg.T, dt=cfg.dt, p=cfg.p, sweep_T=cfg.sweep_T)
    idx = list(range(len(rep.sandwich_margins)))
    files = {
        "sweep.csv": rep.sweep.to_csv(),
        "margins.csv": _rows_csv(["run", "sandwich_margin", "order_violation", "composite_margin"],
                                 zip(idx, rep.sandwich_margins, rep.order_violations, rep.composite_margins)),
        "report.json": dumps(rep.to_dict()),
        "margins.svg": line_chart([("sandwich", idx, rep.sandwich_margins),
                                   ("composite", idx, rep.composite_margins)],
                                  title=f"{cfg.preset}: bound margins", xlabel="run", ylabel="margin"),
    }
    checks = {"holds": rep.holds, "violations": rep.violations, "tolerance": rep.tolerance}
    return RunResult(cfg.kind, rep.holds, checks, files)


def _run_equivalence(cfg: ExperimentConfig) -> RunResult:
    grid = _grid(cfg)
    spec = build_spec(cfg.preset, **cfg.params)
    rep = equivalence_experiment(spec, grid, cfg.constants, cfg.p, T=cfg.sweep_T, dt=cfg.dt)
    ks = [r.k for r in rep.rows]
    files = {
        "equivalence.csv": rep.to_csv(),
        "report.json": dumps(rep.to_dict()),
        "gains.svg": line_chart([("boundary", ks, [r.gamma_boundary for r in rep.rows]),
                                 ("distributed", ks, [r.gamma_distributed for r in rep.rows])],
                                title=f"{cfg.preset}: steady-state gains", xlabel="k", ylabel="norm"),
    }
    checks = {"consistent": rep.consistent, "flags": rep.flags}
    return RunResult(cfg.kind, rep.consistent, checks, files)


def _run_linear(cfg: ExperimentConfig) -> RunResult:
    grid = _grid(cfg)
    a_values = cfg.a_values or (cfg.params.get("a", 0.0),)
    rep = corollary1_experiment(a_values, grid=grid, dt=cfg.dt, constants=cfg.constants, p=cfg.p)
    table = rep.table()
    rate_ok = all(r["rate_error"] is None or r["rate_error"] <= RATE_TOL for r in table)
    slope_ok = all(r["slope_error"] is None or r["slope_error"] <= SLOPE_TOL for r in table)
    passed = rep.agree and rate_ok and slope_ok
    report = {"agree": rep.agree, "rate_ok": rate_ok, "slope_ok": slope_ok, "passed": passed,
              "rate_tol": RATE_TOL, "slope_tol": SLOPE_TOL, "rows": table,
              "counterexamples": [r["a"] for r in table if not r["agree"]]}
    series = [(f"a={r.a:g}", r.decay_curve[0], r.decay_curve[1]) for r in rep.rows]
    gains = [(f"a={r.a:g}", [k for (k, _), _ in r.gain_samples], [y for (_, y), _ in r.gain_samples])
             for r in rep.rows]
    files = {
        "spectrum.csv": rep.spectrum_csv(),
        "decay.csv": rep.decay_csv(),
        "gains.csv": rep.gains_csv(),
        "report.json": dumps(report),
        "decay.svg": line_chart(series, title="zero-input decay", xlabel="t", ylabel="norm", logy=True),
        "gains.svg": line_chart(gains, title="constant-input response", xlabel="|k|", ylabel="norm"),
        "margin.svg": line_chart([("a - lambda_1", a_values, [r.margin for r in rep.rows]),
                                  ("-fitted rate", a_values, [-r.decay_rate for r in rep.rows])],
                                 title="stability margin vs a", xlabel="a", ylabel="rate"),
        "gain_slope.svg": line_chart([("fitted slope", [r.a for r in rep.rows if r.gain_slope is not None],
                                       [r.gain_slope for r in rep.rows if r.gain_slope is not None]),
                                      ("closed form", [r.a for r in rep.rows if r.closed_form_ratio is not None],
                                       [r.closed_form_ratio for r in rep.rows if r.closed_form_ratio is not None])],
                                     title="linear gain vs a", xlabel="a", ylabel="slope"),
    }
    return RunResult(cfg.kind, passed, {k: report[k] for k in ("agree", "rate_ok", "slope_ok")}, files)


RUNNERS = {
    "simulate": _run_simulate,
    "monotone-test": _run_monotone,
    "reduction": _run_reduction,
    "equivalence": _run_equivalence,
    "linear-analysis": _run_linear,
}


def run_experiment(cfg: ExperimentConfig) -> RunResult:
    return RUNNERS[cfg.kind](cfg)


def make_run_dir(root: Path, kind: str, now: datetime | None = None) -> Path:
    """``<root>/<YYYYmmdd-HHMMSS>-<kind>``, suffixed ``-2``, ``-3``, ... on collision."""
    root.mkdir(parents=True, exist_ok=True)
    stem = f"{(now or datetime.now()).strftime('%Y%m%d-%H%M%S')}-{kind}"
    for i in range(1, 10_000):
        d = root / (stem if i == 1 else f"{stem}-{i}")
        try:
            d.mkdir()
            return d
        except FileExistsError:
            continue
    raise RuntimeError(f"could not allocate a run directory under {root}")


def write_artifacts(run_dir: Path, cfg: ExperimentConfig, result: RunResult) -> None:
    for name, content in sorted(result.files.items()):
        (run_dir / name).write_text(content, encoding="utf-8")
    manifest = {
        "version": __version__,
        "experiment": cfg.kind,
        "config": cfg.to_dict(),
        "passed": result.passed,
        "checks": result.checks,
        "files": sorted(result.files),
    }
    (run_dir / "manifest.json").write_text(dumps(manifest), encoding="utf-8")
