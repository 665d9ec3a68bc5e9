"""Comparison functions: exponential KL bounds and piecewise-linear K gains.

Both fits are majorants of the data they were built from, by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

STRICTIFY_SLOPE = 1e-12


@dataclass(frozen=True)
class KLFit:
    """``beta(r, t) = M * r * exp(-lam * t)``.

    ``raw_rate`` keeps the unclamped regression slope (negative means the
    data grew), which the clamped ``lam`` hides.
    """

    M: float
    lam: float
    raw_rate: float | None = None

    def __post_init__(self):
        if not self.M >= 1:
            raise ValueError(f"KL scale M must be >= 1, got {self.M}")
        if not self.lam > 0:
            raise ValueError(f"decay rate must be > 0, got {self.lam}")

    def __call__(self, r, t):
        return eval_beta(self, r, t)

    def to_dict(self) -> dict:
        return {"family": "exponential", "M": self.M, "lambda": self.lam, "raw_rate": self.raw_rate}


def eval_beta(fit: KLFit, r, t):
    r = np.asarray(r, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(r < 0) or np.any(t < 0):
        raise ValueError("beta is defined for r >= 0 and t >= 0 only")
    out = fit.M * r * np.exp(-fit.lam * t)
    return float(out) if out.ndim == 0 else out


def _tail(n: int) -> slice:
    return slice(n // 2, n)


def fit_exp_kl(decay_curves: Iterable[tuple[Sequence[float], Sequence[float]]]) -> KLFit:
    """Fit ``M, lam`` so that ``norm(t) <= M exp(-lam t) norm(0)`` on every curve.

    ``lam`` is the smallest per-curve least-squares slope of ``-log(norm)``
    over the last half of the samples, clamped positive.  ``M`` is then the
    smallest scale that majorizes every sample.
    """
    curves = []
    for t, y in decay_curves:
        t = np.asarray(t, dtype=float)
        y = np.asarray(y, dtype=float)
        if t.shape != y.shape or t.size < 3:
            raise ValueError("each decay curve needs at least 3 (t, norm) samples")
        if np.any(y < 0):
            raise ValueError("norms must be nonnegative")
        if t[0] != 0:
            raise ValueError("decay curves must start at t = 0")
        if y[0] == 0:
            if np.any(y > 0):
                raise ValueError("curve with zero initial norm grows; no KL bound exists")
            continue
        curves.append((t, y))
    if not curves:
        raise ValueError("no decay curve with positive initial norm")

    rates = []
    for t, y in curves:
        tt, yy = t[_tail(t.size)], y[_tail(t.size)]
        keep = yy > 0
        if keep.sum() < 2:
            tt, yy = t, y
            keep = yy > 0
        if keep.sum() < 2:
            # decayed to exactly zero: as fast as the data can tell
            rates.append(math.inf)
            continue
        slope = np.polyfit(tt[keep], np.log(yy[keep]), 1)[0]
        rates.append(-float(slope))
    raw = min(rates)
    lam = raw if math.isfinite(raw) and raw > 0 else (1.0 if math.isinf(raw) else 1e-12)
    M = 1.0
    for t, y in curves:
        M = max(M, float(np.max(y * np.exp(lam * t) / y[0])))
    # absorb the rounding of exp(lam t) * exp(-lam t) so majorization is exact
    M *= 1.0 + 8 * np.finfo(float).eps
    return KLFit(M=M, lam=lam, raw_rate=raw)


@dataclass(frozen=True)
class GainFit:
    """Monotone piecewise-linear gain through the origin.

    ``slope`` and ``linear_residual`` describe the least-squares linear form
    ``gamma(r) = slope * r`` over the raw samples; the envelope itself is
    what ``__call__`` evaluates.
    """

    breakpoints: tuple[tuple[float, float], ...]
    slope: float | None = None
    linear_residual: float | None = None
    samples: tuple[tuple[float, float], ...] = field(default=(), repr=False)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("gain is defined for r >= 0 only")
        xs = np.array([b[0] for b in self.breakpoints])
        ys = np.array([b[1] for b in self.breakpoints])
        out = np.interp(r, xs, ys)
        if xs.size > 1:
            tail_slope = max((ys[-1] - ys[-2]) / (xs[-1] - xs[-2]), STRICTIFY_SLOPE)
        else:
            tail_slope = STRICTIFY_SLOPE
        out = np.where(r > xs[-1], ys[-1] + tail_slope * (r - xs[-1]), out)
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        return {
            "family": "piecewise-linear",
            "breakpoints": [list(b) for b in self.breakpoints],
            "slope": self.slope,
            "linear_residual": self.linear_residual,
        }


def fit_gain(samples: Iterable[tuple[float, float]], eps: float = STRICTIFY_SLOPE) -> GainFit:
    """Upper envelope of ``(input magnitude, response)`` samples as a K function."""
    pts = [(float(r), float(y)) for r, y in samples]
    if not pts:
        raise ValueError("fit_gain needs at least one sample")
    for r, y in pts:
        if r < 0 or y < 0:
            raise ValueError(f"magnitudes must be nonnegative, got ({r}, {y})")
        if r == 0 and y > 0:
            raise ValueError("response > 0 at zero input cannot be majorized by a K function")

    by_r: dict[float, float] = {}
    for r, y in pts:
        by_r[r] = max(by_r.get(r, 0.0), y)
    bps = [(0.0, 0.0)]
    for r in sorted(k for k in by_r if k > 0):
        y_prev = bps[-1][1]
        y = by_r[r]
        if y <= y_prev:
            y = y_prev + eps * (r - bps[-1][0])
        bps.append((r, y))
    with np.errstate(over="ignore", divide="ignore"):
        seg = np.diff([b[1] for b in bps]) / np.diff([b[0] for b in bps])
    if not np.all(np.isfinite(seg)):
        raise ValueError("envelope slope overflows; input magnitudes are too close to zero")

    rs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    slope = resid = None
    if np.any(rs > 0):
        scale = rs.max()
        rn = rs / scale
        slope = float(rn @ ys / (rn @ rn) / scale)
        denom = np.linalg.norm(ys)
        resid = float(np.linalg.norm(ys - slope * rs) / denom) if denom > 0 else 0.0
    return GainFit(tuple(bps), slope, resid, tuple(pts))
