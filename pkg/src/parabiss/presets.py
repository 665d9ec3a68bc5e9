"""Named problem presets for the harness."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .solver import NonlinearitySpec, fisher_spec, heat_spec, logistic_advection_spec


@dataclass(frozen=True)
class Preset:
    name: str
    formula: str
    factory: Callable[..., NonlinearitySpec]
    defaults: dict
    ranges: dict
    W: tuple[float, float]

    def build(self, **params) -> NonlinearitySpec:
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise ValueError(f"preset {self.name!r} has no parameter(s) {sorted(unknown)}")
        return self.factory(**{**self.defaults, **params})

    def certificate(self, **params) -> float:
        """One-sided Lipschitz constant k(W) on the declared working range."""
        return self.build(**params).lipschitz(*self.W)


PRESETS: dict[str, Preset] = {
    p.name: p
    for p in (
        Preset("heat", "f = a*w", heat_spec, {"a": 0.0}, {"a": (-10.0, 9.6)}, (-2.0, 2.0)),
        Preset("fisher", "f = r*w*(1-w)", fisher_spec, {"r": 1.0}, {"r": (0.0, 5.0)}, (-2.0, 2.0)),
        Preset(
            "logistic-advection",
            "f = r*w*(1-w) + b*xi_1",
            logistic_advection_spec,
            {"b": 1.0, "r": 1.0},
            {"b": (-5.0, 5.0), "r": (0.0, 5.0)},
            (-2.0, 2.0),
        ),
    )
}


def list_presets() -> list[dict]:
    """Catalog entries, sorted by name."""
    out = []
    for name in sorted(PRESETS):
        p = PRESETS[name]
        out.append({
            "name": name,
            "formula": p.formula,
            "defaults": dict(p.defaults),
            "ranges": {k: list(v) for k, v in p.ranges.items()},
            "W": list(p.W),
            "k(W)": p.certificate(),
        })
    return out


def build_spec(name: str, **params) -> NonlinearitySpec:
    try:
        preset = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return preset.build(**params)
