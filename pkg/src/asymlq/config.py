"""Numerical tolerances.

Defaults can be overridden per call (pass a ``Tolerances``) or globally via the
``ASYMLQ_TOL`` environment variable, either a single number (applied to
``residual``) or comma separated ``name=value`` pairs, e.g.
``ASYMLQ_TOL="residual=1e-9,riccati_step=1e-13"``.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    residual: float = 1e-10
    symmetry: float = 1e-12
    riccati_step: float = 1e-12
    max_iterations: int = 100_000
    condition_limit: float = 1e12
    diagonalizable_kappa: float = 1e10
    definiteness: float = 1e-10


def _parse_env(raw):
    fields = {f.name: f.type for f in dataclasses.fields(Tolerances)}
    raw = raw.strip()
    if not raw:
        return {}
    if "=" not in raw:
        return {"residual": float(raw)}
    out = {}
    for item in raw.split(","):
        name, _, value = item.partition("=")
        name = name.strip()
        if name not in fields:
            raise ValueError(f"unknown tolerance {name!r} in ASYMLQ_TOL")
        out[name] = int(float(value)) if name == "max_iterations" else float(value)
    return out


def default_tolerances() -> Tolerances:
    return Tolerances(**_parse_env(os.environ.get("ASYMLQ_TOL", "")))
