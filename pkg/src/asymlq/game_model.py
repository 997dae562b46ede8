"""Game instances: the two-player zero-sum LQG game and its model files.

A game is described by

    x[t+1] = A x[t] + B1 u1[t] + B2 u2[t] + w[t],      w ~ N(0, W)
    y1[t]  = C1 x[t] + v1[t],                           v1 ~ N(0, V1)
    y2[t]  = C2 x[t] + v2[t],                           v2 ~ N(0, V2)

with average stage cost ``x'Qx + u1'R1u1 + u2'R2u2``, minimized by player 1
and maximized by player 2 (``R2`` negative definite).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, R2SearchFailed, SolverError, ValidationError, ValueUnbounded

MATRIX_FIELDS = ("A", "B1", "B2", "C1", "C2", "W", "V1", "V2", "Q", "R1", "R2")

MODEL_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "asymlq game model",
    "type": "object",
    "required": ["dims", *MATRIX_FIELDS],
    "properties": {
        "dims": {
            "type": "object",
            "required": ["n", "m1", "m2", "p1", "p2"],
            "properties": {k: {"type": "integer", "minimum": 1} for k in ("n", "m1", "m2", "p1", "p2")},
        },
        **{k: {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
           for k in (*MATRIX_FIELDS, "X0")},
        "x0_mean": {"type": "array", "items": {"type": "number"}},
    },
}


@dataclass
class GameSpec:
    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    C1: np.ndarray
    C2: np.ndarray
    W: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    Q: np.ndarray
    R1: np.ndarray
    R2: np.ndarray
    x0_mean: np.ndarray | None = None
    X0: np.ndarray | None = None

    def __post_init__(self):
        for name in MATRIX_FIELDS:
            setattr(self, name, np.atleast_2d(np.asarray(getattr(self, name), dtype=float)))
        n = self.A.shape[0]
        self.x0_mean = (np.zeros(n) if self.x0_mean is None
                        else np.asarray(self.x0_mean, dtype=float).ravel())
        self.X0 = np.eye(n) if self.X0 is None else np.atleast_2d(np.asarray(self.X0, dtype=float))

    @property
    def dims(self):
        return {"n": self.A.shape[0], "m1": self.B1.shape[1], "m2": self.B2.shape[1],
                "p1": self.C1.shape[0], "p2": self.C2.shape[0]}

    def matrices(self):
        return {name: getattr(self, name) for name in (*MATRIX_FIELDS, "x0_mean", "X0")}

    def replace(self, **changes):
        data = self.matrices()
        data.update(changes)
        return GameSpec(**data)

    def __eq__(self, other):
        if not isinstance(other, GameSpec):
            return NotImplemented
        a, b = self.matrices(), other.matrices()
        return all(a[k].shape == b[k].shape and np.array_equal(a[k], b[k]) for k in a)


def paper_example() -> GameSpec:
    """The two-state benchmark game used throughout the experiments."""
    return GameSpec(
        A=[[-0.3063, -0.3580], [0.5575, -0.5273]],
        B1=[[1.0], [1.0]],
        B2=[[1.0], [1.0]],
        C1=[[1.0, 1.0]],
        C2=[[1.0, 1.0]],
        W=np.eye(2),
        V1=[[1.0]],
        V2=[[1.0]],
        Q=np.eye(2),
        R1=[[1.0]],
        R2=[[-7.5]],
    )


# --- validation -------------------------------------------------------------

@dataclass
class Violation:
    check: str
    message: str


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def add(self, check, message):
        self.violations.append(Violation(check, message))


def validate(spec: GameSpec, tol: float = 1e-10) -> ValidationReport:
    """Check shapes, finiteness, symmetry and definiteness of every matrix."""
    report = ValidationReport()
    n = spec.A.shape[0]
    m1, m2 = spec.B1.shape[1], spec.B2.shape[1]
    p1, p2 = spec.C1.shape[0], spec.C2.shape[0]
    expected = {
        "A": (n, n), "B1": (n, m1), "B2": (n, m2), "C1": (p1, n), "C2": (p2, n),
        "W": (n, n), "V1": (p1, p1), "V2": (p2, p2), "Q": (n, n),
        "R1": (m1, m1), "R2": (m2, m2), "X0": (n, n),
    }
    shapes_ok = {}
    for name, shape in expected.items():
        M = getattr(spec, name)
        shapes_ok[name] = M.shape == shape and M.size > 0
        if not shapes_ok[name]:
            report.add("shape mismatch", f"{name} has shape {M.shape}, expected {shape}")
        elif not np.all(np.isfinite(M)):
            report.add("non-finite", f"{name} has non-finite entries")
            shapes_ok[name] = False
    if spec.x0_mean.shape != (n,):
        report.add("shape mismatch", f"x0_mean has length {spec.x0_mean.size}, expected {n}")

    signs = {"W": "PSD", "Q": "PSD", "X0": "PSD", "V1": "PD", "V2": "PD", "R1": "PD", "R2": "ND"}
    for name, kind in signs.items():
        if not shapes_ok[name]:
            continue
        M = getattr(spec, name)
        scale = max(1.0, float(np.max(np.abs(M))))
        if np.max(np.abs(M - M.T)) > tol * scale:
            report.add(f"{name} not symmetric", f"{name} differs from its transpose")
            continue
        eig = np.linalg.eigvalsh(0.5 * (M + M.T))
        bad = {
            "PSD": eig.min() < -tol * scale,
            "PD": eig.min() <= tol * scale,
            "ND": eig.max() >= -tol * scale,
        }[kind]
        if bad:
            report.add(f"{name} not {kind}", f"{name} eigenvalues {np.array2string(eig, precision=4)}")
    return report


# --- model files ------------------------------------------------------------

def _format(x):
    return float(f"{x:.17g}")


def spec_to_dict(spec: GameSpec):
    out = {"dims": spec.dims}
    for name, M in spec.matrices().items():
        out[name] = [_format(v) for v in M] if M.ndim == 1 else [[_format(v) for v in row] for row in M]
    return out


def dumps_spec(spec: GameSpec) -> str:
    return json.dumps(spec_to_dict(spec), indent=2) + "\n"


def save_spec(spec: GameSpec, path):
    Path(path).write_text(dumps_spec(spec))


def _matrix(data, name):
    try:
        M = np.array(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"field {name!r} is not a numeric matrix", field=name) from exc
    if M.ndim == 1 and name == "x0_mean":
        return M
    if M.ndim != 2:
        raise ParseError(f"field {name!r} must be a nested array of rows", field=name)
    return M


def spec_from_dict(data) -> GameSpec:
    if not isinstance(data, dict):
        raise ParseError("model file must contain a JSON object")
    missing = [k for k in ("dims", *MATRIX_FIELDS) if k not in data]
    if missing:
        raise ParseError(f"missing field(s): {', '.join(missing)}", field=missing[0])
    kwargs = {name: _matrix(data[name], name) for name in MATRIX_FIELDS}
    for opt in ("x0_mean", "X0"):
        if opt in data:
            kwargs[opt] = _matrix(data[opt], opt)
    dims = data["dims"]
    declared = {"n": kwargs["A"].shape[0], "m1": kwargs["B1"].shape[1], "m2": kwargs["B2"].shape[1],
                "p1": kwargs["C1"].shape[0], "p2": kwargs["C2"].shape[0]}
    for key, value in declared.items():
        if not isinstance(dims, dict) or dims.get(key) != value:
            raise ParseError(f"dims.{key} does not match the matrices (expected {value})",
                             field=f"dims.{key}")
    return GameSpec(**kwargs)


def load_spec(path, check=True) -> GameSpec:
    """Read a model file; raises ParseError or ValidationError."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}: {exc.msg}", line=exc.lineno) from exc
    spec = spec_from_dict(data)
    if check:
        report = validate(spec)
        if not report.ok:
            raise ValidationError(report)
    return spec


# --- random instances -------------------------------------------------------

def make_rng(seed):
    """The package-wide generator: numpy PCG64 seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(seed))


def _psd(rng, k):
    G = rng.standard_normal((k, k))
    return G @ G.T + 1e-6 * np.eye(k)


def random_instance(seed, dims=(1, 1, 1, 1, 1), spectral_target=0.8, r2_scale_start=1.0,
                    max_doublings=30, tol=None) -> GameSpec:
    """Random stable game with a maximizer penalty large enough for k = 1.

    Entries are standard normal (PCG64 stream, fixed draw order: A, B1, B2,
    C1, C2, W, V1, V2, Q, R1).  ``A`` is rescaled to spectral radius
    ``spectral_target``; covariances and weights are ``G G' + 1e-6 I``.
    ``R2 = -c I`` where ``c`` doubles from ``r2_scale_start`` until the
    maximizer's first best response is bounded.
    """
    from .best_response import maximizer_initial, minimizer_initial

    n, m1, m2, p1, p2 = dims
    if min(dims) < 1:
        raise ValueError(f"dimensions must be positive, got {dims}")
    if not 0.0 < spectral_target < 1.0:
        raise ValueError("spectral_target must lie in (0, 1)")
    rng = make_rng(seed)
    A = rng.standard_normal((n, n))
    rho = np.max(np.abs(np.linalg.eigvals(A)))
    A = A * (spectral_target / rho)
    B1 = rng.standard_normal((n, m1))
    B2 = rng.standard_normal((n, m2))
    C1 = rng.standard_normal((p1, n))
    C2 = rng.standard_normal((p2, n))
    W, V1, V2, Q, R1 = _psd(rng, n), _psd(rng, p1), _psd(rng, p2), _psd(rng, n), _psd(rng, m1)

    c = float(r2_scale_start)
    spec = GameSpec(A=A, B1=B1, B2=B2, C1=C1, C2=C2, W=W, V1=V1, V2=V2, Q=Q, R1=R1,
                    R2=-c * np.eye(m2))
    first_min = minimizer_initial(spec, tol=tol)
    for _ in range(max_doublings + 1):
        spec = spec.replace(R2=-c * np.eye(m2))
        try:
            maximizer_initial(spec, first_min, tol=tol)
            return spec
        except ValueUnbounded:
            c *= 2.0
        except SolverError:
            # non-stabilizing or stalled iterations also signal a weight too small
            c *= 2.0
    raise R2SearchFailed(f"no bounded maximizer penalty found after {max_doublings} doublings")
