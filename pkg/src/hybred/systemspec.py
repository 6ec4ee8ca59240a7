"""System specification: JSON ingestion, validation, and compiled model.

A spec file declares the phase-space dimension, the Hamiltonian and potential
expressions, guard and impact expressions, parameters, the translation-action
matrix A (2n x k), the momentum map (B, b), integrator settings, tolerances,
an initial condition, and the momentum levels to verify.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SpecParseError, ValidationError
from .expr import Expr, FunctionDef, ScalarField, parse_expression
from .hybrid import Guard, HybridSystemDef, ImpactMap
from .phase import canonical_symplectic_matrix, coordinate_names
from .symmetry import MomentumMap, TranslationAction

__all__ = ["IntegratorSettings", "Tolerances", "SystemSpec", "load_spec", "spec_from_dict"]


@dataclass
class IntegratorSettings:
    h: float = 1e-3
    T: float = 10.0
    max_impacts: int = 100_000
    min_gap: float = 1e-9
    method: str = ""  # "" = leapfrog when separable, rk4 otherwise


@dataclass
class Tolerances:
    tol_t: float = 1e-10
    tol_g: float = 1e-9
    tol_state: float = 1e-6
    tol_time: float = 1e-8


def _require(cond: bool, message: str):
    if not cond:
        raise ValidationError(message)


def _matrix(raw, rows, cols, name) -> np.ndarray:
    try:
        m = np.array(raw, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(f"{name} must be a numeric matrix") from None
    _require(m.shape == (rows, cols), f"{name} must be {rows}x{cols}, got {m.shape}")
    return m


@dataclass
class SystemSpec:
    """Validated spec with all expressions parsed and fields compiled."""

    n: int
    coords: tuple[str, ...]
    hamiltonian_expr: Expr
    separable: bool
    functions: dict[str, FunctionDef]
    guard_level_expr: Expr
    guard_direction_expr: Expr
    impact_exprs: list[Expr]
    params: dict[str, float]
    action: TranslationAction
    momentum: MomentumMap
    integrator: IntegratorSettings
    tolerances: Tolerances
    initial_condition: np.ndarray | None
    mu_list: list[np.ndarray]
    seed: int
    raw: dict = field(repr=False, default_factory=dict)

    # ---- compiled conveniences -------------------------------------------

    @property
    def k(self) -> int:
        return self.action.k

    @property
    def omega(self) -> np.ndarray:
        return canonical_symplectic_matrix(self.n)

    def _field(self, expr: Expr) -> ScalarField:
        return ScalarField(expr, self.coords, self.params, self.functions)

    @property
    def hamiltonian(self) -> ScalarField:
        return self._field(self.hamiltonian_expr)

    @property
    def guard(self) -> Guard:
        return Guard(
            level=self._field(self.guard_level_expr),
            direction=self._field(self.guard_direction_expr),
        )

    @property
    def impact(self) -> ImpactMap:
        return ImpactMap([self._field(e) for e in self.impact_exprs])

    def hybrid_system(self) -> HybridSystemDef:
        return HybridSystemDef(
            n=self.n,
            hamiltonian=self.hamiltonian,
            omega=self.omega,
            separable=self.separable,
            guard=self.guard,
            impact=self.impact,
        )

    def cocycle_matrix(self) -> np.ndarray:
        """Exact cocycle matrix for the affine class: sigma(g) = B A g."""
        return self.momentum.B @ self.action.A

    def isotropy_dim(self) -> int:
        C = self.cocycle_matrix()
        if C.size == 0:
            return self.k
        sv = np.linalg.svd(C, compute_uv=False)
        rank = int(np.sum(sv > 1e-10 * sv[0])) if sv[0] > 0 else 0
        return self.k - rank

    def method(self) -> str:
        if self.integrator.method:
            return self.integrator.method
        return "leapfrog" if self.separable else "rk4"


def spec_from_dict(data: dict) -> SystemSpec:
    _require(isinstance(data, dict), "spec root must be a JSON object")
    try:
        n = int(data["dimension"])
    except (KeyError, TypeError, ValueError):
        raise ValidationError("dimension must be a positive integer") from None
    _require(n >= 1, "dimension must be a positive integer")
    coords = tuple(coordinate_names(n))

    params = {str(k): float(v) for k, v in (data.get("parameters") or {}).items()}
    for name in params:
        _require(name not in coords, f"parameter {name!r} shadows a coordinate")

    functions: dict[str, FunctionDef] = {}
    for fname, fdef in (data.get("potentials") or {}).items():
        _require(
            isinstance(fdef, dict) and "arg" in fdef and "body" in fdef,
            f"potential {fname!r} needs 'arg' and 'body'",
        )
        body = parse_expression(fdef["body"], [fdef["arg"]], params, [])
        functions[str(fname)] = FunctionDef(str(fname), str(fdef["arg"]), body)

    def parse(src, what) -> Expr:
        _require(isinstance(src, str) and src.strip() != "", f"{what} must be a non-empty expression")
        return parse_expression(src, coords, params, functions)

    _require("hamiltonian" in data, "hamiltonian is required")
    hamiltonian = parse(data["hamiltonian"], "hamiltonian")
    separable = bool(data.get("separable", False))

    guard_raw = data.get("guard")
    _require(
        isinstance(guard_raw, dict) and "level" in guard_raw and "direction" in guard_raw,
        "guard must provide 'level' and 'direction' expressions",
    )
    guard_level = parse(guard_raw["level"], "guard level")
    guard_direction = parse(guard_raw["direction"], "guard direction")

    impact_raw = data.get("impact")
    _require(
        isinstance(impact_raw, list) and len(impact_raw) == 2 * n,
        f"impact must list 2n = {2 * n} component expressions",
    )
    impact_exprs = [parse(s, f"impact component {i}") for i, s in enumerate(impact_raw)]

    _require("action_matrix" in data, "action_matrix is required")
    A_raw = np.array(data["action_matrix"], dtype=float)
    _require(A_raw.ndim == 2 and A_raw.shape[0] == 2 * n, "action matrix must be 2n x k")
    k = A_raw.shape[1]
    action = TranslationAction(A=A_raw)

    B = _matrix(data.get("momentum_matrix"), k, 2 * n, "momentum matrix")
    b_raw = data.get("momentum_offset", [0.0] * k)
    b = np.array(b_raw, dtype=float)
    _require(b.shape == (k,), "momentum offset must have length k")
    momentum = MomentumMap(B=B, b=b)

    integ_raw = data.get("integrator") or {}
    integrator = IntegratorSettings(
        h=float(integ_raw.get("h", 1e-3)),
        T=float(integ_raw.get("T", 10.0)),
        max_impacts=int(integ_raw.get("max_impacts", 100_000)),
        min_gap=float(integ_raw.get("min_gap", 1e-9)),
        method=str(integ_raw.get("method", "")),
    )
    _require(integrator.h > 0, "integrator step h must be positive")
    _require(integrator.method in ("", "leapfrog", "rk4"), "integrator method must be leapfrog or rk4")
    if integrator.method == "leapfrog":
        _require(separable, "leapfrog requested but the spec does not declare separability")

    tol_raw = data.get("tolerances") or {}
    tolerances = Tolerances(
        tol_t=float(tol_raw.get("tol_t", 1e-10)),
        tol_g=float(tol_raw.get("tol_g", 1e-9)),
        tol_state=float(tol_raw.get("tol_state", 1e-6)),
        tol_time=float(tol_raw.get("tol_time", 1e-8)),
    )

    x0 = None
    if data.get("initial_condition") is not None:
        x0 = np.array(data["initial_condition"], dtype=float)
        _require(x0.shape == (2 * n,), "initial_condition must have length 2n")

    mu_list = []
    for i, mu in enumerate(data.get("mu_list") or []):
        mu = np.array(mu, dtype=float)
        _require(mu.shape == (k,), f"mu_list[{i}] must have length k = {k}")
        mu_list.append(mu)

    seed = int(data.get("seed", 0))

    return SystemSpec(
        n=n,
        coords=coords,
        hamiltonian_expr=hamiltonian,
        separable=separable,
        functions=functions,
        guard_level_expr=guard_level,
        guard_direction_expr=guard_direction,
        impact_exprs=impact_exprs,
        params=params,
        action=action,
        momentum=momentum,
        integrator=integrator,
        tolerances=tolerances,
        initial_condition=x0,
        mu_list=mu_list,
        seed=seed,
        raw=data,
    )


def load_spec(path: str | Path) -> SystemSpec:
    """Load and validate a system spec from a JSON file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read spec file {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecParseError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    return spec_from_dict(data)
