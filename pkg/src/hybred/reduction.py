"""Level-set charts, reduced symplectic forms, reduced hybrid systems, and the
projected-flow vs reduced-flow certificate.

Charts solve the affine constraint J(x) = mu for a bound subset of the Darboux
coordinates in terms of the remaining free ones, mirroring the coordinate
choice one makes by hand.  The reduced form is always computed by pullback,
never assumed canonical (the worked translation example yields twice the
canonical form, and using the canonical one would double every reduced
velocity).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateReducedFormError,
    DimensionMismatchError,
    LevelMismatchError,
    SingularSelectionError,
    StructureMismatchError,
    UnsupportedIsotropyError,
)
from .expr import (
    Binary,
    Const,
    Expr,
    ScalarField,
    Unary,
    Var,
    fold_constants,
    substitute,
)
from .hybrid import Dynamics, Guard, HybridFlow, ImpactMap, apply_impact, execute
from .phase import HamiltonianField, RK4Stepper, check_symplectic_matrix
from .symmetry import MomentumMap, sample_level_guard_points

__all__ = [
    "LevelSetChart",
    "ReducedSystem",
    "affine_expr",
    "build_chart",
    "reduced_form",
    "reduce_hamiltonian",
    "reduce_guard_impact",
    "build_reduced_system",
    "run_reduced_hybrid",
    "compare_flows",
]

LEVEL_TOL = 1e-9


def affine_expr(c0: float, terms: list[tuple[float, str]]) -> Expr:
    """Readable AST for c0 + sum(coeff * name)."""

    def attach(node, piece, negative):
        if node is None:
            return Unary("neg", piece) if negative else piece
        return Binary("-" if negative else "+", node, piece)

    node = None
    if c0 != 0.0:
        node = attach(None, Const(abs(c0)), c0 < 0)
    for coeff, name in terms:
        if coeff == 0.0:
            continue
        piece = Var(name) if abs(coeff) == 1.0 else Binary("*", Const(abs(coeff)), Var(name))
        node = attach(node, piece, coeff < 0)
    return node if node is not None else Const(0.0)


@dataclass
class LevelSetChart:
    """Affine parametrization of J^{-1}(mu) by a free coordinate subset."""

    mu: np.ndarray
    free_indices: tuple[int, ...]
    bound_indices: tuple[int, ...]
    P: np.ndarray  # 2n x m linear part of the parametrization
    x0: np.ndarray  # offset, so x = P y + x0
    coord_names: tuple[str, ...]  # names of all 2n coordinates

    @property
    def m(self) -> int:
        return len(self.free_indices)

    @property
    def free_names(self) -> tuple[str, ...]:
        return tuple(self.coord_names[i] for i in self.free_indices)

    def parametrize(self, y: np.ndarray) -> np.ndarray:
        return self.P @ np.asarray(y, dtype=float) + self.x0

    def project(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float)[list(self.free_indices)]

    def bound_substitution(self) -> dict[str, Expr]:
        """Bound coordinate name -> affine expression in the free names."""
        out: dict[str, Expr] = {}
        for i in self.bound_indices:
            terms = [(float(self.P[i, j]), self.free_names[j]) for j in range(self.m)]
            out[self.coord_names[i]] = affine_expr(float(self.x0[i]), terms)
        return out


def _greedy_bound_columns(B: np.ndarray) -> list[int]:
    """Full-pivot Gaussian elimination to pick k well-conditioned bound columns."""
    R = np.array(B, dtype=float)
    k, dim = R.shape
    used_rows: list[int] = []
    chosen: list[int] = []
    for _ in range(k):
        mask = np.ones_like(R, dtype=bool)
        mask[used_rows, :] = False
        mask[:, chosen] = False
        masked = np.where(mask, np.abs(R), -1.0)
        r, c = np.unravel_index(np.argmax(masked), R.shape)
        if masked[r, c] <= 1e-12:
            raise SingularSelectionError("momentum matrix is rank deficient")
        used_rows.append(int(r))
        chosen.append(int(c))
        for rr in range(k):
            if rr != r:
                R[rr, :] -= (R[rr, c] / R[r, c]) * R[r, :]
    return sorted(chosen)


def build_chart(
    J: MomentumMap,
    mu: np.ndarray,
    coord_names: tuple[str, ...],
    free_indices: tuple[int, ...] | None = None,
    isotropy_dim: int = 0,
) -> LevelSetChart:
    """Solve B x + b = mu for a bound coordinate subset; refuse nontrivial isotropy."""
    if isotropy_dim != 0:
        raise UnsupportedIsotropyError(
            "level sets with nontrivial isotropy orbits are out of scope"
        )
    mu = np.asarray(mu, dtype=float)
    dim, k = J.dim, J.k
    if mu.shape != (k,):
        raise DimensionMismatchError("mu has wrong length")
    if not J.is_regular():
        raise SingularSelectionError("mu is not a regular value: B is rank deficient")
    if free_indices is None:
        bound = _greedy_bound_columns(J.B)
    else:
        free_indices = tuple(int(i) for i in free_indices)
        if len(set(free_indices)) != dim - k:
            raise SingularSelectionError("free coordinate count must be 2n - k")
        bound = sorted(set(range(dim)) - set(free_indices))
    free = [i for i in range(dim) if i not in bound]
    B_bound = J.B[:, bound]
    if abs(np.linalg.det(B_bound)) < 1e-12:
        raise SingularSelectionError(
            "requested free coordinates do not determine the bound ones"
        )
    B_free = J.B[:, free]
    sol = np.linalg.solve(B_bound, mu - J.b)
    coef = -np.linalg.solve(B_bound, B_free)
    P = np.zeros((dim, len(free)))
    x0 = np.zeros(dim)
    for j, i in enumerate(free):
        P[i, j] = 1.0
    for r, i in enumerate(bound):
        P[i, :] = coef[r, :]
        x0[i] = sol[r]
    return LevelSetChart(
        mu=mu,
        free_indices=tuple(free),
        bound_indices=tuple(bound),
        P=P,
        x0=x0,
        coord_names=tuple(coord_names),
    )


def reduced_form(chart: LevelSetChart, omega: np.ndarray) -> np.ndarray:
    """Pullback P.T omega P of the ambient form through the parametrization."""
    omega = np.asarray(omega, dtype=float)
    om = chart.P.T @ omega @ chart.P
    skew = 0.5 * (om - om.T)
    if np.max(np.abs(om - skew)) > 1e-13 * max(1.0, float(np.max(np.abs(om)))):
        raise DegenerateReducedFormError("pullback form is not antisymmetric")
    if abs(np.linalg.det(skew)) < 1e-12:
        raise DegenerateReducedFormError(
            "pullback form is singular: bad chart or isotropic slice"
        )
    return check_symplectic_matrix(skew)


def reduce_hamiltonian(hamiltonian: Expr, chart: LevelSetChart) -> Expr:
    """Substitute the bound coordinates by their affine chart expressions."""
    return fold_constants(substitute(hamiltonian, chart.bound_substitution()))


def reduce_guard_impact(
    guard_level: Expr,
    guard_direction: Expr,
    impact_exprs: list[Expr],
    chart_in: LevelSetChart,
    chart_out: LevelSetChart,
) -> tuple[Expr, Expr, list[Expr]]:
    """Guard and impact in chart coordinates; the reduced impact is the full
    impact conjugated by the charts (projection onto chart_out's free slots)."""
    sub = chart_in.bound_substitution()
    level = fold_constants(substitute(guard_level, sub))
    direction = fold_constants(substitute(guard_direction, sub))
    reduced_impact = [
        fold_constants(substitute(impact_exprs[i], sub)) for i in chart_out.free_indices
    ]
    return level, direction, reduced_impact


@dataclass
class ReducedSystem:
    """Reduced hybrid data at one momentum level."""

    chart: LevelSetChart
    chart_out: LevelSetChart
    omega_mu: np.ndarray
    hamiltonian_expr: Expr
    guard_level_expr: Expr
    guard_direction_expr: Expr
    impact_exprs: list[Expr]
    hamiltonian: ScalarField
    guard: Guard
    impact: ImpactMap
    mu_plus: np.ndarray


def build_reduced_system(model, mu: np.ndarray, rng: np.random.Generator | None = None,
                         n_check_samples: int = 20, free_indices=None) -> ReducedSystem:
    """Assemble chart, pullback form, and reduced expressions for one level.

    ``model`` is a SystemModel; the impact's target level mu_plus is measured
    by lifting sampled guard points and re-checked against the level-set
    containment condition.
    """
    J = model.momentum
    names = tuple(model.coords)
    iso_dim = model.isotropy_dim()
    if iso_dim != 0:
        raise UnsupportedIsotropyError(
            f"isotropy subgroup has dimension {iso_dim}; quotient charts unsupported"
        )
    chart_in = build_chart(J, mu, names, free_indices=free_indices)
    rng = rng if rng is not None else np.random.default_rng(0)
    samples = sample_level_guard_points(J, model.guard, mu, rng, count=n_check_samples)
    images = np.array([J(model.impact(x)) for x in samples])
    mu_plus = images.mean(axis=0)
    if float(np.max(np.abs(images - mu_plus))) > LEVEL_TOL:
        raise LevelMismatchError(
            "impact image is not contained in a single momentum level set"
        )
    if np.max(np.abs(mu_plus - mu)) <= LEVEL_TOL:
        mu_plus = np.asarray(mu, dtype=float)
    chart_out = build_chart(J, mu_plus, names, free_indices=chart_in.free_indices)
    omega_mu = reduced_form(chart_in, model.omega)
    h_mu = reduce_hamiltonian(model.hamiltonian_expr, chart_in)
    level, direction, imp = reduce_guard_impact(
        model.guard_level_expr,
        model.guard_direction_expr,
        model.impact_exprs,
        chart_in,
        chart_out,
    )
    free_names = chart_in.free_names
    mk = lambda e: ScalarField(e, free_names, model.params, model.functions)
    return ReducedSystem(
        chart=chart_in,
        chart_out=chart_out,
        omega_mu=omega_mu,
        hamiltonian_expr=h_mu,
        guard_level_expr=level,
        guard_direction_expr=direction,
        impact_exprs=imp,
        hamiltonian=mk(h_mu),
        guard=Guard(level=mk(level), direction=mk(direction)),
        impact=ImpactMap([mk(e) for e in imp]),
        mu_plus=np.asarray(mu_plus, dtype=float),
    )


def _reduced_dynamics(model, reduced: ReducedSystem, rng: np.random.Generator) -> Dynamics:
    field = HamiltonianField(reduced.hamiltonian, reduced.omega_mu)
    stepper = RK4Stepper(field)

    def do_impact(t, y_pre):
        y_post = apply_impact(reduced.impact, y_pre, reduced.guard)
        if np.max(np.abs(reduced.mu_plus - reduced.chart.mu)) <= LEVEL_TOL:
            return y_post, None  # same level: keep the chart
        nxt = build_reduced_system(
            model, reduced.mu_plus, rng, free_indices=reduced.chart.free_indices
        )
        return y_post, _reduced_dynamics(model, nxt, rng)

    return Dynamics(
        stepper=stepper,
        deriv=field,
        guard=reduced.guard,
        impact=do_impact,
        label=reduced.chart.mu.copy(),
    )


def run_reduced_hybrid(
    model,
    mu: np.ndarray,
    y0: np.ndarray,
    T: float,
    h: float = 1e-3,
    max_impacts: int = 100_000,
    min_gap: float = 1e-9,
    tol_t: float = 1e-10,
    tol_g: float = 1e-9,
    rng: np.random.Generator | None = None,
    free_indices=None,
) -> HybridFlow:
    """Reduced hybrid flow with RK4 on the (generally non-canonical) pullback
    form; the chart is swapped at impacts when the level transitions."""
    rng = rng if rng is not None else np.random.default_rng(0)
    reduced = build_reduced_system(model, mu, rng, free_indices=free_indices)
    dyn = _reduced_dynamics(model, reduced, rng)
    return execute(dyn, y0, 0.0, T, h, max_impacts, min_gap, tol_t, tol_g)


def compare_flows(
    full: HybridFlow,
    reduced: HybridFlow,
    charts: list[LevelSetChart],
    tol_state: float = 1e-6,
    tol_time: float = 1e-8,
) -> dict:
    """Certificate that the projected full flow coincides with the reduced flow.

    Per interval: sup-norm distance between the projected full segment and the
    reduced segment over the interval overlap; per impact: |tau_i - tau~_i|.
    """
    if len(full.segments) != len(reduced.segments) or len(full.impacts) != len(reduced.impacts):
        raise StructureMismatchError(
            f"impact/segment counts differ: full has {len(full.segments)} segments"
            f"/{len(full.impacts)} impacts, reduced {len(reduced.segments)}"
            f"/{len(reduced.impacts)}"
        )
    if len(charts) != len(full.segments):
        raise DimensionMismatchError("need one chart per segment")
    seg_reports = []
    worst = 0.0
    for i, (fs, rs, chart) in enumerate(zip(full.segments, reduced.segments, charts)):
        lo = max(fs.t0, rs.t0)
        hi = min(fs.t1, rs.t1)
        ts = np.unique(np.concatenate([
            fs.times[(fs.times >= lo) & (fs.times <= hi)],
            rs.times[(rs.times >= lo) & (rs.times <= hi)],
            [lo, hi],
        ]))
        sup = 0.0
        for t in ts:
            d = chart.project(fs.interpolate(t)) - rs.interpolate(t)
            sup = max(sup, float(np.max(np.abs(d))))
        worst = max(worst, sup)
        seg_reports.append({
            "index": i,
            "overlap": [float(lo), float(hi)],
            "sup_state_distance": sup,
            "mu": [float(v) for v in chart.mu],
        })
    time_diffs = [
        abs(fi.time - ri.time) for fi, ri in zip(full.impacts, reduced.impacts)
    ]
    passed = worst <= tol_state and all(d <= tol_time for d in time_diffs)
    return {
        "pass": bool(passed),
        "impact_count": len(full.impacts),
        "sup_state_distance": worst,
        "max_impact_time_diff": max(time_diffs) if time_diffs else 0.0,
        "tol_state": tol_state,
        "tol_time": tol_time,
        "segments": seg_reports,
        "impact_time_diffs": time_diffs,
    }
