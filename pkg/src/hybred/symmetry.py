"""Abelian translation actions, momentum maps, cocycles, and hybrid predicates.

The group is G = R^k acting by ``x -> x + A g``; momentum maps are affine,
``J(x) = B x + b``.  The co-adjoint action is trivial in this class, so the
affine action on momentum values is ``mu -> mu + sigma(g)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    EmptyLevelSetError,
    NotConstantError,
    TangencyViolationError,
)
from .expr import ScalarField
from .hybrid import Guard, ImpactMap

__all__ = [
    "TranslationAction",
    "MomentumMap",
    "Cocycle",
    "affine_form",
    "check_symplectic_action",
    "linear_symplectic_defect",
    "check_momentum_map",
    "compute_cocycle",
    "affine_action",
    "isotropy_basis",
    "check_hybrid_action",
    "check_hamiltonian_invariance",
    "sample_level_guard_points",
    "LevelVerdict",
    "classify_hybrid_momentum",
]

SV_THRESHOLD = 1e-10  # relative singular-value cutoff for rank decisions


@dataclass
class TranslationAction:
    """Phi_g(x) = x + A g; the columns of A are the infinitesimal generators."""

    A: np.ndarray

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        if self.A.ndim != 2:
            raise DimensionMismatchError("action matrix must be 2D")

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def k(self) -> int:
        return self.A.shape[1]

    def apply(self, x: np.ndarray, g: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) + self.A @ np.asarray(g, dtype=float)

    def is_free(self) -> bool:
        return np.linalg.matrix_rank(self.A) == self.k


@dataclass
class MomentumMap:
    """Affine-linear momentum map J(x) = B x + b."""

    B: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.B = np.asarray(self.B, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.B.ndim != 2 or self.b.shape != (self.B.shape[0],):
            raise DimensionMismatchError("momentum map needs B (k x 2n) and b (k)")

    @property
    def k(self) -> int:
        return self.B.shape[0]

    @property
    def dim(self) -> int:
        return self.B.shape[1]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.B @ np.asarray(x, dtype=float) + self.b

    def is_regular(self) -> bool:
        """Every value is regular iff B has full row rank (J is affine)."""
        return _rank(self.B) == self.k


@dataclass
class Cocycle:
    """Linear cocycle sigma(g) = C g, with its constancy certificate."""

    C: np.ndarray
    spread: float  # max point-dependence observed during the fit

    def __call__(self, g: np.ndarray) -> np.ndarray:
        return self.C @ np.asarray(g, dtype=float)


def _rank(M: np.ndarray) -> int:
    if M.size == 0:
        return 0
    sv = np.linalg.svd(M, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > SV_THRESHOLD * sv[0]))


def _nullspace(M: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal basis (columns) of ker M; M may have zero rows."""
    if M.size == 0:
        return np.eye(dim)
    u, sv, vt = np.linalg.svd(M)
    tol = SV_THRESHOLD * (sv[0] if sv.size else 0.0)
    r = int(np.sum(sv > tol))
    return vt[r:].T


def affine_form(fieldfun: ScalarField, dim: int) -> tuple[np.ndarray, float]:
    """Extract (w, c0) with f(x) = w.x + c0, certifying linearity at probe points."""
    zero = np.zeros(dim)
    w = fieldfun.gradient(zero)
    c0 = fieldfun.value(zero)
    probe = np.arange(1.0, dim + 1.0) / dim
    w2 = fieldfun.gradient(probe)
    if np.max(np.abs(w2 - w)) > 1e-9 * max(1.0, float(np.max(np.abs(w)))):
        raise DimensionMismatchError("expression is not affine in the coordinates")
    return w, float(c0)


def linear_symplectic_defect(M: np.ndarray, omega: np.ndarray) -> float:
    """max-norm of M.T omega M - omega."""
    return float(np.max(np.abs(M.T @ omega @ M - omega)))


def check_symplectic_action(
    action: TranslationAction,
    omega: np.ndarray,
    samples: list[np.ndarray],
    probes: list[np.ndarray],
) -> float:
    """Translations have identity Jacobian, so the defect is exactly zero; the
    defect functional is evaluated anyway as a guard for other action classes."""
    if not samples or not len(probes):
        raise DimensionMismatchError("need nonempty samples and probes")
    M = np.eye(action.dim)  # Jacobian of x -> x + A g
    return max(linear_symplectic_defect(M, omega) for _ in probes)


def check_momentum_map(
    J: MomentumMap,
    action: TranslationAction,
    omega: np.ndarray,
    samples: list[np.ndarray],
) -> float:
    """Defining identity omega(xi_D, .) = d J_xi, i.e. omega.T A[:,a] = B[a,:].T."""
    if action.dim != J.dim or action.k != J.k:
        raise DimensionMismatchError("action and momentum map dimensions disagree")
    if omega.shape != (J.dim, J.dim):
        raise DimensionMismatchError("omega shape mismatch")
    defect = 0.0
    for a in range(J.k):
        lhs = omega.T @ action.A[:, a]
        for x in samples:  # gradient of J_a is constant; keep the sample loop anyway
            defect = max(defect, float(np.max(np.abs(lhs - J.B[a, :]))))
    return defect


def compute_cocycle(
    J: MomentumMap,
    action: TranslationAction,
    probes: list[np.ndarray],
    samples: list[np.ndarray],
    tol: float = 1e-12,
) -> Cocycle:
    """sigma(g) = J(Phi_g(x)) - J(x), certified x-independent, fitted linearly."""
    probes = [np.asarray(g, dtype=float) for g in probes]
    if len(samples) < 2:
        raise DimensionMismatchError("need at least two sample points")
    G = np.column_stack(probes)  # k x m
    if _rank(G) < J.k:
        raise DimensionMismatchError("probes must span the group")
    values = []
    spread = 0.0
    for g in probes:
        per_sample = np.array([J(action.apply(x, g)) - J(x) for x in samples])
        ref = per_sample[0]
        spread = max(spread, float(np.max(np.abs(per_sample - ref))))
        values.append(per_sample.mean(axis=0))
    if spread > tol:
        raise NotConstantError(
            f"cocycle samples vary by {spread:.3e} > tol={tol:.3e}; "
            "momentum map or action is mis-specified"
        )
    V = np.column_stack(values)  # k x m
    C, *_ = np.linalg.lstsq(G.T, V.T, rcond=None)
    return Cocycle(C=C.T, spread=spread)


def affine_action(mu: np.ndarray, g: np.ndarray, cocycle: Cocycle) -> np.ndarray:
    """mu -> Ad*_{g^-1} mu + sigma(g); the co-adjoint part is trivial here."""
    mu = np.asarray(mu, dtype=float)
    g = np.asarray(g, dtype=float)
    if cocycle.C.shape != (mu.shape[0], g.shape[0]):
        raise DimensionMismatchError("cocycle/group dimensions disagree")
    return mu + cocycle(g)


def isotropy_basis(cocycle: Cocycle, mu: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of {g : affine_action(mu, g) = mu} = ker C.

    mu-independent in this class, matching the coincidence of isotropy
    subgroups across impact levels.
    """
    k = cocycle.C.shape[1]
    return _nullspace(cocycle.C, k)


def check_hybrid_action(
    action: TranslationAction,
    guard: Guard,
    impact: ImpactMap,
    samples_on_guard: list[np.ndarray],
    probes: list[np.ndarray],
    tol_g: float = 1e-9,
) -> float:
    """Equivariance defect max |Delta(Phi_g x) - Phi_g(Delta x)| over guard samples."""
    defect = 0.0
    for x in samples_on_guard:
        for g in probes:
            xg = action.apply(x, g)
            if abs(guard.level.value(xg)) > tol_g:
                raise TangencyViolationError(
                    "action does not map the guard surface into itself"
                )
            lhs = impact(xg)
            rhs = action.apply(impact(x), g)
            defect = max(defect, float(np.max(np.abs(lhs - rhs))))
    return defect


def check_hamiltonian_invariance(
    hamiltonian: ScalarField,
    action: TranslationAction,
    samples: list[np.ndarray],
    probes: list[np.ndarray],
) -> float:
    """max |H(Phi_g(x)) - H(x)|."""
    defect = 0.0
    for x in samples:
        h0 = hamiltonian.value(x)
        for g in probes:
            defect = max(defect, abs(hamiltonian.value(action.apply(x, g)) - h0))
    return defect


def sample_level_guard_points(
    J: MomentumMap,
    guard: Guard,
    mu: np.ndarray,
    rng: np.random.Generator,
    count: int = 50,
    scale: float = 1.0,
    max_tries: int = 40,
) -> list[np.ndarray]:
    """Admissible points of S intersect J^{-1}(mu): solve the affine system
    {J(x) = mu, g(x) = 0} and keep offsets in its nullspace with d < 0."""
    dim = J.dim
    w, c0 = affine_form(guard.level, dim)
    M = np.vstack([J.B, w])
    rhs = np.concatenate([np.asarray(mu, dtype=float) - J.b, [-c0]])
    x_part, residuals, rank, _ = np.linalg.lstsq(M, rhs, rcond=None)
    if np.max(np.abs(M @ x_part - rhs)) > 1e-8:
        raise EmptyLevelSetError("level set does not meet the guard surface")
    N = _nullspace(M, dim)
    points: list[np.ndarray] = []
    for _ in range(max_tries):
        if N.shape[1] == 0:
            candidates = [x_part]
        else:
            offsets = rng.normal(scale=scale, size=(count, N.shape[1]))
            candidates = [x_part + N @ o for o in offsets]
        for x in candidates:
            if guard.direction.value(x) < 0.0:
                points.append(x)
                if len(points) >= count:
                    return points
        if N.shape[1] == 0:
            break
    if not points:
        raise EmptyLevelSetError(
            "no admissible (d < 0) guard points found on the requested level"
        )
    return points


@dataclass
class LevelVerdict:
    mu: np.ndarray
    kind: str  # "hybrid" | "generalized" | "fails"
    mu_plus: np.ndarray | None
    spread: float
    regular: bool
    hybrid_regular: bool
    n_samples: int


def classify_hybrid_momentum(
    J: MomentumMap,
    guard: Guard,
    impact: ImpactMap,
    mu_list: list[np.ndarray],
    rng: np.random.Generator,
    count: int = 50,
    tol: float = 1e-9,
) -> list[LevelVerdict]:
    """Per-level verdict on Delta(J|_S^{-1}(mu)) subset J^{-1}(mu_plus)."""
    w, _ = affine_form(guard.level, J.dim)
    tangent = _nullspace(w[np.newaxis, :], J.dim)
    regular = J.is_regular()
    hybrid_regular = regular and _rank(J.B @ tangent) == J.k
    verdicts = []
    for mu in mu_list:
        mu = np.asarray(mu, dtype=float)
        samples = sample_level_guard_points(J, guard, mu, rng, count=count)
        images = np.array([J(impact(x)) for x in samples])
        mu_plus = images.mean(axis=0)
        spread = float(np.max(np.abs(images - mu_plus))) if len(images) else 0.0
        if spread > tol:
            kind, mu_out = "fails", None
        elif np.max(np.abs(mu_plus - mu)) <= tol:
            kind, mu_out = "hybrid", mu
        else:
            kind, mu_out = "generalized", mu_plus
        verdicts.append(
            LevelVerdict(
                mu=mu,
                kind=kind,
                mu_plus=mu_out,
                spread=spread,
                regular=regular,
                hybrid_regular=hybrid_regular,
                n_samples=len(samples),
            )
        )
    return verdicts
