"""Phase space in Darboux coordinates: Hamiltonian fields and integrators.

States are numpy arrays ordered ``(q1..qn, p1..pn)``.  The symplectic form is
a constant antisymmetric matrix ``omega``; the Hamiltonian vector field is the
unique ``X`` with ``omega.T @ X = grad(H)``, which in the canonical case gives
``X = (dH/dp, -dH/dq)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NotSeparableError
from .expr import ScalarField

__all__ = [
    "canonical_symplectic_matrix",
    "check_symplectic_matrix",
    "coordinate_names",
    "HamiltonianField",
    "LeapfrogStepper",
    "RK4Stepper",
    "TrajectorySegment",
    "symplecticity_defect",
]


def coordinate_names(n: int) -> list[str]:
    return [f"q{i}" for i in range(1, n + 1)] + [f"p{i}" for i in range(1, n + 1)]


def canonical_symplectic_matrix(n: int) -> np.ndarray:
    """Block matrix [[0, I], [-I, 0]] in the (q, p) ordering."""
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return np.block([[zero, eye], [-eye, zero]])


def check_symplectic_matrix(omega: np.ndarray) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 2 or omega.shape[0] != omega.shape[1]:
        raise DimensionMismatchError("symplectic matrix must be square")
    if not np.array_equal(omega, -omega.T):
        raise DimensionMismatchError("symplectic matrix must be antisymmetric")
    if abs(np.linalg.det(omega)) < 1e-300:
        raise DimensionMismatchError("symplectic matrix must be invertible")
    return omega


class HamiltonianField:
    """X_H for a constant symplectic matrix, evaluated via forward-mode gradients."""

    def __init__(self, hamiltonian: ScalarField, omega: np.ndarray):
        omega = check_symplectic_matrix(omega)
        if len(hamiltonian.coords) != omega.shape[0]:
            raise DimensionMismatchError("Hamiltonian arity does not match omega")
        self.hamiltonian = hamiltonian
        self.omega = omega
        self._inv_omega_t = np.linalg.inv(omega.T)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self._inv_omega_t @ self.hamiltonian.gradient(x)


class LeapfrogStepper:
    """Stormer-Verlet for separable H = T(p) + U(q) on the canonical form.

    Half-kick in p, full drift in q, half-kick in p.  Separability is a
    declaration from the system spec; it is what makes the q-gradient
    p-independent (and vice versa), so full-state gradients can be reused.
    """

    def __init__(self, hamiltonian: ScalarField, n: int, separable: bool):
        if not separable:
            raise NotSeparableError("leapfrog requires a separable Hamiltonian")
        if len(hamiltonian.coords) != 2 * n:
            raise DimensionMismatchError("Hamiltonian arity does not match 2n")
        self.hamiltonian = hamiltonian
        self.n = n

    def __call__(self, x: np.ndarray, h: float) -> np.ndarray:
        n = self.n
        y = np.array(x, dtype=float)
        g = self.hamiltonian.gradient(y)
        y[n:] -= 0.5 * h * g[:n]
        g = self.hamiltonian.gradient(y)
        y[:n] += h * g[n:]
        g = self.hamiltonian.gradient(y)
        y[n:] -= 0.5 * h * g[:n]
        return y


class RK4Stepper:
    """Classical 4th-order Runge-Kutta on a Hamiltonian field (any constant omega)."""

    def __init__(self, field: HamiltonianField):
        self.field = field

    def __call__(self, x: np.ndarray, h: float) -> np.ndarray:
        f = self.field
        k1 = f(x)
        k2 = f(x + 0.5 * h * k1)
        k3 = f(x + 0.5 * h * k2)
        k4 = f(x + h * k3)
        return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@dataclass
class TrajectorySegment:
    """Continuous solution piece with cubic-Hermite dense output.

    Stored derivatives are the Hamiltonian field at the stored states, so the
    interpolant is exact at the nodes.
    """

    times: np.ndarray
    states: np.ndarray  # shape (m, dim)
    derivs: np.ndarray  # shape (m, dim)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        self.derivs = np.asarray(self.derivs, dtype=float)
        if not np.all(np.diff(self.times) > 0):
            raise DimensionMismatchError("segment times must be strictly increasing")
        if self.states.shape != (len(self.times), self.states.shape[1]):
            raise DimensionMismatchError("states shape mismatch")
        if self.derivs.shape != self.states.shape:
            raise DimensionMismatchError("derivs shape mismatch")

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    def interpolate(self, t: float) -> np.ndarray:
        """Cubic Hermite value at t (t clipped to the segment span)."""
        times = self.times
        if t <= times[0]:
            return self.states[0].copy()
        if t >= times[-1]:
            return self.states[-1].copy()
        j = int(np.searchsorted(times, t, side="right")) - 1
        return hermite_eval(
            times[j], times[j + 1], self.states[j], self.states[j + 1],
            self.derivs[j], self.derivs[j + 1], t,
        )


def hermite_eval(ta, tb, xa, xb, fa, fb, t):
    """Cubic Hermite interpolation on [ta, tb] with endpoint derivatives."""
    dt = tb - ta
    s = (t - ta) / dt
    s2 = s * s
    s3 = s2 * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    return h00 * xa + (h10 * dt) * fa + h01 * xb + (h11 * dt) * fb


def symplecticity_defect(stepper, omega: np.ndarray, x: np.ndarray, h: float, fd: float) -> float:
    """max-norm of M.T @ omega @ M - omega for the finite-difference Jacobian M
    of one stepper step at x."""
    omega = np.asarray(omega, dtype=float)
    dim = len(x)
    M = np.empty((dim, dim))
    for j in range(dim):
        e = np.zeros(dim)
        e[j] = fd
        M[:, j] = (stepper(x + e, h) - stepper(x - e, h)) / (2.0 * fd)
    return float(np.max(np.abs(M.T @ omega @ M - omega)))
