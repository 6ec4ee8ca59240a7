"""Execution of simple hybrid systems: guard detection, impacts, hybrid flows.

Sign convention: the continuous flow lives in the region ``g > 0`` and an
impact fires when ``g`` reaches 0 with the direction function ``d < 0`` there.
Events are located by bracketing guard values on trajectory nodes and
bisecting the cubic-Hermite interpolant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ReCrossingError, ValidationError, ZenoSuspectedError
from .expr import ScalarField
from .phase import (
    HamiltonianField,
    LeapfrogStepper,
    RK4Stepper,
    TrajectorySegment,
    hermite_eval,
)

__all__ = [
    "Guard",
    "ImpactMap",
    "HybridSystemDef",
    "ImpactRecord",
    "TangentialRecord",
    "HybridFlow",
    "Dynamics",
    "locate_event",
    "apply_impact",
    "run_hybrid",
    "execute",
    "DEFAULT_TOL_T",
    "DEFAULT_TOL_G",
    "DEFAULT_MAX_IMPACTS",
    "DEFAULT_MIN_GAP",
]

DEFAULT_TOL_T = 1e-10
DEFAULT_TOL_G = 1e-9
DEFAULT_MAX_IMPACTS = 100_000
DEFAULT_MIN_GAP = 1e-9
RECROSS_TOL = 1e-12


@dataclass
class Guard:
    """Switching surface S = {level = 0}, admissible when direction < 0."""

    level: ScalarField
    direction: ScalarField


@dataclass
class ImpactMap:
    """Component expressions of the reset map, one per coordinate."""

    components: list[ScalarField]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return np.array([c.value(x) for c in self.components])


@dataclass
class HybridSystemDef:
    """Continuous Hamiltonian data plus guard and impact map."""

    n: int
    hamiltonian: ScalarField
    omega: np.ndarray
    separable: bool
    guard: Guard
    impact: ImpactMap


@dataclass
class ImpactRecord:
    time: float
    pre: np.ndarray
    post: np.ndarray


@dataclass
class TangentialRecord:
    time: float
    guard_value: float


@dataclass
class HybridFlow:
    """The triple (indices, intervals, segments) plus impact bookkeeping."""

    segments: list[TrajectorySegment] = field(default_factory=list)
    impacts: list[ImpactRecord] = field(default_factory=list)
    tangential_events: list[TangentialRecord] = field(default_factory=list)
    labels: list = field(default_factory=list)  # per-segment metadata (e.g. mu)

    @property
    def indices(self) -> range:
        return range(len(self.segments))

    @property
    def intervals(self) -> list[tuple[float, float]]:
        return [(s.t0, s.t1) for s in self.segments]

    def state_at(self, t: float) -> np.ndarray:
        """Dense-output state; at impact times returns the pre-impact side."""
        for seg in self.segments:
            if t <= seg.t1:
                return seg.interpolate(t)
        return self.segments[-1].interpolate(t)


@dataclass
class Dynamics:
    """Callable bundle the executor integrates.

    ``impact`` maps (t, pre-state) to (post-state, replacement Dynamics or
    None); a replacement supports level-set chart swaps in reduced runs.
    """

    stepper: Callable[[np.ndarray, float], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    guard: Guard
    impact: Callable[[float, np.ndarray], tuple[np.ndarray, Optional["Dynamics"]]]
    label: object = None


def apply_impact(
    impact: ImpactMap,
    x: np.ndarray,
    guard: Guard | None = None,
    recross_tol: float = RECROSS_TOL,
) -> np.ndarray:
    """Evaluate the reset map; reject post-states that still move into the guard."""
    y = impact(x)
    if guard is not None and guard.direction.value(y) < -recross_tol:
        raise ReCrossingError(
            "post-impact state still satisfies the admissibility direction d < 0"
        )
    return y


def _bisect(predicate, lo: float, hi: float, tol_t: float, side: str = "hi") -> float:
    """Switch point of a monotone-ish predicate to width tol_t.

    predicate(lo) is False, predicate(hi) is True on entry.  side='lo' returns
    the last time the predicate still failed (used to keep sliding events
    inside the guard tolerance band).
    """
    while hi - lo > tol_t:
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            hi = mid
        else:
            lo = mid
    return lo if side == "lo" else hi


def _check_pair(ta, xa, fa, ga, tb, xb, fb, gb, guard: Guard, tol_t, tol_g):
    """Event test on one node pair. Returns ('event', t, x), ('tangential', t, g),
    or None."""

    def interp(t):
        return hermite_eval(ta, tb, xa, xb, fa, fb, t)

    def gval(t):
        return guard.level.value(interp(t))

    if ga > tol_g and gb < 0.0:
        t_star = _bisect(lambda t: gval(t) <= 0.0, ta, tb, tol_t)
        x_star = interp(t_star)
        if guard.direction.value(x_star) < 0.0:
            return ("event", t_star, x_star)
        return None
    if abs(ga) <= tol_g and gb < -tol_g:
        if guard.direction.value(xa) < 0.0:
            return ("event", ta, np.array(xa, dtype=float))
        t_star = _bisect(lambda t: gval(t) < -tol_g, ta, tb, tol_t, side="lo")
        x_star = interp(t_star)
        if guard.direction.value(x_star) < 0.0:
            return ("event", t_star, x_star)
        return None
    if abs(gb) <= tol_g:
        return ("tangential", tb, gb)
    return None


def locate_event(
    segment: TrajectorySegment,
    guard: Guard,
    tol_t: float = DEFAULT_TOL_T,
    tol_g: float = DEFAULT_TOL_G,
):
    """Earliest admissible guard crossing on a stored segment, or None."""
    times, states, derivs = segment.times, segment.states, segment.derivs
    ga = guard.level.value(states[0])
    for j in range(len(times) - 1):
        gb = guard.level.value(states[j + 1])
        res = _check_pair(
            times[j], states[j], derivs[j], ga,
            times[j + 1], states[j + 1], derivs[j + 1], gb,
            guard, tol_t, tol_g,
        )
        if res is not None and res[0] == "event":
            return res[1], res[2]
        ga = gb
    return None


def execute(
    dynamics: Dynamics,
    x0: np.ndarray,
    t0: float,
    T: float,
    h: float,
    max_impacts: int = DEFAULT_MAX_IMPACTS,
    min_gap: float = DEFAULT_MIN_GAP,
    tol_t: float = DEFAULT_TOL_T,
    tol_g: float = DEFAULT_TOL_G,
) -> HybridFlow:
    """Alternate integrate / locate / impact from t0 until T."""
    if T < t0:
        raise ValidationError("final time must not precede the initial time")
    if h <= 0:
        raise ValidationError("step size must be positive")
    dyn = dynamics
    flow = HybridFlow()
    t = float(t0)
    x = np.array(x0, dtype=float)
    g_here = dyn.guard.level.value(x)
    if g_here < -tol_g:
        raise ValidationError("initial state lies in the forbidden region g < 0")
    n_impacts = 0
    last_impact_t: float | None = None
    t_end_eps = 1e-12 * max(1.0, abs(T))

    while True:
        times = [t]
        states = [x]
        derivs = [dyn.deriv(x)]
        g_here = dyn.guard.level.value(x)
        event = None
        while times[-1] < T - t_end_eps:
            ta, xa, fa = times[-1], states[-1], derivs[-1]
            h_step = min(h, T - ta)
            xb = dyn.stepper(xa, h_step)
            tb = ta + h_step
            fb = dyn.deriv(xb)
            gb = dyn.guard.level.value(xb)
            res = _check_pair(ta, xa, fa, g_here, tb, xb, fb, gb, dyn.guard, tol_t, tol_g)
            if res is not None and res[0] == "tangential":
                flow.tangential_events.append(TangentialRecord(res[1], res[2]))
                res = None
            if res is not None:
                _, t_star, x_star = res
                if t_star > ta:
                    times.append(t_star)
                    states.append(x_star)
                    derivs.append(dyn.deriv(x_star))
                event = (float(times[-1]), states[-1])
                break
            times.append(tb)
            states.append(xb)
            derivs.append(fb)
            g_here = gb

        flow.segments.append(TrajectorySegment(np.array(times), np.array(states), np.array(derivs)))
        flow.labels.append(dyn.label)

        if event is None:
            return flow

        t_star, x_pre = event
        x_post, new_dyn = dyn.impact(t_star, x_pre)
        flow.impacts.append(ImpactRecord(t_star, np.array(x_pre), np.array(x_post)))
        n_impacts += 1
        if n_impacts > max_impacts:
            raise ZenoSuspectedError(
                f"impact count exceeded max_impacts={max_impacts}", flow
            )
        if last_impact_t is not None and t_star - last_impact_t < min_gap:
            raise ZenoSuspectedError(
                f"impacts at {last_impact_t!r} and {t_star!r} closer than min_gap={min_gap}",
                flow,
            )
        last_impact_t = t_star
        t = t_star
        x = np.array(x_post, dtype=float)
        if new_dyn is not None:
            dyn = new_dyn
        if t >= T - t_end_eps:
            # final impact exactly at the horizon: record the post state as a
            # one-point closing segment
            flow.segments.append(
                TrajectorySegment(np.array([t]), np.array([x]), np.array([dyn.deriv(x)]))
            )
            flow.labels.append(dyn.label)
            return flow


def run_hybrid(
    system: HybridSystemDef,
    x0: np.ndarray,
    T: float,
    h: float = 1e-3,
    max_impacts: int = DEFAULT_MAX_IMPACTS,
    min_gap: float = DEFAULT_MIN_GAP,
    tol_t: float = DEFAULT_TOL_T,
    tol_g: float = DEFAULT_TOL_G,
    method: str = "leapfrog",
    t0: float = 0.0,
) -> HybridFlow:
    """Run the full hybrid system; leapfrog needs the separability declaration."""
    ham_field = HamiltonianField(system.hamiltonian, system.omega)
    if method == "leapfrog":
        stepper = LeapfrogStepper(system.hamiltonian, system.n, system.separable)
    elif method == "rk4":
        stepper = RK4Stepper(ham_field)
    else:
        raise ValidationError(f"unknown integration method {method!r}")

    def do_impact(t, x_pre):
        return apply_impact(system.impact, x_pre, system.guard), None

    dyn = Dynamics(stepper=stepper, deriv=ham_field, guard=system.guard, impact=do_impact)
    return execute(dyn, x0, t0, T, h, max_impacts, min_gap, tol_t, tol_g)
