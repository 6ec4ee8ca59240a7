"""Guard detection, impact application, and hybrid flow execution."""

import numpy as np
import pytest

from hybred.errors import ReCrossingError, ValidationError, ZenoSuspectedError
from hybred.expr import FunctionDef, ScalarField, parse_expression
from hybred.hybrid import (
    Guard,
    HybridSystemDef,
    ImpactMap,
    apply_impact,
    locate_event,
    run_hybrid,
)
from hybred.phase import (
    HamiltonianField,
    RK4Stepper,
    TrajectorySegment,
    canonical_symplectic_matrix,
    coordinate_names,
)

COORDS4 = tuple(coordinate_names(2))
V_DEF = FunctionDef("V", "x", parse_expression("x^2/2", ["x"]))


def field4(src, params=None):
    expr = parse_expression(src, COORDS4, tuple((params or {}).keys()), ["V"])
    return ScalarField(expr, COORDS4, params, functions={"V": V_DEF})


def pair_system(e=1.0, c=0.0):
    """Two particles on a line colliding when q1 - q2 = c, restitution e."""
    params = {"e": e, "c": c}
    ham = field4("(p1 - p2)^2/2 + V(q1 - q2)", params)
    guard = Guard(
        level=field4("q1 - q2 - c", params),
        direction=field4("p1 - p2", params),
    )
    impact = ImpactMap([
        field4("q1", params),
        field4("q2", params),
        field4("p1 - (1 + e)/2*(p1 - p2)", params),
        field4("p2 + (1 + e)/2*(p1 - p2)", params),
    ])
    return HybridSystemDef(
        n=2, hamiltonian=ham, omega=canonical_symplectic_matrix(2),
        separable=True, guard=guard, impact=impact,
    )


# ---------------------------------------------------------------------------
# Impact map


def test_elastic_impact_swaps_relative_momentum():
    system = pair_system(e=1.0)
    x = np.array([0.0, 0.0, -1.0, 1.0])
    y = apply_impact(system.impact, x, system.guard)
    assert np.allclose(y, [0.0, 0.0, 1.0, -1.0], atol=1e-15)


def test_plastic_impact_equalizes_momenta():
    system = pair_system(e=0.0)
    x = np.array([0.0, 0.0, -1.0, 1.0])
    y = apply_impact(system.impact, x, system.guard)
    assert np.allclose(y, [0.0, 0.0, 0.0, 0.0], atol=1e-15)


def test_partial_restitution_values():
    e = 0.5
    system = pair_system(e=e)
    x = np.array([0.0, 0.0, -1.0, 1.0])
    y = apply_impact(system.impact, x, system.guard)
    assert np.allclose(y, [0.0, 0.0, e, -e], atol=1e-15)


def test_impact_preserves_total_momentum_and_energy_identity():
    system = pair_system(e=0.7)
    rng = np.random.default_rng(5)
    e = 0.7
    for _ in range(50):
        q = rng.uniform(-1, 1)
        rel = -abs(rng.uniform(0.1, 2.0))  # admissible: p1 - p2 < 0
        p2 = rng.uniform(-1, 1)
        x = np.array([q, q, p2 + rel, p2])
        y = system.impact(x)
        assert y[2] + y[3] == pytest.approx(x[2] + x[3], abs=1e-12)
        dh = system.hamiltonian.value(y) - system.hamiltonian.value(x)
        expected = (e**2 - 1.0) * (x[2] - x[3]) ** 2 / 2.0
        assert dh == pytest.approx(expected, abs=1e-12)


def test_recrossing_post_state_rejected():
    # identity "impact" leaves d < 0, which would re-trigger immediately
    identity = ImpactMap([field4(name) for name in COORDS4])
    guard = pair_system().guard
    with pytest.raises(ReCrossingError):
        apply_impact(identity, np.array([0.0, 0.0, -1.0, 1.0]), guard)


# ---------------------------------------------------------------------------
# Event location on stored segments


def linear_segment(x0, v, t1, m=11):
    times = np.linspace(0.0, t1, m)
    states = np.array([x0 + t * v for t in times])
    derivs = np.tile(v, (m, 1))
    return TrajectorySegment(times, states, derivs)


def test_locate_event_linear_crossing():
    guard = pair_system().guard
    # q1 - q2 = 1 - 2t crosses zero at t = 0.5 with p1 - p2 = -2 < 0
    seg = linear_segment(np.array([1.0, 0.0, -1.0, 1.0]), np.array([-1.0, 1.0, 0.0, 0.0]), 1.0)
    hit = locate_event(seg, guard)
    assert hit is not None
    t_star, x_star = hit
    assert t_star == pytest.approx(0.5, abs=1e-9)
    assert x_star[0] - x_star[1] == pytest.approx(0.0, abs=1e-9)


def test_locate_event_none_without_crossing():
    guard = pair_system().guard
    seg = linear_segment(np.array([1.0, 0.0, 1.0, -1.0]), np.array([1.0, -1.0, 0.0, 0.0]), 1.0)
    assert locate_event(seg, guard) is None


def test_locate_event_filters_inadmissible_direction():
    guard = pair_system().guard
    # level crosses zero but p1 - p2 = +2 > 0 there: separating, not impacting
    seg = linear_segment(np.array([1.0, 0.0, 1.0, -1.0]), np.array([-1.0, 1.0, 0.0, 0.0]), 1.0)
    assert locate_event(seg, guard) is None


def test_locate_event_returns_earliest_crossing():
    guard = pair_system().guard
    # oscillating level: first admissible crossing must win
    times = np.linspace(0.0, 2.0, 41)
    states = []
    derivs = []
    for t in times:
        gap = np.cos(np.pi * t)  # zeros at t = 0.5, 1.5
        dgap = -np.pi * np.sin(np.pi * t)
        states.append([gap, 0.0, dgap, 0.0])
        derivs.append([dgap, 0.0, -np.pi**2 * gap, 0.0])
    seg = TrajectorySegment(times, np.array(states), np.array(derivs))
    t_star, _ = locate_event(seg, guard)
    assert t_star == pytest.approx(0.5, abs=1e-6)


# ---------------------------------------------------------------------------
# Full hybrid runs


def test_run_hybrid_free_flight_has_single_segment():
    system = pair_system()
    flow = run_hybrid(system, np.array([1.0, 0.0, 1.0, -1.0]), T=1.0, h=1e-2)
    assert len(flow.segments) == 1
    assert flow.impacts == []
    assert flow.intervals[0] == (0.0, 1.0)


def test_run_hybrid_single_elastic_bounce():
    system = pair_system()
    x0 = np.array([1.0, 0.0, -1.0, 1.0])
    flow = run_hybrid(system, x0, T=0.4, h=1e-3)
    assert len(flow.impacts) == 1
    rec = flow.impacts[0]
    # relative coordinate r = q1 - q2 obeys r'' = -4r with r(0)=1, r'(0)=-4,
    # so r(t) = cos(2t) - 2 sin(2t) first vanishes at t = atan(1/2)/2
    t_exact = np.arctan2(1.0, 2.0) / 2.0
    assert rec.time == pytest.approx(t_exact, abs=1e-6)
    assert rec.pre[0] - rec.pre[1] == pytest.approx(0.0, abs=1e-6)
    # elastic impact flips the relative momentum
    assert rec.post[2] - rec.post[3] == pytest.approx(-(rec.pre[2] - rec.pre[3]), abs=1e-12)


def test_run_hybrid_conserves_energy_at_elastic_impacts():
    system = pair_system(e=1.0)
    x0 = np.array([1.0, 0.0, -1.0, 1.0])
    flow = run_hybrid(system, x0, T=10.0, h=1e-3)
    assert len(flow.impacts) >= 2
    e0 = system.hamiltonian.value(x0)
    for seg in flow.segments:
        for state in seg.states[:: max(1, len(seg.states) // 20)]:
            assert abs(system.hamiltonian.value(state) - e0) < 1e-5


def test_run_hybrid_momentum_conserved_across_everything():
    system = pair_system(e=1.0)
    x0 = np.array([1.0, 0.0, -1.0, 1.0])
    flow = run_hybrid(system, x0, T=5.0, h=1e-3)
    p_tot = x0[2] + x0[3]
    for seg in flow.segments:
        assert np.max(np.abs(seg.states[:, 2] + seg.states[:, 3] - p_tot)) < 1e-10


def test_run_hybrid_segments_chain_through_impacts():
    system = pair_system()
    flow = run_hybrid(system, np.array([1.0, 0.0, -1.0, 1.0]), T=5.0, h=1e-3)
    assert len(flow.segments) == len(flow.impacts) + 1
    for rec, seg_before, seg_after in zip(flow.impacts, flow.segments, flow.segments[1:]):
        assert seg_before.t1 == pytest.approx(rec.time, abs=1e-12)
        assert seg_after.t0 == pytest.approx(rec.time, abs=1e-12)
        assert np.allclose(seg_after.states[0], rec.post)


def test_run_hybrid_deterministic():
    system = pair_system()
    x0 = np.array([1.0, 0.0, -1.0, 1.0])
    a = run_hybrid(system, x0, T=3.0, h=1e-3)
    b = run_hybrid(system, x0, T=3.0, h=1e-3)
    assert len(a.impacts) == len(b.impacts)
    for ra, rb in zip(a.impacts, b.impacts):
        assert ra.time == rb.time
        assert np.array_equal(ra.post, rb.post)
    assert np.array_equal(a.segments[-1].states[-1], b.segments[-1].states[-1])


def test_run_hybrid_state_at_dense_output():
    system = pair_system()
    flow = run_hybrid(system, np.array([1.0, 0.0, 1.0, -1.0]), T=1.0, h=1e-2)
    t = 0.345
    x = flow.state_at(t)
    # closed form: r(t) = cos(2t) + 2 sin(2t), center of mass fixed at 1/2
    r = np.cos(2 * t) + 2 * np.sin(2 * t)
    assert x[0] == pytest.approx(0.5 + r / 2, abs=1e-4)
    assert x[1] == pytest.approx(0.5 - r / 2, abs=1e-4)


def test_run_hybrid_rejects_bad_arguments():
    system = pair_system()
    x0 = np.array([1.0, 0.0, -1.0, 1.0])
    with pytest.raises(ValidationError):
        run_hybrid(system, x0, T=-1.0)
    with pytest.raises(ValidationError):
        run_hybrid(system, x0, T=1.0, h=0.0)
    with pytest.raises(ValidationError):
        run_hybrid(system, x0, T=1.0, method="euler")


def test_run_hybrid_rejects_start_in_forbidden_region():
    system = pair_system()
    with pytest.raises(ValidationError):
        run_hybrid(system, np.array([-1.0, 0.0, -1.0, 1.0]), T=1.0)


def test_zeno_guard_by_max_impacts():
    # plastic impacts with a potential that keeps pushing through the guard
    system = pair_system(e=0.0, c=1.0)
    with pytest.raises(ZenoSuspectedError) as err:
        run_hybrid(system, np.array([2.0, 0.0, 0.0, 0.0]), T=10.0, h=1e-3,
                   max_impacts=50, min_gap=0.0)
    assert err.value.flow is not None
    assert len(err.value.flow.impacts) == 51


def test_zeno_guard_by_min_gap():
    system = pair_system(e=0.0, c=1.0)
    with pytest.raises(ZenoSuspectedError) as err:
        run_hybrid(system, np.array([1.0, 0.0, 0.0, 0.0]), T=10.0, h=1e-3)
    assert "min_gap" in str(err.value)
    assert err.value.flow.impacts  # partial flow is preserved


def test_tangential_touch_is_recorded_not_impacted():
    # free particle with guard level q1^2: the level touches zero at t = 1
    # without ever changing sign, so no impact may fire
    coords = ("q1", "p1")

    def f(src):
        return ScalarField(parse_expression(src, coords), coords)

    ham = f("p1^2/2")
    guard = Guard(level=f("q1^2"), direction=f("p1"))
    impact = ImpactMap([f("q1"), f("-p1")])
    system = HybridSystemDef(
        n=1, hamiltonian=ham, omega=canonical_symplectic_matrix(1),
        separable=True, guard=guard, impact=impact,
    )
    flow = run_hybrid(system, np.array([1.0, -1.0]), T=2.0, h=1e-3)
    assert flow.impacts == []
    assert len(flow.segments) == 1
    assert flow.tangential_events
    assert flow.tangential_events[0].time == pytest.approx(1.0, abs=1e-3)


def test_rk4_method_agrees_with_leapfrog_on_impact_times():
    system = pair_system()
    x0 = np.array([1.0, 0.0, -1.0, 1.0])
    a = run_hybrid(system, x0, T=5.0, h=1e-3, method="leapfrog")
    b = run_hybrid(system, x0, T=5.0, h=1e-3, method="rk4")
    assert len(a.impacts) == len(b.impacts)
    for ra, rb in zip(a.impacts, b.impacts):
        assert ra.time == pytest.approx(rb.time, abs=1e-5)
