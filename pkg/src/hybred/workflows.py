"""High-level operations behind the service endpoints and the CLI.

Each function takes a validated SystemSpec plus overrides and returns plain
dict/list structures that serialize to JSON unchanged.
"""

from __future__ import annotations

import numpy as np

from .errors import ZenoSuspectedError
from .expr import to_source
from .hybrid import HybridFlow, run_hybrid
from .reduction import build_chart, build_reduced_system, compare_flows, run_reduced_hybrid
from .symmetry import (
    _nullspace,
    affine_action,
    affine_form,
    check_hamiltonian_invariance,
    check_hybrid_action,
    check_momentum_map,
    check_symplectic_action,
    classify_hybrid_momentum,
    compute_cocycle,
    isotropy_basis,
)
from .systemspec import SystemSpec

__all__ = ["simulate", "verify", "reduce_level", "compare"]


def _flow_table(flow: HybridFlow, spec: SystemSpec) -> dict:
    """Trajectory table for the full system: t, coords, segment index, J, H.

    Impact rows appear twice (pre and post state at the same t with distinct
    segment indices).
    """
    k = spec.k
    columns = ["t", *spec.coords, "segment_index"] + [f"J_{a + 1}" for a in range(k)] + ["H"]
    ham = spec.hamiltonian
    rows = []
    for i, seg in enumerate(flow.segments):
        for t, x in zip(seg.times, seg.states):
            mom = spec.momentum(x)
            rows.append([float(t), *map(float, x), i, *map(float, mom), float(ham.value(x))])
    return {"columns": columns, "rows": rows}


def _reduced_table(flow: HybridFlow, free_names) -> dict:
    columns = ["t", *free_names, "segment_index"]
    rows = []
    for i, seg in enumerate(flow.segments):
        for t, y in zip(seg.times, seg.states):
            rows.append([float(t), *map(float, y), i])
    return {"columns": columns, "rows": rows}


def simulate(
    spec: SystemSpec,
    x0=None,
    T: float | None = None,
    h: float | None = None,
    method: str | None = None,
) -> dict:
    """Run the full hybrid system; on a Zeno abort the partial flow is returned."""
    x0 = np.asarray(x0 if x0 is not None else spec.initial_condition, dtype=float)
    T = spec.integrator.T if T is None else float(T)
    h = spec.integrator.h if h is None else float(h)
    method = method or spec.method()
    status = "ok"
    message = ""
    try:
        flow = run_hybrid(
            spec.hybrid_system(), x0, T, h=h,
            max_impacts=spec.integrator.max_impacts,
            min_gap=spec.integrator.min_gap,
            tol_t=spec.tolerances.tol_t,
            tol_g=spec.tolerances.tol_g,
            method=method,
        )
    except ZenoSuspectedError as exc:
        status = "zeno"
        message = str(exc)
        flow = exc.flow
    table = _flow_table(flow, spec) if flow is not None else {"columns": [], "rows": []}
    return {
        "status": status,
        "message": message,
        "method": method,
        "trajectory": table,
        "impacts": [
            {"t": float(r.time), "pre": list(map(float, r.pre)), "post": list(map(float, r.post))}
            for r in (flow.impacts if flow is not None else [])
        ],
        "n_segments": len(flow.segments) if flow is not None else 0,
        "tangential_events": [
            {"t": float(r.time), "guard_value": float(r.guard_value)}
            for r in (flow.tangential_events if flow is not None else [])
        ],
    }


def _random_states(rng, dim, count, lo=-2.0, hi=2.0):
    return [rng.uniform(lo, hi, size=dim) for _ in range(count)]


def verify(spec: SystemSpec, seed: int | None = None, n_samples: int = 100) -> dict:
    """Run every symmetry/momentum check and assemble a structured report."""
    seed = spec.seed if seed is None else int(seed)
    rng = np.random.default_rng(seed)
    dim, k = 2 * spec.n, spec.k
    omega = spec.omega
    samples = _random_states(rng, dim, n_samples)
    probes = [np.eye(k)[:, a] for a in range(k)] + _random_states(rng, k, 8, -1.0, 1.0)

    checks = []

    def record(name, value, tol, passed=None, extra=None):
        entry = {
            "name": name,
            "value": value,
            "tolerance": tol,
            "pass": bool(value <= tol) if passed is None else bool(passed),
            "samples": n_samples,
            "seed": seed,
        }
        if extra:
            entry.update(extra)
        checks.append(entry)
        return entry

    record(
        "symplectic_action_defect",
        check_symplectic_action(spec.action, omega, samples, probes),
        1e-12,
    )
    record(
        "momentum_map_defect",
        check_momentum_map(spec.momentum, spec.action, omega, samples),
        1e-14,
    )

    sigma = compute_cocycle(spec.momentum, spec.action, probes, samples, tol=1e-12)
    record("cocycle_constancy_spread", sigma.spread, 1e-12,
           extra={"sigma_matrix": sigma.C.tolist()})

    equiv = 0.0
    for x in samples:
        g = rng.uniform(-1.0, 1.0, size=k)
        lhs = spec.momentum(spec.action.apply(x, g))
        rhs = affine_action(spec.momentum(x), g, sigma)
        equiv = max(equiv, float(np.max(np.abs(lhs - rhs))))
    record("affine_equivariance_defect", equiv, 1e-12)

    # points of S itself (no momentum-level restriction)
    w, c0 = affine_form(spec.guard.level, dim)
    x_part = -c0 * w / float(w @ w)
    null = _nullspace(w[np.newaxis, :], dim)
    guard_samples = [x_part + null @ rng.normal(size=null.shape[1]) for _ in range(25)]
    record(
        "hybrid_action_defect",
        check_hybrid_action(spec.action, spec.guard, spec.impact, guard_samples, probes),
        1e-13,
    )

    record(
        "hamiltonian_invariance_defect",
        check_hamiltonian_invariance(spec.hamiltonian, spec.action, samples, probes),
        1e-12,
    )

    basis = isotropy_basis(sigma, np.zeros(k))
    iso_spread = 0.0
    for _ in range(10):
        other = isotropy_basis(sigma, rng.uniform(-3.0, 3.0, size=k))
        if other.shape != basis.shape:
            iso_spread = float("inf")
        elif basis.size:
            iso_spread = max(iso_spread, float(np.max(np.abs(other - basis))))
    record("isotropy_mu_independence_spread", iso_spread, 1e-15,
           extra={"isotropy_basis": basis.tolist(), "isotropy_dim": basis.shape[1]})

    mu_list = spec.mu_list
    if not mu_list:
        if spec.initial_condition is not None:
            mu_list = [spec.momentum(spec.initial_condition)]
        else:
            mu_list = [np.zeros(k)]
    verdicts = classify_hybrid_momentum(
        spec.momentum, spec.guard, spec.impact, mu_list, rng, count=50, tol=1e-9
    )
    classification = [
        {
            "mu": v.mu.tolist(),
            "kind": v.kind,
            "mu_plus": None if v.mu_plus is None else v.mu_plus.tolist(),
            "spread": v.spread,
            "regular": v.regular,
            "hybrid_regular": v.hybrid_regular,
            "samples": v.n_samples,
        }
        for v in verdicts
    ]
    record(
        "hybrid_momentum_classification",
        max((v.spread for v in verdicts), default=0.0),
        1e-9,
        passed=all(v.kind != "fails" and v.hybrid_regular for v in verdicts),
        extra={"classification": classification},
    )

    return {
        "seed": seed,
        "overall_pass": all(c["pass"] for c in checks),
        "checks": checks,
        "sigma_matrix": sigma.C.tolist(),
        "isotropy_basis": basis.tolist(),
        "classification": classification,
    }


def reduce_level(spec: SystemSpec, mu, seed: int | None = None) -> dict:
    """Reduced-system summary at one momentum level."""
    rng = np.random.default_rng(spec.seed if seed is None else int(seed))
    reduced = build_reduced_system(spec, np.asarray(mu, dtype=float), rng)
    chart = reduced.chart
    return {
        "mu": chart.mu.tolist(),
        "mu_plus": reduced.mu_plus.tolist(),
        "free_coordinates": list(chart.free_names),
        "bound_coordinates": {
            name: to_source(expr) for name, expr in chart.bound_substitution().items()
        },
        "omega_mu": reduced.omega_mu.tolist(),
        "hamiltonian": to_source(reduced.hamiltonian_expr),
        "guard_level": to_source(reduced.guard_level_expr),
        "guard_direction": to_source(reduced.guard_direction_expr),
        "impact": [to_source(e) for e in reduced.impact_exprs],
        "chart_linear_part": chart.P.tolist(),
        "chart_offset": chart.x0.tolist(),
    }


def compare(
    spec: SystemSpec,
    x0=None,
    T: float | None = None,
    h: float | None = None,
    seed: int | None = None,
    tol_state: float | None = None,
    tol_time: float | None = None,
) -> dict:
    """Projected-full vs reduced flow certificate.

    Both sides integrate with RK4 at the same step so the comparison measures
    the reduction, not the difference between integration schemes.
    """
    x0 = np.asarray(x0 if x0 is not None else spec.initial_condition, dtype=float)
    T = spec.integrator.T if T is None else float(T)
    h = spec.integrator.h if h is None else float(h)
    tol_state = spec.tolerances.tol_state if tol_state is None else float(tol_state)
    tol_time = spec.tolerances.tol_time if tol_time is None else float(tol_time)
    rng = np.random.default_rng(spec.seed if seed is None else int(seed))

    mu0 = spec.momentum(x0)
    reduced_sys = build_reduced_system(spec, mu0, rng)
    y0 = reduced_sys.chart.project(x0)

    common = dict(
        h=h,
        max_impacts=spec.integrator.max_impacts,
        min_gap=spec.integrator.min_gap,
        tol_t=spec.tolerances.tol_t,
        tol_g=spec.tolerances.tol_g,
    )
    full = run_hybrid(spec.hybrid_system(), x0, T, method="rk4", **common)
    reduced = run_reduced_hybrid(
        spec, mu0, y0, T, rng=rng, free_indices=reduced_sys.chart.free_indices, **common
    )

    charts = [
        build_chart(spec.momentum, label, tuple(spec.coords),
                    free_indices=reduced_sys.chart.free_indices)
        for label in reduced.labels
    ]
    report = compare_flows(full, reduced, charts, tol_state=tol_state, tol_time=tol_time)
    free_names = reduced_sys.chart.free_names

    projected = {
        "columns": ["t", *free_names, "segment_index"],
        "rows": [
            [float(t), *map(float, charts[i].project(x)), i]
            for i, seg in enumerate(full.segments)
            for t, x in zip(seg.times, seg.states)
        ],
    }
    return {
        "mu0": mu0.tolist(),
        "report": report,
        "chart_sequence": [list(map(float, label)) for label in reduced.labels],
        "full_projected": projected,
        "reduced": _reduced_table(reduced, free_names),
    }
