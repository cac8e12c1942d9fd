"""Invariant and oracle suites behind the ``selftest`` and ``oracle-check`` commands.

Each check returns a named pass/fail record with a short detail string.  The
simplex reference projection here enumerates active sets, deliberately
avoiding the sort-and-threshold route used by the production code.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ArrayAngles, CascadedChannel, Scenario, snr, snr_full_path
from .geometry import (
    MisGeometry,
    all_selections,
    all_shift_positions,
    build_selection,
    equivalent_phase,
    pattern_grid,
    shift_from_flat,
)
from .manifolds import (
    project_circle_tangent,
    project_multinomial_tangent,
    project_simplex,
    retract_circle,
    retract_multinomial,
)
from .objective import EvalContext, ProductPoint, evaluate
from .oracle import BruteForceConfig, brute_force_solve, fd_directional
from .solver import SolverConfig, solve

__all__ = [
    "CheckResult",
    "simplex_qp_oracle",
    "random_instance",
    "run_selftest",
    "run_oracle_check",
]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def simplex_qp_oracle(vec: np.ndarray) -> np.ndarray:
    """Nearest simplex point by exhaustive active-set enumeration (small sizes only)."""
    vec = np.asarray(vec, dtype=float)
    n = vec.size
    best = None
    best_dist = math.inf
    for mask in range(1, 2**n):
        free = [i for i in range(n) if (mask >> i) & 1]
        shift = (1.0 - vec[free].sum()) / len(free)
        x = np.zeros(n)
        x[free] = vec[free] + shift
        if x[free].min() < -1e-12:
            continue
        x = np.maximum(x, 0.0)
        dist = float(np.sum((x - vec) ** 2))
        if dist < best_dist:
            best_dist = dist
            best = x
    return best


def random_instance(rng: np.random.Generator, max_m: int = 16, max_n: int = 4):
    """Random small geometry, scenario, context, and feasible point."""
    while True:
        m_rows = int(rng.integers(1, 5))
        m_cols = int(rng.integers(1, 5))
        if m_rows * m_cols <= max_m:
            break
    n_rows = int(rng.integers(1, m_rows + 1))
    n_cols = int(rng.integers(1, m_cols + 1))
    while n_rows * n_cols > max_n:
        if n_rows > 1:
            n_rows -= 1
        else:
            n_cols -= 1
    geom = MisGeometry(m_rows, m_cols, n_rows, n_cols)
    num_users = int(rng.integers(1, 5))
    users = [
        (
            ArrayAngles(
                float(rng.uniform(-math.pi, math.pi)),
                float(rng.uniform(0.0, math.pi / 2)),
            ),
            float(rng.uniform(0.005, 0.05)),
        )
        for _ in range(num_users)
    ]
    arrival = ArrayAngles(
        float(rng.uniform(-math.pi, math.pi)), float(rng.uniform(0.0, math.pi / 2))
    )
    scenario = Scenario(geom=geom, mis_arrival=arrival, users=users)
    ctx = EvalContext.from_scenario(scenario)
    point = ProductPoint(
        ms1_phase=np.exp(2j * np.pi * rng.random(ctx.num_ms1)),
        ms2_phase=np.exp(2j * np.pi * rng.random(ctx.num_ms2)),
        schedule=_random_schedule(rng, ctx.num_users, ctx.num_patterns),
    )
    return geom, scenario, ctx, point


def _random_schedule(rng, num_users, num_patterns):
    raw = rng.random((num_users, num_patterns)) + 0.05
    return raw / raw.sum(axis=1, keepdims=True)


def _random_tangent_like(rng, point):
    from .manifolds import TangentTriple

    return TangentTriple(
        d_ms1_phase=rng.standard_normal(point.ms1_phase.size)
        + 1j * rng.standard_normal(point.ms1_phase.size),
        d_ms2_phase=rng.standard_normal(point.ms2_phase.size)
        + 1j * rng.standard_normal(point.ms2_phase.size),
        d_schedule=rng.standard_normal(point.schedule.shape),
    )


def _check_geometry(seed: int) -> CheckResult:
    worst = 0.0
    grid = [(2, 1, 1, 1), (3, 3, 2, 2), (4, 2, 2, 2), (8, 8, 6, 6), (1, 6, 1, 3)]
    for dims in grid:
        geom = MisGeometry(*dims)
        u_rows, u_cols, total = pattern_grid(geom)
        covered = set()
        for pos in all_shift_positions(geom):
            sel = build_selection(geom, pos)
            dense = sel.dense()
            worst = max(worst, float(np.abs(dense.T @ dense - np.eye(geom.num_ms2)).max()))
            worst = max(
                worst, float(np.abs(dense.sum(axis=1) + sel.padding - 1.0).max())
            )
            covered.update(sel.ms1_index.tolist())
            if shift_from_flat(geom, pos.u) != pos:
                return CheckResult("geometry", False, f"index round-trip broke at {pos}")
        if covered != set(range(geom.num_ms1)):
            return CheckResult("geometry", False, f"placements do not cover {dims}")
        if total != u_rows * u_cols:
            return CheckResult("geometry", False, "pattern count mismatch")
    return CheckResult("geometry", worst < 1e-12, f"max identity residual {worst:.2e}")


def _check_tangent(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        base = np.exp(2j * np.pi * rng.random(8))
        vec = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        tang = project_circle_tangent(base, vec)
        worst = max(worst, float(np.abs(np.real(tang * np.conj(base))).max()))
        again = project_circle_tangent(base, tang)
        worst = max(worst, float(np.abs(again - tang).max()))
        mat = rng.standard_normal((3, 5))
        tmat = project_multinomial_tangent(mat)
        worst = max(worst, float(np.abs(tmat.sum(axis=1)).max()))
    return CheckResult("tangent-projections", worst < 1e-13, f"max residual {worst:.2e}")


def _check_simplex(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        size = int(rng.integers(1, 5))
        vec = rng.standard_normal(size) * rng.uniform(0.5, 3.0)
        ours = project_simplex(vec)
        ref = simplex_qp_oracle(vec)
        worst = max(worst, float(np.abs(ours - ref).max()))
        if abs(ours.sum() - 1.0) > 1e-12 or ours.min() <= 0:
            return CheckResult("simplex-projection", False, "infeasible output")
    return CheckResult("simplex-projection", worst < 1e-10, f"max gap to QP oracle {worst:.2e}")


def _check_retractions(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        base = np.exp(2j * np.pi * rng.random(6))
        tang = project_circle_tangent(
            base, rng.standard_normal(6) + 1j * rng.standard_normal(6)
        )
        out = retract_circle(base, tang, 0.3)
        worst = max(worst, float(np.abs(np.abs(out) - 1.0).max()))
        mat = _random_schedule(rng, 3, 4)
        step = project_multinomial_tangent(rng.standard_normal((3, 4)))
        moved = retract_multinomial(mat, step, 0.7)
        worst = max(worst, float(np.abs(moved.sum(axis=1) - 1.0).max()))
        if moved.min() <= 0:
            return CheckResult("retractions", False, "schedule left the open simplex")
    return CheckResult("retractions", worst < 1e-12, f"max feasibility residual {worst:.2e}")


def _check_sandwich(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(50):
        _, _, ctx, point = random_instance(rng)
        mu = float(rng.uniform(0.01, 2.0))
        ev = evaluate(point, mu, ctx)
        lo = ev.value
        hi = ev.value + mu * math.log(ctx.num_users)
        gmin = float(ev.user_snrs.min())
        scale = max(abs(gmin), 1.0)
        worst = max(worst, (lo - gmin) / scale, (gmin - hi) / scale)
    return CheckResult("softmin-sandwich", worst < 1e-12, f"max violation {worst:.2e}")


def _check_model_equivalence(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(25):
        geom, scenario, ctx, point = random_instance(rng)
        sel = all_selections(geom)[int(rng.integers(0, ctx.num_patterns))]
        equiv = equivalent_phase(point.ms2_phase, sel)
        k = int(rng.integers(0, ctx.num_users))
        chan_val = snr(
            point.ms1_phase,
            equiv,
            CascadedChannel(c=ctx.channels[k], iota=float(ctx.iota[k])),
        )
        bs_angles = ArrayAngles(
            float(rng.uniform(-math.pi, math.pi)), float(rng.uniform(0, math.pi / 2))
        )
        full_val = snr_full_path(point.ms1_phase, equiv, scenario, k, bs_angles)
        scale = max(abs(chan_val), 1e-12)
        worst = max(worst, abs(chan_val - full_val) / scale)
    return CheckResult("model-equivalence", worst < 1e-10, f"max rel gap {worst:.2e}")


def _check_gradients(seed: int, instances: int = 20) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    step = 1e-6
    for _ in range(instances):
        _, _, ctx, point = random_instance(rng)
        snrs = evaluate(point, 1.0, ctx).user_snrs
        mu = float(max(0.2 * snrs.mean(), 1e-3))
        grads = evaluate(point, mu, ctx, want_grad=True).grads
        direction = _random_tangent_like(rng, point)

        def objective(p):
            return evaluate(p, mu, ctx).value

        from .manifolds import TangentTriple

        zero = TangentTriple(
            np.zeros_like(point.ms1_phase),
            np.zeros_like(point.ms2_phase),
            np.zeros_like(point.schedule),
        )
        for block, pred in (
            ("d_ms1_phase", np.real(np.vdot(grads[0], direction.d_ms1_phase))),
            ("d_ms2_phase", np.real(np.vdot(grads[1], direction.d_ms2_phase))),
            ("d_schedule", float(np.sum(grads[2] * direction.d_schedule))),
        ):
            only = TangentTriple(
                **{
                    attr: getattr(direction if attr == block else zero, attr)
                    for attr in ("d_ms1_phase", "d_ms2_phase", "d_schedule")
                }
            )
            measured = fd_directional(objective, point, only, step)
            scale = max(abs(measured), abs(pred), 1e-9)
            worst = max(worst, abs(measured - pred) / scale)
    return CheckResult("gradient-fd", worst < 1e-5, f"max rel error {worst:.2e}")


def _check_oracle_optimality(seed: int) -> CheckResult:
    geom = MisGeometry(2, 1, 1, 1)
    users = [
        (ArrayAngles(-math.pi / 3, math.pi / 4), 0.01),
        (ArrayAngles(math.pi / 3, math.pi / 4), 0.01),
    ]
    scenario = Scenario(geom=geom, mis_arrival=ArrayAngles(0.0, 0.0), users=users)
    reference = brute_force_solve(scenario, cfg=BruteForceConfig(phase_levels=16))
    config = SolverConfig(rng_seed=seed, num_restarts=8)
    report = solve(scenario, config)
    ratio = report.worst_snr / reference.value
    return CheckResult(
        "oracle-optimality", ratio >= 0.95, f"solver/oracle ratio {ratio:.4f}"
    )


def run_selftest(seed: int = 0) -> list[CheckResult]:
    """Fast invariant suite across all modules."""
    return [
        _check_geometry(seed),
        _check_tangent(seed + 1),
        _check_simplex(seed + 2),
        _check_retractions(seed + 3),
        _check_sandwich(seed + 4),
        _check_model_equivalence(seed + 5),
    ]


def run_oracle_check(seed: int = 0) -> list[CheckResult]:
    """Ground-truth suite: finite-difference gradients and brute-force optimality."""
    return [
        _check_gradients(seed + 10),
        _check_oracle_optimality(seed),
    ]
