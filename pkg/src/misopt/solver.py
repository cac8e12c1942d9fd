"""Riemannian conjugate gradient over the phase/schedule product manifold.

The solver maximizes the softmin surrogate of the worst-case user SNR for a
fixed smoothing parameter (inner loop), then halves the parameter and
repeats until the surrogate gap is negligible (outer loop).  Directions use
the Polak-Ribiere rule with a nonnegativity clamp and an ascent-reset
safeguard; a single backtracking line search produces one shared step size
for all three factors.  The relaxed schedule is thresholded to one pattern
per user at the end, and the report carries the true (non-surrogate)
worst-case SNR.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .channel import Scenario
from .geometry import MisGeometry
from .manifolds import (
    RetractionError,
    TangentTriple,
    grad_norm,
    project_to_tangent,
    retract_circle,
    retract_multinomial,
    transport,
)
from .objective import EvalContext, Evaluation, ProductPoint, evaluate

__all__ = [
    "SolverConfig",
    "SolveReport",
    "LineSearchResult",
    "InnerResult",
    "pr_beta",
    "conjugate_direction",
    "line_search",
    "inner_solve",
    "solve",
    "threshold_schedule",
    "random_point",
    "uniform_schedule",
]


@dataclass(frozen=True)
class SolverConfig:
    """Tunable parameters of the annealed conjugate-gradient solver.

    ``mu_init=None`` scales the first smoothing parameter from the spread of
    the initial per-user SNRs; ``mu_min=None`` stops the anneal at 1e-6 of
    that starting value.  The anneal also stops once ``mu * log(K)`` drops
    below ``mu_gap_rtol`` times the current worst-case SNR, since that gap
    bounds the surrogate error.
    """

    mu_init: float | None = None
    delta: float = 2.0
    mu_min: float | None = None
    mu_gap_rtol: float = 1e-4
    inner_grad_tol: float = 1e-6
    max_inner_iters: int = 250
    max_outer_iters: int = 40
    armijo_c1: float = 1e-4
    backtrack_factor: float = 0.5
    initial_step: float = 1.0
    max_backtracks: int = 50
    pr_plus: bool = True
    restart_period: int | None = None
    rng_seed: int = 0
    num_restarts: int = 1

    def __post_init__(self):
        if self.mu_init is not None and not self.mu_init > 0:
            raise ValueError("mu_init must be positive")
        if not self.delta > 1:
            raise ValueError("delta must exceed 1")
        if self.mu_min is not None and not self.mu_min > 0:
            raise ValueError("mu_min must be positive")
        if not 0 < self.armijo_c1 < 1:
            raise ValueError("armijo_c1 must lie in (0, 1)")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if not self.inner_grad_tol > 0:
            raise ValueError("inner_grad_tol must be positive")
        if self.max_inner_iters < 1 or self.max_outer_iters < 1:
            raise ValueError("iteration limits must be >= 1")
        if self.restart_period is not None and self.restart_period < 1:
            raise ValueError("restart_period must be >= 1 when set")
        if self.num_restarts < 1:
            raise ValueError("num_restarts must be >= 1")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be nonnegative")


@dataclass
class SolveReport:
    """Solution plus solve-time diagnostics for one scenario."""

    ms1_phase: np.ndarray
    ms2_phase: np.ndarray
    schedule: np.ndarray
    per_user_snr: np.ndarray
    worst_snr: float
    worst_snr_db: float
    chosen_pattern: np.ndarray
    objective_trace: list = field(default_factory=list)
    grad_norm_trace: list = field(default_factory=list)
    mu_schedule: list = field(default_factory=list)
    num_evals: int = 0
    wall_time: float = 0.0
    origin: str = ""


@dataclass(frozen=True)
class LineSearchResult:
    step: float
    point: ProductPoint
    value: float
    stalled: bool
    num_evals: int


@dataclass(frozen=True)
class InnerResult:
    point: ProductPoint
    evaluation: Evaluation
    objective_trace: np.ndarray
    grad_norm_trace: np.ndarray
    num_iters: int
    num_evals: int
    stalled: bool


def _rinner(a: np.ndarray, b: np.ndarray) -> float:
    """Real inner product: Re of the Hermitian product for complex blocks,
    the Frobenius product for real blocks."""
    return float(np.real(np.vdot(a, b)))


def pr_beta(
    g_new: np.ndarray,
    g_old: np.ndarray,
    g_old_transported: np.ndarray | None = None,
    clamp: bool = True,
) -> float:
    """Polak-Ribiere coefficient for one factor.

    ``g_old_transported`` is the previous gradient carried to the current
    tangent space for the numerator pairing; the denominator uses the
    previous gradient at its own base point.  With ``clamp`` the coefficient
    is floored at zero, which restarts to steepest descent.
    """
    denom = _rinner(g_old, g_old)
    if denom < 1e-30:
        return 0.0
    paired = g_old if g_old_transported is None else g_old_transported
    beta = (_rinner(g_new, g_new) - _rinner(g_new, paired)) / denom
    if clamp:
        beta = max(beta, 0.0)
    return beta


def conjugate_direction(
    g: np.ndarray, prev_dir_transported: np.ndarray | None, beta: float
) -> np.ndarray:
    """Conjugate update ``-g + beta * prev`` for the objective being minimized.

    Falls back to steepest descent when there is no predecessor or when the
    combination fails the descent test against ``-g``.
    """
    if prev_dir_transported is None or beta == 0.0:
        return -g
    direction = -g + beta * prev_dir_transported
    if _rinner(direction, -g) <= 0.0:
        return -g
    return direction


def _retract_point(
    point: ProductPoint, direction: TangentTriple, step: float
) -> ProductPoint:
    return ProductPoint(
        ms1_phase=retract_circle(point.ms1_phase, direction.d_ms1_phase, step),
        ms2_phase=retract_circle(point.ms2_phase, direction.d_ms2_phase, step),
        schedule=retract_multinomial(point.schedule, direction.d_schedule, step),
    )


def line_search(
    point: ProductPoint,
    direction: TangentTriple,
    objective,
    config: SolverConfig,
    slope: float,
    value: float | None = None,
) -> LineSearchResult:
    """Backtracking Armijo search along an ascent direction.

    Tests ``step = initial_step * backtrack_factor**j`` and accepts the first
    step whose retracted objective clears ``value + c1 * step * slope``;
    ``slope`` is the inner product of the Riemannian gradient with the
    direction.  A retraction failure just backtracks further.  After
    ``max_backtracks`` rejections the result carries a zero step and the
    stalled flag.
    """
    if value is None:
        value = objective(point)
    evals = 0
    step = config.initial_step
    for _ in range(config.max_backtracks + 1):
        try:
            candidate = _retract_point(point, direction, step)
        except RetractionError:
            step *= config.backtrack_factor
            continue
        cand_value = objective(candidate)
        evals += 1
        if cand_value >= value + config.armijo_c1 * step * slope:
            return LineSearchResult(step, candidate, cand_value, False, evals)
        step *= config.backtrack_factor
    return LineSearchResult(0.0, point, value, True, evals)


def inner_solve(
    point: ProductPoint, mu: float, config: SolverConfig, ctx: EvalContext
) -> InnerResult:
    """Run conjugate-gradient ascent at fixed ``mu`` until the Riemannian
    gradient norm falls below tolerance, the iteration cap is hit, or the
    line search stalls twice in a row."""
    ev = evaluate(point, mu, ctx, want_grad=True)
    rgrad = project_to_tangent(point, ev.grads)
    num_evals = 1
    prev_rgrad: TangentTriple | None = None
    prev_dir: TangentTriple | None = None
    prev_step: float | None = None
    stalls = 0
    tiny_steps = 0
    stalled_out = False
    obj_trace = [ev.value]
    gnorm_trace = []
    iters = 0

    def surrogate(p: ProductPoint) -> float:
        return evaluate(p, mu, ctx).value

    for iteration in range(config.max_inner_iters):
        gnorm = grad_norm(rgrad)
        gnorm_trace.append(gnorm)
        if gnorm < config.inner_grad_tol:
            break
        force_restart = (
            config.restart_period is not None
            and iteration > 0
            and iteration % config.restart_period == 0
        )
        if prev_rgrad is None or force_restart:
            direction = TangentTriple(
                rgrad.d_ms1_phase, rgrad.d_ms2_phase, rgrad.d_schedule
            )
        else:
            blocks = []
            for kind, attr in (
                ("circle", "d_ms1_phase"),
                ("circle", "d_ms2_phase"),
                ("multinomial", "d_schedule"),
            ):
                base = getattr(point, _BASE_OF[attr])
                g_new = getattr(rgrad, attr)
                g_old = getattr(prev_rgrad, attr)
                carried_g = transport(kind, base, g_old)
                carried_dir = transport(kind, base, getattr(prev_dir, attr))
                beta = pr_beta(g_new, g_old, carried_g, clamp=config.pr_plus)
                # conjugate_direction works on the minimized objective, so
                # feed it the negated ascent gradient.
                blocks.append(conjugate_direction(-g_new, carried_dir, beta))
            direction = TangentTriple(*blocks)
        slope = (
            _rinner(direction.d_ms1_phase, rgrad.d_ms1_phase)
            + _rinner(direction.d_ms2_phase, rgrad.d_ms2_phase)
            + _rinner(direction.d_schedule, rgrad.d_schedule)
        )
        if slope <= 0.0:
            direction = TangentTriple(
                rgrad.d_ms1_phase, rgrad.d_ms2_phase, rgrad.d_schedule
            )
            slope = gnorm * gnorm
        # Warm-start the backtracking near the previously accepted step (one
        # growth allowed, never above the configured cap).
        if prev_step is None:
            ls_config = config
        else:
            start = min(
                config.initial_step, max(prev_step / config.backtrack_factor, 1e-12)
            )
            ls_config = replace(config, initial_step=start)
        result = line_search(point, direction, surrogate, ls_config, slope, ev.value)
        num_evals += result.num_evals
        iters += 1
        if result.stalled:
            stalls += 1
            prev_rgrad = None
            prev_dir = None
            prev_step = None
            if stalls >= 2:
                stalled_out = True
                break
            continue
        stalls = 0
        improvement = result.value - ev.value
        point = result.point
        prev_rgrad = rgrad
        prev_dir = direction
        prev_step = result.step
        ev = evaluate(point, mu, ctx, want_grad=True)
        num_evals += 1
        rgrad = project_to_tangent(point, ev.grads)
        obj_trace.append(result.value)
        # Accepted steps that no longer move the objective mean the loop has
        # converged to line-search resolution.
        if improvement < 1e-12 * max(1.0, abs(result.value)):
            tiny_steps += 1
            if tiny_steps >= 3:
                break
        else:
            tiny_steps = 0

    return InnerResult(
        point=point,
        evaluation=ev,
        objective_trace=np.array(obj_trace),
        grad_norm_trace=np.array(gnorm_trace),
        num_iters=iters,
        num_evals=num_evals,
        stalled=stalled_out,
    )


_BASE_OF = {
    "d_ms1_phase": "ms1_phase",
    "d_ms2_phase": "ms2_phase",
    "d_schedule": "schedule",
}


def threshold_schedule(schedule: np.ndarray) -> np.ndarray:
    """Round each row to one-hot at its largest entry (ties go to the smallest index)."""
    schedule = np.asarray(schedule)
    out = np.zeros(schedule.shape, dtype=np.int8)
    out[np.arange(schedule.shape[0]), np.argmax(schedule, axis=1)] = 1
    return out


def uniform_schedule(num_users: int, num_patterns: int) -> np.ndarray:
    return np.full((num_users, num_patterns), 1.0 / num_patterns)


def random_point(ctx: EvalContext, rng: np.random.Generator) -> ProductPoint:
    """Uniform random phases on the circles; uniform interior schedule."""
    return ProductPoint(
        ms1_phase=np.exp(2j * np.pi * rng.random(ctx.num_ms1)),
        ms2_phase=np.exp(2j * np.pi * rng.random(ctx.num_ms2)),
        schedule=uniform_schedule(ctx.num_users, ctx.num_patterns),
    )


def _report_at(point: ProductPoint, ctx: EvalContext, origin: str) -> SolveReport:
    """Threshold the schedule and report the true worst-case SNR at a point."""
    gamma = ctx.pattern_snr_table(point.ms1_phase, point.ms2_phase)
    binary = threshold_schedule(point.schedule)
    chosen0 = np.argmax(point.schedule, axis=1)
    per_user = gamma[np.arange(ctx.num_users), chosen0]
    worst = float(per_user.min())
    worst_db = 10.0 * math.log10(worst) if worst > 0 else float("-inf")
    return SolveReport(
        ms1_phase=point.ms1_phase,
        ms2_phase=point.ms2_phase,
        schedule=binary,
        per_user_snr=per_user,
        worst_snr=worst,
        worst_snr_db=worst_db,
        chosen_pattern=chosen0.astype(int) + 1,
        origin=origin,
    )


def _anneal_from(
    start: ProductPoint, ctx: EvalContext, config: SolverConfig, origin: str
) -> SolveReport:
    """Full anneal: inner conjugate-gradient solves over a shrinking mu."""
    t0 = time.perf_counter()
    point = start
    snr0 = np.einsum(
        "ku,ku->k",
        point.schedule,
        ctx.pattern_snr_table(point.ms1_phase, point.ms2_phase),
    )
    if config.mu_init is not None:
        mu = config.mu_init
    else:
        spread = float(snr0.max() - snr0.min())
        mu = spread + max(1e-3 * float(np.abs(snr0).mean()), 1e-8)
    mu_min = config.mu_min if config.mu_min is not None else 1e-6 * mu
    log_k = math.log(ctx.num_users)

    obj_trace: list[np.ndarray] = []
    gnorm_trace: list[np.ndarray] = []
    mu_schedule: list[float] = []
    num_evals = 0
    for _ in range(config.max_outer_iters):
        inner = inner_solve(point, mu, config, ctx)
        point = inner.point
        obj_trace.append(inner.objective_trace)
        gnorm_trace.append(inner.grad_norm_trace)
        mu_schedule.append(mu)
        num_evals += inner.num_evals
        current_min = float(inner.evaluation.user_snrs.min())
        if mu <= mu_min:
            break
        if mu * log_k < config.mu_gap_rtol * max(current_min, 1e-30):
            break
        mu /= config.delta

    report = _report_at(point, ctx, origin)
    report.objective_trace = obj_trace
    report.grad_norm_trace = gnorm_trace
    report.mu_schedule = mu_schedule
    report.num_evals = num_evals
    report.wall_time = time.perf_counter() - t0
    return report


def _better(candidate: SolveReport, incumbent: SolveReport | None) -> bool:
    return incumbent is None or candidate.worst_snr > incumbent.worst_snr


def solve(
    scenario: Scenario,
    config: SolverConfig | None = None,
    geom: MisGeometry | None = None,
    warm_starts: tuple = (),
) -> SolveReport:
    """Solve one scenario and return the best report across restarts.

    Random restarts draw independent seeded phases with the schedule started
    at the uniform interior point.  Each entry of ``warm_starts`` is a
    feasible :class:`ProductPoint` that competes twice: once evaluated as-is
    (thresholded, no optimization) and once as the start of a full anneal.
    Ties keep the earliest candidate, so results are seed-deterministic.
    """
    if config is None:
        config = SolverConfig()
    if geom is not None and geom != scenario.geom:
        raise ValueError("geom disagrees with scenario.geom")
    ctx = EvalContext.from_scenario(scenario)

    best: SolveReport | None = None
    for restart in range(config.num_restarts):
        rng = np.random.default_rng([config.rng_seed, restart])
        report = _anneal_from(
            random_point(ctx, rng), ctx, config, origin=f"restart-{restart}"
        )
        if _better(report, best):
            best = report
    for idx, start in enumerate(warm_starts):
        direct = _report_at(start, ctx, origin=f"warm-{idx}-direct")
        if _better(direct, best):
            best = direct
        report = _anneal_from(start, ctx, config, origin=f"warm-{idx}-annealed")
        if _better(report, best):
            best = report
    return best
