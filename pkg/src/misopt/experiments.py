"""Scenario builders and sweep drivers for the numerical studies.

Users sit on an azimuth arc at a common elevation and a common SNR scale.
Every sweep normalizes against a single-layer baseline (movable layer grown
to the full fixed layer, one pattern).  Sweeps that keep the fixed layer
unchanged seed each movable-layer cell with the baseline solution embedded
as a feasible point (baseline phases on layer 1, identity phases on layer
2), so a cell can never report worse than the baseline it is normalized by.

Sweep cells are independent solves; with ``jobs > 1`` they run in a process
pool and are gathered by index, so results do not depend on completion
order.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .channel import BROADSIDE, ArrayAngles, Scenario
from .geometry import MisGeometry, build_selection, equivalent_phase, shift_from_flat
from .objective import EvalContext, ProductPoint
from .solver import SolveReport, SolverConfig, solve, uniform_schedule

__all__ = [
    "ArcScenarioSpec",
    "SweepResult",
    "UsersSweepRow",
    "UsersSweep",
    "CaseStudyResult",
    "build_arc_scenario",
    "sms_baseline",
    "sweep_ms2_sizes",
    "allocation_steps",
    "sweep_allocation",
    "sweep_users_1d2d",
    "case_study",
    "write_sweep_csv",
    "write_users_csv",
    "write_case_study_csv",
    "write_solve_csv",
    "write_manifest",
    "results_digest",
]


@dataclass(frozen=True)
class ArcScenarioSpec:
    """Users spread uniformly over an azimuth arc at one elevation and SNR scale."""

    geom: MisGeometry
    num_users: int
    azimuth_lo: float = -math.pi / 3
    azimuth_hi: float = math.pi / 3
    elevation: float = math.pi / 4
    iota: float = 0.01
    mis_arrival: ArrayAngles = BROADSIDE

    def __post_init__(self):
        if self.num_users < 1:
            raise ValueError("num_users must be >= 1")
        if not self.azimuth_lo < self.azimuth_hi:
            raise ValueError("azimuth_lo must be below azimuth_hi")
        if not self.iota > 0:
            raise ValueError("iota must be positive")


@dataclass
class SweepResult:
    """Worst-case SNR of every cell against the shared baseline."""

    kind: str
    row_labels: list
    col_labels: list
    mis_snr: np.ndarray
    baseline_snr: np.ndarray
    gain: np.ndarray
    cell_labels: list
    num_users: int
    seed: int
    reports: dict


@dataclass(frozen=True)
class UsersSweepRow:
    label: str
    num_users: int
    num_patterns: int
    worst_snr: float
    worst_snr_db: float


@dataclass
class UsersSweep:
    rows: list
    seed: int
    reports: list


@dataclass
class CaseStudyResult:
    figure: int
    spec: ArcScenarioSpec
    mis: SolveReport
    sms: SolveReport
    snr_table: np.ndarray
    sms_snr_table: np.ndarray


def build_arc_scenario(spec: ArcScenarioSpec) -> Scenario:
    """Place the users at azimuths uniformly spaced over the arc, endpoints included."""
    azimuths = np.linspace(spec.azimuth_lo, spec.azimuth_hi, spec.num_users)
    users = [
        (ArrayAngles(float(az), spec.elevation), spec.iota) for az in azimuths
    ]
    return Scenario(geom=spec.geom, mis_arrival=spec.mis_arrival, users=users)


def _single_layer_geom(geom: MisGeometry) -> MisGeometry:
    return MisGeometry(
        m_rows=geom.m_rows,
        m_cols=geom.m_cols,
        n_rows=geom.m_rows,
        n_cols=geom.m_cols,
        spacing_over_lambda=geom.spacing_over_lambda,
    )


def sms_baseline(spec: ArcScenarioSpec, config: SolverConfig) -> SolveReport:
    """Solve the single-pattern reduction (movable layer grown to the fixed layer),
    with the same restart budget and seeds as the runs it normalizes."""
    sms_spec = replace(spec, geom=_single_layer_geom(spec.geom))
    return solve(build_arc_scenario(sms_spec), config)


def _embedded_start(
    baseline: SolveReport, sms_geom: MisGeometry, cell_geom: MisGeometry, num_users: int
) -> ProductPoint:
    """Map a single-layer solution into a cell's product manifold.

    The baseline's combined per-element phase goes onto layer 1; layer 2 is
    all ones, so every pattern reproduces the baseline beam exactly.
    """
    sel = build_selection(sms_geom, shift_from_flat(sms_geom, 1))
    combined = equivalent_phase(baseline.ms2_phase, sel) * baseline.ms1_phase
    return ProductPoint(
        ms1_phase=combined,
        ms2_phase=np.ones(cell_geom.num_ms2, dtype=complex),
        schedule=uniform_schedule(num_users, cell_geom.num_patterns),
    )


def _solve_task(args) -> SolveReport:
    spec, config, warm = args
    warm_starts = (warm,) if warm is not None else ()
    return solve(build_arc_scenario(spec), config, warm_starts=warm_starts)


def _run_tasks(tasks: list, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [_solve_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_solve_task, tasks))


def sweep_ms2_sizes(
    m_rows: int,
    m_cols: int,
    user_counts,
    config: SolverConfig,
    jobs: int = 1,
    azimuth_lo: float = -math.pi / 3,
    azimuth_hi: float = math.pi / 3,
    elevation: float = math.pi / 4,
    iota: float = 0.01,
    mis_arrival: ArrayAngles = BROADSIDE,
) -> dict:
    """Grid of movable-layer sizes from 1x1 to the full fixed layer, one
    :class:`SweepResult` per user count, normalized by the full-size cell."""
    results = {}
    for num_users in user_counts:
        full_geom = MisGeometry(m_rows, m_cols, m_rows, m_cols)
        spec = ArcScenarioSpec(
            geom=full_geom,
            num_users=num_users,
            azimuth_lo=azimuth_lo,
            azimuth_hi=azimuth_hi,
            elevation=elevation,
            iota=iota,
            mis_arrival=mis_arrival,
        )
        baseline = sms_baseline(spec, config)
        cells = [
            (nr, nc)
            for nr in range(1, m_rows + 1)
            for nc in range(1, m_cols + 1)
            if (nr, nc) != (m_rows, m_cols)
        ]
        tasks = []
        for nr, nc in cells:
            cell_geom = MisGeometry(m_rows, m_cols, nr, nc)
            warm = _embedded_start(baseline, full_geom, cell_geom, num_users)
            tasks.append((replace(spec, geom=cell_geom), config, warm))
        reports = _run_tasks(tasks, jobs)

        mis = np.zeros((m_rows, m_cols))
        report_map = {}
        for (nr, nc), report in zip(cells, reports):
            mis[nr - 1, nc - 1] = report.worst_snr
            report_map[f"{nr}x{nc}"] = report
        mis[m_rows - 1, m_cols - 1] = baseline.worst_snr
        report_map[f"{m_rows}x{m_cols}"] = baseline
        base = np.full_like(mis, baseline.worst_snr)
        gain = mis / base
        gain[m_rows - 1, m_cols - 1] = 1.0
        results[num_users] = SweepResult(
            kind="ms2-size",
            row_labels=list(range(1, m_rows + 1)),
            col_labels=list(range(1, m_cols + 1)),
            mis_snr=mis,
            baseline_snr=base,
            gain=gain,
            cell_labels=[
                f"ms1={m_rows}x{m_cols}/ms2={nr}x{nc}"
                for nr in range(1, m_rows + 1)
                for nc in range(1, m_cols + 1)
            ],
            num_users=num_users,
            seed=config.rng_seed,
            reports=report_map,
        )
    return results


def allocation_steps(total_elements: int, scheme: int) -> list:
    """Element-allocation ladder at a fixed total element count.

    Step 0 is the single-layer baseline holding every element.  Scheme 1
    keeps the fixed layer's rows and gives the movable layer half of those
    rows as its column count, then moves fixed-layer columns over step by
    step; scheme 2 swaps the roles of rows and columns.  Every step
    preserves the total element count.
    """
    side = math.isqrt(total_elements)
    if side * side != total_elements:
        raise ValueError(f"total_elements {total_elements} is not a perfect square")
    if side % 2 != 0:
        raise ValueError(f"side {side} must be even to halve into the movable layer")
    if scheme not in (1, 2):
        raise ValueError("scheme must be 1 or 2")
    half = side // 2
    steps = [MisGeometry(side, side, side, side)]
    for j in range(1, half + 1):
        if scheme == 1:
            steps.append(MisGeometry(side, side - j, 2 * j, half))
        else:
            steps.append(MisGeometry(side - j, side, half, 2 * j))
    return steps


def sweep_allocation(
    total_elements: int,
    scheme: int,
    num_users: int,
    config: SolverConfig,
    jobs: int = 1,
    azimuth_lo: float = -math.pi / 3,
    azimuth_hi: float = math.pi / 3,
    elevation: float = math.pi / 4,
    iota: float = 0.01,
    mis_arrival: ArrayAngles = BROADSIDE,
) -> SweepResult:
    """Worst-case SNR along the allocation ladder; step 0 is the baseline."""
    steps = allocation_steps(total_elements, scheme)
    specs = [
        ArcScenarioSpec(
            geom=geom,
            num_users=num_users,
            azimuth_lo=azimuth_lo,
            azimuth_hi=azimuth_hi,
            elevation=elevation,
            iota=iota,
            mis_arrival=mis_arrival,
        )
        for geom in steps
    ]
    baseline = sms_baseline(specs[0], config)
    reports = [baseline] + _run_tasks(
        [(spec, config, None) for spec in specs[1:]], jobs
    )
    # Movable-layer element count per step; 0 means the single-layer baseline.
    moved = [0] + [geom.num_ms2 for geom in steps[1:]]
    mis = np.array([rep.worst_snr for rep in reports])
    base = np.full_like(mis, baseline.worst_snr)
    gain = mis / base
    gain[0] = 1.0
    labels = [
        "single-layer"
        if n == 0
        else f"ms1={g.m_rows}x{g.m_cols}/ms2={g.n_rows}x{g.n_cols}"
        for n, g in zip(moved, steps)
    ]
    return SweepResult(
        kind="allocation",
        row_labels=[f"scheme-{scheme}"],
        col_labels=moved,
        mis_snr=mis,
        baseline_snr=base,
        gain=gain,
        cell_labels=labels,
        num_users=num_users,
        seed=config.rng_seed,
        reports={lab: rep for lab, rep in zip(labels, reports)},
    )


def _solve_chain(args) -> list:
    """Solve one geometry over user counts (largest first), warm-starting each
    count from the previous solution's phases."""
    geom, user_counts, config, arc_kwargs = args
    out = {}
    warm_phases = None
    for num_users in sorted(user_counts, reverse=True):
        spec = ArcScenarioSpec(geom=geom, num_users=num_users, **arc_kwargs)
        warm_starts = ()
        if warm_phases is not None:
            warm_starts = (
                ProductPoint(
                    ms1_phase=warm_phases[0],
                    ms2_phase=warm_phases[1],
                    schedule=uniform_schedule(num_users, geom.num_patterns),
                ),
            )
        report = solve(build_arc_scenario(spec), config, warm_starts=warm_starts)
        out[num_users] = report
        warm_phases = (report.ms1_phase, report.ms2_phase)
    return [out[k] for k in user_counts]


def sweep_users_1d2d(
    config: SolverConfig,
    user_counts=(4, 8, 16, 32),
    one_d: MisGeometry = MisGeometry(1, 64, 1, 36),
    two_d: MisGeometry = MisGeometry(8, 8, 6, 6),
    jobs: int = 1,
    azimuth_lo: float = -math.pi / 3,
    azimuth_hi: float = math.pi / 3,
    elevation: float = math.pi / 4,
    iota: float = 0.01,
    mis_arrival: ArrayAngles = BROADSIDE,
) -> UsersSweep:
    """Worst-case SNR versus user count for a 1D and a 2D layout."""
    user_counts = list(user_counts)
    arc_kwargs = dict(
        azimuth_lo=azimuth_lo,
        azimuth_hi=azimuth_hi,
        elevation=elevation,
        iota=iota,
        mis_arrival=mis_arrival,
    )
    tasks = [
        (one_d, user_counts, config, arc_kwargs),
        (two_d, user_counts, config, arc_kwargs),
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, 2)) as pool:
            chains = list(pool.map(_solve_chain, tasks))
    else:
        chains = [_solve_chain(t) for t in tasks]

    rows = []
    reports = []
    for (geom, label), chain in zip(((one_d, "1d"), (two_d, "2d")), chains):
        for num_users, report in zip(user_counts, chain):
            rows.append(
                UsersSweepRow(
                    label=f"{label}:ms1={geom.m_rows}x{geom.m_cols}/"
                    f"ms2={geom.n_rows}x{geom.n_cols}",
                    num_users=num_users,
                    num_patterns=geom.num_patterns,
                    worst_snr=report.worst_snr,
                    worst_snr_db=report.worst_snr_db,
                )
            )
            reports.append(report)
    return UsersSweep(rows=rows, seed=config.rng_seed, reports=reports)


def case_study(
    figure: int,
    config: SolverConfig,
    num_users: int = 4,
    azimuth_lo: float = -math.pi / 3,
    azimuth_hi: float = math.pi / 3,
    elevation: float = math.pi / 4,
    iota: float = 0.01,
) -> CaseStudyResult:
    """Tiny two-layer layouts versus their single-layer counterparts.

    Figure 6 uses a 2x1 fixed layer over a single movable element (two
    patterns); figure 7 a 2x2 fixed layer (four patterns).  Users span the
    azimuth arc uniformly.  Returns the solved reports plus the full
    (user, pattern) SNR tables at both solutions.
    """
    if figure == 6:
        geom = MisGeometry(2, 1, 1, 1)
    elif figure == 7:
        geom = MisGeometry(2, 2, 1, 1)
    else:
        raise ValueError("figure must be 6 or 7")
    spec = ArcScenarioSpec(
        geom=geom,
        num_users=num_users,
        azimuth_lo=azimuth_lo,
        azimuth_hi=azimuth_hi,
        elevation=elevation,
        iota=iota,
    )
    sms = sms_baseline(spec, config)
    warm = _embedded_start(sms, _single_layer_geom(geom), geom, num_users)
    mis = solve(build_arc_scenario(spec), config, warm_starts=(warm,))

    ctx = EvalContext.from_scenario(build_arc_scenario(spec))
    table = ctx.pattern_snr_table(mis.ms1_phase, mis.ms2_phase)
    sms_spec = replace(spec, geom=_single_layer_geom(geom))
    sms_ctx = EvalContext.from_scenario(build_arc_scenario(sms_spec))
    sms_table = sms_ctx.pattern_snr_table(sms.ms1_phase, sms.ms2_phase)
    return CaseStudyResult(
        figure=figure,
        spec=spec,
        mis=mis,
        sms=sms,
        snr_table=table,
        sms_snr_table=sms_table,
    )


def _fmt(value: float) -> str:
    return repr(float(value))


def write_sweep_csv(results, path) -> None:
    """One row per cell: geometry, users, seed, baseline SNR, achieved SNR, gain.

    ``results`` is a single :class:`SweepResult` or an iterable of them.
    """
    if isinstance(results, SweepResult):
        results = [results]
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["geometry", "users", "seed", "baseline_snr", "mis_snr", "gain"])
        for res in results:
            flat_mis = res.mis_snr.ravel()
            flat_base = res.baseline_snr.ravel()
            flat_gain = res.gain.ravel()
            for label, mis, base, gain in zip(
                res.cell_labels, flat_mis, flat_base, flat_gain
            ):
                writer.writerow(
                    [label, res.num_users, res.seed, _fmt(base), _fmt(mis), _fmt(gain)]
                )


def write_users_csv(sweep: UsersSweep, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(
            ["config", "users", "num_patterns", "worst_snr", "worst_snr_db", "seed"]
        )
        for row in sweep.rows:
            writer.writerow(
                [
                    row.label,
                    row.num_users,
                    row.num_patterns,
                    _fmt(row.worst_snr),
                    f"{row.worst_snr_db:.4f}",
                    sweep.seed,
                ]
            )


def write_case_study_csv(result: CaseStudyResult, path) -> None:
    """Per-(scheme, user, pattern) SNR rows for both the two-layer and the
    single-layer solution, with the chosen pattern flagged."""
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["scheme", "user", "pattern", "snr", "snr_db", "chosen"])
        for scheme, table, report in (
            ("mis", result.snr_table, result.mis),
            ("sms", result.sms_snr_table, result.sms),
        ):
            for k in range(table.shape[0]):
                for u in range(table.shape[1]):
                    snr = float(table[k, u])
                    snr_db = 10.0 * math.log10(snr) if snr > 0 else float("-inf")
                    writer.writerow(
                        [
                            scheme,
                            k + 1,
                            u + 1,
                            _fmt(snr),
                            f"{snr_db:.4f}",
                            int(report.chosen_pattern[k] == u + 1),
                        ]
                    )


def write_solve_csv(report: SolveReport, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["user", "pattern", "snr", "snr_db"])
        for k, (snr, pattern) in enumerate(
            zip(report.per_user_snr, report.chosen_pattern)
        ):
            snr_db = 10.0 * math.log10(snr) if snr > 0 else float("-inf")
            writer.writerow([k + 1, int(pattern), _fmt(float(snr)), f"{snr_db:.4f}"])


def results_digest(paths) -> str:
    digest = hashlib.sha256()
    for path in paths:
        with open(path, "rb") as handle:
            digest.update(handle.read())
    return digest.hexdigest()


def write_manifest(path, config: dict, seed: int, digest: str, tool_version: str) -> None:
    payload = {
        "config": config,
        "seed": seed,
        "tool_version": tool_version,
        "results_digest": digest,
    }
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
