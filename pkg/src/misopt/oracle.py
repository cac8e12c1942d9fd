"""Independent ground truth: exhaustive lattice search and finite differences.

``brute_force_solve`` enumerates both phase vectors over a uniform phase
lattice and assigns every user its best pattern, which is the exact schedule
optimum because users are scheduled independently.  ``fd_directional`` is a
plain central difference used to audit analytic gradients; complex blocks
are perturbed directly in the ambient space, where the objective remains a
polynomial and needs no feasibility.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .channel import Scenario
from .geometry import MisGeometry
from .objective import EvalContext, ProductPoint

__all__ = [
    "BruteForceConfig",
    "BruteForceResult",
    "brute_force_solve",
    "fd_directional",
]


@dataclass(frozen=True)
class BruteForceConfig:
    """Lattice resolution and a hard cap on the nominal enumeration size."""

    phase_levels: int = 16
    max_search_space: int = 50_000_000

    def __post_init__(self):
        if self.phase_levels < 2:
            raise ValueError("phase_levels must be >= 2")
        if self.max_search_space < 1:
            raise ValueError("max_search_space must be >= 1")


@dataclass(frozen=True)
class BruteForceResult:
    """Exact lattice optimum: value, phase vectors, and per-user pattern (1-based)."""

    value: float
    ms1_phase: np.ndarray
    ms2_phase: np.ndarray
    chosen_pattern: np.ndarray


def _phase_lattice(levels: int, size: int) -> np.ndarray:
    """All ``levels**size`` phase combinations, one row per combination."""
    angles = 2.0 * np.pi * np.arange(levels) / levels
    grids = np.meshgrid(*([angles] * size), indexing="ij")
    return np.exp(1j * np.stack([g.ravel() for g in grids], axis=1))


def brute_force_solve(
    scenario: Scenario,
    geom: MisGeometry | None = None,
    cfg: BruteForceConfig = BruteForceConfig(),
) -> BruteForceResult:
    """Exhaustive max-min SNR over the phase lattice.

    The phase lattice contains zero, so the identity profile is always a
    candidate.  Rejects instances whose nominal enumeration size
    ``levels**(M+N) * U**K`` exceeds the configured cap.
    """
    if geom is not None and geom != scenario.geom:
        raise ValueError("geom disagrees with scenario.geom")
    ctx = EvalContext.from_scenario(scenario)
    m, n = ctx.num_ms1, ctx.num_ms2
    nominal = cfg.phase_levels ** (m + n) * ctx.num_patterns**ctx.num_users
    if nominal > cfg.max_search_space:
        raise ValueError(
            f"enumeration size {nominal} exceeds cap {cfg.max_search_space}"
        )

    ms1_lattice = _phase_lattice(cfg.phase_levels, m)
    angles = 2.0 * np.pi * np.arange(cfg.phase_levels) / cfg.phase_levels
    best_value = -np.inf
    best_ms1 = None
    best_ms2 = None
    chunk = max(1, 65536 // max(ctx.num_patterns * m, 1))
    for theta_angles in itertools.product(angles, repeat=n):
        ms2 = np.exp(1j * np.asarray(theta_angles))
        equiv = ctx.equiv_phases(ms2)
        for start in range(0, ms1_lattice.shape[0], chunk):
            block = ms1_lattice[start : start + chunk]
            combined = equiv[None, :, :] * block[:, None, :]
            amps = np.einsum("bum,km->bku", combined, ctx.channels)
            gamma = ctx.iota[None, :, None] * np.abs(amps) ** 2
            per_user_best = gamma.max(axis=2)
            values = per_user_best.min(axis=1)
            top = int(np.argmax(values))
            if values[top] > best_value:
                best_value = float(values[top])
                best_ms1 = block[top].copy()
                best_ms2 = ms2
    table = ctx.pattern_snr_table(best_ms1, best_ms2)
    chosen = np.argmax(table, axis=1).astype(int) + 1
    return BruteForceResult(
        value=best_value,
        ms1_phase=best_ms1,
        ms2_phase=best_ms2,
        chosen_pattern=chosen,
    )


def _shifted(point: ProductPoint, direction, scale: float) -> ProductPoint:
    return ProductPoint(
        ms1_phase=point.ms1_phase + scale * direction.d_ms1_phase,
        ms2_phase=point.ms2_phase + scale * direction.d_ms2_phase,
        schedule=point.schedule + scale * direction.d_schedule,
    )


def fd_directional(objective, point: ProductPoint, direction, step: float) -> float:
    """Central-difference directional derivative of ``objective`` at ``point``.

    ``direction`` is an ambient triple (complex blocks perturb real and
    imaginary parts together); the matching analytic prediction for a
    gradient ``g`` is ``Re(g^H d)`` per complex block plus the Frobenius
    pairing for the schedule block.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    upper = objective(_shifted(point, direction, +step))
    lower = objective(_shifted(point, direction, -step))
    return (upper - lower) / (2.0 * step)
