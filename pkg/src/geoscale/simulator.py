"""Synthetic training-run telemetry with known ground truth.

The simulator produces loss/grad-norm curves whose converged values follow
a chosen power law, in three modes: Stable (exponential approach to the
law's floor), Trapped (same curve hard-floored at a multiple of the true
floor from a configurable step onward), and Divergent (geometric loss and
grad-norm growth after an onset step). It exists to give the schedule and
scaling analyses an oracle with exactly known parameters; it does not
model optimizer dynamics.

Randomness comes from numpy's PCG64 stream, which is seedable and
platform-stable, so fixed seeds give bit-identical telemetry everywhere.
Ensemble runs derive per-run seeds as
``SeedSequence([seed, run_index]).generate_state(1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import GeoscaleError
from .runlog import RunLog
from .scaling import ScalingPoint

STABLE = "stable"
TRAPPED = "trapped"
DIVERGENT = "divergent"

_GRAD_START = 1.0
_GRAD_FLOOR = 0.1
_GROWTH_EXP_CAP = 200.0  # keeps growth (and its square, in downstream stats) finite in float64


@dataclass(frozen=True)
class SimConfig:
    """Parameters for one synthetic run.

    ``law`` is (A, B, exponent); the run's true converged loss is
    A + B * scale**(-exponent). ``tau`` is the exponential time constant
    (default total_steps / 8; use total_steps >= 20 * tau when the final
    loss must match the floor to ~1e-9). ``loss_start`` is the loss at
    step zero.
    """

    mode: str
    law: tuple[float, float, float]
    scale: float
    total_steps: int
    seed: int = 0
    noise_sigma: float = 0.0
    divergence_onset: Optional[int] = None
    divergence_growth: float = 1.02
    trap_floor_multiplier: float = 3.0
    trap_onset: Optional[int] = None
    loss_start: float = 2.0
    tau: Optional[float] = None
    base_lr: float = 1e-4

    def __post_init__(self):
        if self.mode not in (STABLE, TRAPPED, DIVERGENT):
            raise GeoscaleError(f"unknown simulator mode {self.mode!r}")
        if self.total_steps < 1:
            raise GeoscaleError("total_steps must be >= 1")
        if self.noise_sigma < 0:
            raise GeoscaleError("noise_sigma must be >= 0")
        if self.trap_floor_multiplier <= 1.0:
            raise GeoscaleError("trap_floor_multiplier must be > 1")
        if self.divergence_onset is not None and self.divergence_onset > self.total_steps:
            raise GeoscaleError("divergence_onset must be <= total_steps")
        if self.scale <= 0:
            raise GeoscaleError("scale must be positive")
        if self.loss_start <= self.floor_loss:
            raise GeoscaleError(
                f"loss_start {self.loss_start} must exceed the law floor {self.floor_loss:.6g}"
            )

    @property
    def floor_loss(self) -> float:
        a, b, exponent = self.law
        return a + b * self.scale ** (-exponent)

    @property
    def time_constant(self) -> float:
        return self.tau if self.tau is not None else self.total_steps / 8.0


def simulate_run(config: SimConfig) -> RunLog:
    """Generate one run's telemetry; deterministic for a fixed config."""
    n = config.total_steps
    steps = np.arange(1, n + 1, dtype=np.int64)
    t = steps.astype(np.float64)
    tau = config.time_constant
    floor = config.floor_loss

    loss = floor + (config.loss_start - floor) * np.exp(-t / tau)
    grad = _GRAD_FLOOR + (_GRAD_START - _GRAD_FLOOR) * np.exp(-t / tau)

    if config.mode == TRAPPED:
        onset = config.trap_onset if config.trap_onset is not None else n // 6
        trap_floor = config.trap_floor_multiplier * floor
        loss = np.where(steps >= onset, np.maximum(loss, trap_floor), loss)
    elif config.mode == DIVERGENT:
        onset = config.divergence_onset if config.divergence_onset is not None else n // 2
        past = np.maximum(t - onset, 0.0)
        growth = np.exp(np.minimum(past * np.log(config.divergence_growth), _GROWTH_EXP_CAP))
        loss = loss * growth
        grad = grad * growth

    if config.noise_sigma > 0:
        rng = np.random.Generator(np.random.PCG64(config.seed))
        z = rng.standard_normal((2, n))
        loss = loss * np.exp(config.noise_sigma * z[0])
        grad = grad * np.exp(config.noise_sigma * z[1])

    lr = np.full(n, config.base_lr)
    return RunLog(steps, loss, grad, lr)


@dataclass(frozen=True)
class EnsembleRun:
    point: ScalingPoint
    log: RunLog


def derive_run_seed(seed: int, index: int) -> int:
    """Deterministic per-run seed for run ``index`` of a batch rooted at ``seed``."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1, np.uint64)[0])


def _spread_indices(n: int, count: int) -> set[int]:
    """``count`` indices spread evenly over range(n)."""
    return {int((j + 0.5) * n / count) for j in range(count)} if count else set()


def simulate_ensemble(
    law: tuple[float, float, float],
    scales: Sequence[float],
    trapped_fraction: float,
    seeds: Sequence[int],
    *,
    total_steps: int = 4000,
    noise_sigma: float = 0.0,
    trap_floor_multiplier: float = 3.0,
    trap_onset: Optional[int] = None,
    tau: Optional[float] = None,
    loss_start: float = 2.0,
    final_window: int = 101,
    workers: int = 1,
) -> list[EnsembleRun]:
    """One run per (scale, seed) with a designated fraction in Trapped mode.

    Runs are ordered scale-major in the given order; the trapped runs are
    spread evenly across that ordering (round(trapped_fraction * n_runs)
    of them), so the designation is deterministic. Each point's loss is
    the median over the run's final ``final_window`` steps, and its
    ``trapped`` flag carries the true generating label for oracle
    comparisons. ``workers`` > 1 simulates runs in a thread pool; output
    is identical to sequential execution.
    """
    if not scales:
        raise GeoscaleError("ensemble needs at least one scale")
    if not seeds:
        raise GeoscaleError("ensemble needs at least one seed")
    if not 0.0 <= trapped_fraction <= 1.0:
        raise GeoscaleError("trapped_fraction must be within [0, 1]")
    combos = [(scale, seed) for scale in scales for seed in seeds]
    trapped_at = _spread_indices(len(combos), round(trapped_fraction * len(combos)))
    configs = [
        SimConfig(
            mode=TRAPPED if idx in trapped_at else STABLE,
            law=law,
            scale=float(scale),
            total_steps=total_steps,
            seed=derive_run_seed(seed, idx),
            noise_sigma=noise_sigma,
            trap_floor_multiplier=trap_floor_multiplier,
            trap_onset=trap_onset,
            tau=tau,
            loss_start=loss_start,
        )
        for idx, (scale, seed) in enumerate(combos)
    ]
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            logs = list(pool.map(simulate_run, configs))
    else:
        logs = [simulate_run(c) for c in configs]
    runs = []
    for idx, ((scale, seed), log) in enumerate(zip(combos, logs)):
        w = min(final_window, len(log))
        runs.append(
            EnsembleRun(
                ScalingPoint(
                    run_id=f"N{scale:g}-s{seed}",
                    scale=float(scale),
                    loss=float(np.median(log.loss[-w:])),
                    trapped=idx in trapped_at,
                ),
                log,
            )
        )
    return runs
