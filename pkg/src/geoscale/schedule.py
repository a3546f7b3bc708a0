"""Warmup-stable-decay learning-rate schedules and fail-fast triage.

``lr_at`` evaluates the WSD curve: a linear ramp to the base rate, a
constant plateau, then exponential decay to ``base_lr * decay_floor_ratio``.
``triage`` scans a short warmup run for loss spikes, oscillation, or a
rising gradient-norm trend and rejects the run at the first offending
step, so unstable base rates are discarded before any full-length run
is committed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import GeoscaleError
from .runlog import RunLog

PASS = "pass"
FAIL = "fail"
SPIKE = "spike"
OSCILLATION = "oscillation"
GRAD_NORM_RISE = "grad_norm_rise"


@dataclass(frozen=True)
class WsdSchedule:
    """Warmup-stable-decay schedule parameters.

    Fractions must sum to 1 (within 1e-9). The decay segment is
    exponential from base_lr down to base_lr * decay_floor_ratio.
    """

    base_lr: float
    total_steps: int
    warmup_frac: float = 0.10
    stable_frac: float = 0.80
    decay_frac: float = 0.10
    decay_floor_ratio: float = 0.01

    def __post_init__(self):
        if self.base_lr <= 0:
            raise GeoscaleError("base_lr must be positive")
        if self.total_steps < 1:
            raise GeoscaleError("total_steps must be >= 1")
        fracs = (self.warmup_frac, self.stable_frac, self.decay_frac)
        if any(f < 0 for f in fracs):
            raise GeoscaleError("schedule fractions must be nonnegative")
        if abs(sum(fracs) - 1.0) > 1e-9:
            raise GeoscaleError(f"schedule fractions must sum to 1, got {sum(fracs)}")
        if not 0.0 < self.decay_floor_ratio <= 1.0:
            raise GeoscaleError("decay_floor_ratio must be in (0, 1]")

    @property
    def warmup_end(self) -> float:
        return self.warmup_frac * self.total_steps

    @property
    def decay_start(self) -> float:
        return (self.warmup_frac + self.stable_frac) * self.total_steps


def lr_at(schedule: WsdSchedule, step: int | float) -> float:
    """Learning rate at ``step``; valid for 0 <= step <= total_steps."""
    if step < 0 or step > schedule.total_steps:
        raise GeoscaleError(f"step {step} outside [0, {schedule.total_steps}]")
    warmup_end = schedule.warmup_end
    decay_start = schedule.decay_start
    if step < warmup_end:
        return schedule.base_lr * step / warmup_end
    if step <= decay_start or decay_start >= schedule.total_steps:
        return schedule.base_lr
    t_frac = (step - decay_start) / (schedule.total_steps - decay_start)
    return schedule.base_lr * schedule.decay_floor_ratio**t_frac


def lr_table(schedule: WsdSchedule, stride: int = 1) -> list[tuple[int, float]]:
    """(step, lr) pairs every ``stride`` steps, always including the last step."""
    if stride < 1:
        raise GeoscaleError("stride must be >= 1")
    steps = list(range(0, schedule.total_steps + 1, stride))
    if steps[-1] != schedule.total_steps:
        steps.append(schedule.total_steps)
    return [(s, lr_at(schedule, s)) for s in steps]


@dataclass(frozen=True)
class TriagePolicy:
    """Fail-fast rejection thresholds.

    A run fails at the first step where any of these fires over the
    trailing ``window`` entries:
      * smoothed loss exceeds spike_ratio x the window median,
      * the sign-flip fraction of loss deltas exceeds oscillation_frac,
      * the least-squares grad-norm slope exceeds gradnorm_slope_max
        (when None, the cap is 3x the slope's standard error, i.e. the
        rise must be statistically significant).

    ``smooth_width`` is a trailing median pre-filter (1 = raw loss);
    trailing rather than centered so a verdict depends only on the log
    prefix up to the failing step.
    """

    window: int = 100
    spike_ratio: float = 2.0
    oscillation_frac: float = 0.6
    gradnorm_slope_max: Optional[float] = None
    horizon: int = 2000
    smooth_width: int = 1

    def __post_init__(self):
        if self.window < 2:
            raise GeoscaleError("triage window must be >= 2")
        if self.horizon < self.window:
            raise GeoscaleError("horizon must be >= window")
        if self.smooth_width < 1:
            raise GeoscaleError("smooth_width must be >= 1")


@dataclass(frozen=True)
class TriageVerdict:
    status: str  # PASS or FAIL
    reason: Optional[str] = None  # SPIKE, OSCILLATION, GRAD_NORM_RISE
    fail_step: Optional[int] = None

    @property
    def passed(self) -> bool:
        return self.status == PASS


def _trailing_median(values: np.ndarray, width: int) -> np.ndarray:
    if width == 1:
        return values
    out = np.empty_like(values)
    for i in range(min(width - 1, len(values))):
        out[i] = np.median(values[: i + 1])
    if len(values) >= width:
        windows = np.lib.stride_tricks.sliding_window_view(values, width)
        out[width - 1 :] = np.median(windows, axis=1)
    return out


def _window_sums(values: np.ndarray, width: int) -> np.ndarray:
    c = np.concatenate([[0.0], np.cumsum(values)])
    return c[width:] - c[:-width]


def triage(log: RunLog, policy: TriagePolicy = TriagePolicy()) -> TriageVerdict:
    """Scan a run log and return the first-failure verdict.

    Deterministic, and a function of the log prefix only: truncating the
    log anywhere at or after the failing step leaves the verdict unchanged.
    Entries beyond ``policy.horizon`` (by step number) are not examined.
    """
    n = len(log)
    w = policy.window
    if n < w:
        raise GeoscaleError(f"log has {n} steps, shorter than triage window {w}")

    sm = _trailing_median(log.loss, policy.smooth_width)
    ends = np.arange(w - 1, n)  # candidate failure indices (first full window)
    eligible = log.step[ends] <= policy.horizon

    # Spike: value vs trailing-window median.
    med = np.median(np.lib.stride_tricks.sliding_window_view(sm, w), axis=1)
    spike = sm[ends] > policy.spike_ratio * med

    # Oscillation: fraction of sign flips among the window's loss deltas.
    if w > 2 and n > 2:
        deltas = np.sign(np.diff(sm))
        flips = (deltas[:-1] * deltas[1:] < 0).astype(np.float64)
        flip_count = _window_sums(flips, w - 2)
        oscillation = flip_count[: len(ends)] / (w - 2) > policy.oscillation_frac
    else:
        oscillation = np.zeros(len(ends), dtype=bool)

    # Gradient-norm rise: windowed least-squares slope above the cap.
    x = (log.step - log.step[0]).astype(np.float64)
    y = log.grad_norm
    sx = _window_sums(x, w)
    sy = _window_sums(y, w)
    sxx = _window_sums(x * x, w)
    sxy = _window_sums(x * y, w)
    syy = _window_sums(y * y, w)
    sxx_c = sxx - sx * sx / w
    sxy_c = sxy - sx * sy / w
    syy_c = syy - sy * sy / w
    slope = sxy_c / sxx_c
    if policy.gradnorm_slope_max is not None:
        cap = np.full(len(ends), policy.gradnorm_slope_max)
    elif w > 2:
        ssr = np.maximum(syy_c - slope * sxy_c, 0.0)
        cap = 3.0 * np.sqrt(ssr / (w - 2) / sxx_c)
    else:
        cap = np.zeros(len(ends))
    grad_rise = slope > cap

    for offset in np.nonzero((spike | oscillation | grad_rise) & eligible)[0][:1]:
        step = int(log.step[ends[offset]])
        if spike[offset]:
            return TriageVerdict(FAIL, SPIKE, step)
        if oscillation[offset]:
            return TriageVerdict(FAIL, OSCILLATION, step)
        return TriageVerdict(FAIL, GRAD_NORM_RISE, step)
    return TriageVerdict(PASS)


def triage_sweep(
    candidates: Sequence[tuple[float, RunLog]],
    policy: TriagePolicy = TriagePolicy(),
) -> list[float]:
    """Triage a sweep of (base_lr, log) candidates; return surviving rates ascending."""
    if not candidates:
        raise GeoscaleError("triage sweep requires at least one candidate")
    survivors = [lr for lr, log in candidates if triage(log, policy).passed]
    return sorted(survivors)
