"""Power-law scaling analysis for data- and parameter-constrained training.

Fits L(s) = A + B * s^(-exponent) to (scale, converged-loss) points by
log-log regression (optionally with a free asymptotic floor A), inverts
the law to plan dataset sizes for a target loss, detects runs trapped at
an anomalously high plateau so they can be excluded from fits, and fits
the hyperbolic steps-vs-batch tradeoff S(B) = s_min * (1 + b_crit / B).
"""

from __future__ import annotations

import math

from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .errors import GeoscaleError
from .runlog import RunLog

DATA_SCALING = "data"
PARAMETER_SCALING = "parameter"
FLOOR_ZERO = "zero"
FLOOR_FREE = "free"


@dataclass(frozen=True)
class ScalingPoint:
    """One (scale, converged loss) observation.

    ``scale`` is the dataset size N for data scaling or the encoder
    parameter count P for parameter scaling.
    """

    run_id: str
    scale: float
    loss: float
    trapped: bool = False

    def __post_init__(self):
        if self.scale <= 0:
            raise GeoscaleError(f"scale must be positive, got {self.scale}")
        if self.loss <= 0:
            raise GeoscaleError(f"loss must be positive, got {self.loss}")


def steps_to_target(log: RunLog, target_loss: float, smoothing_window: int = 1) -> Optional[int]:
    """First step at which the trailing windowed median loss reaches the target.

    Windows shorter than ``smoothing_window`` at the start of the log use
    all available entries. Returns None when the target is never reached.
    """
    if smoothing_window < 1:
        raise GeoscaleError("smoothing_window must be >= 1")
    w = min(smoothing_window, len(log))
    med = np.empty(len(log))
    for i in range(w - 1):
        med[i] = np.median(log.loss[: i + 1])
    med[w - 1 :] = np.median(np.lib.stride_tricks.sliding_window_view(log.loss, w), axis=1)
    hits = np.nonzero(med <= target_loss)[0]
    return int(log.step[hits[0]]) if len(hits) else None


@dataclass(frozen=True)
class TrappedPolicy:
    """Thresholds for trapped-run detection.

    ``window`` is the final-window length used for the converged-loss
    estimate, ``k`` the deviation multiplier, ``plateau_eps`` the slope
    (per step) below which a run still counts as improving. The plateau
    test compares the slope against -plateau_eps minus four slope
    standard errors, so telemetry noise cannot make a genuinely flat run
    look like it is still descending; at zero noise the standard error
    vanishes and the comparison is against -plateau_eps exactly.
    """

    window: int = 101
    k: float = 3.0
    plateau_eps: float = 1e-6


def _final_window_stats(log: RunLog, window: int) -> tuple[float, float, float]:
    """(windowed median loss, LS loss slope, slope standard error) over the final window."""
    w = min(window, len(log))
    y = log.loss[-w:]
    x = (log.step[-w:] - log.step[-w]).astype(np.float64)
    final = float(np.median(y))
    if w < 2:
        return final, 0.0, 0.0
    xc = x - x.mean()
    sxx = float(np.dot(xc, xc))
    slope = float(np.dot(xc, y) / sxx)
    if w < 3:
        return final, slope, 0.0
    resid = y - y.mean() - slope * xc
    stderr = math.sqrt(max(float(np.dot(resid, resid)), 0.0) / (w - 2) / sxx)
    return final, slope, stderr


def detect_trapped(
    runs: Sequence[tuple[ScalingPoint, RunLog]],
    policy: TrappedPolicy = TrappedPolicy(),
) -> list[bool]:
    """Flag runs stuck at an anomalously high loss plateau.

    A run is trapped iff (i) its final windowed loss exceeds the cohort
    reference by more than ``k`` deviation units and (ii) its loss slope
    over the final window is >= -plateau_eps. The reference is the lower
    median of the cohort's final losses and the deviation unit is the
    median shortfall of the at-or-below-reference runs, which keeps the
    rule usable even when up to half the cohort is trapped (a plain
    median + k*MAD threshold is provably blind in that regime).

    Order-independent: permuting the cohort permutes the flags.
    """
    if len(runs) < 3:
        raise GeoscaleError(f"trapped detection needs a cohort of >= 3 runs, got {len(runs)}")
    finals = np.empty(len(runs))
    slopes = np.empty(len(runs))
    errs = np.empty(len(runs))
    for i, (_, log) in enumerate(runs):
        finals[i], slopes[i], errs[i] = _final_window_stats(log, policy.window)
    ref = np.sort(finals)[(len(finals) - 1) // 2]
    shortfall = ref - finals[finals <= ref]
    unit = float(np.median(shortfall)) if shortfall.size else 0.0
    elevated = finals > ref + policy.k * unit
    plateaued = slopes >= -(policy.plateau_eps + 4.0 * errs)
    return [bool(f) for f in elevated & plateaued]


def mark_trapped(
    runs: Sequence[tuple[ScalingPoint, RunLog]],
    policy: TrappedPolicy = TrappedPolicy(),
) -> list[ScalingPoint]:
    """Copies of the points with trapped flags set from detect_trapped."""
    flags = detect_trapped(runs, policy)
    return [replace(point, trapped=flag) for (point, _), flag in zip(runs, flags)]


@dataclass(frozen=True)
class PowerLawFit:
    """Fitted L(s) = A + B * s^(-exponent).

    ``r_squared`` is computed in log-log space on the non-excluded points
    (the space the regression runs in); ``r_squared_linear`` is the
    linear-space counterpart, reported for diagnostics.
    """

    A: float
    B: float
    exponent: float
    r_squared: float
    r_squared_linear: float
    excluded: tuple[str, ...]
    mode: str = DATA_SCALING
    floor: str = FLOOR_FREE

    def predict(self, scale: float | np.ndarray) -> float | np.ndarray:
        return self.A + self.B * np.asarray(scale, dtype=np.float64) ** (-self.exponent)


def _loglog_ols(log_scale: np.ndarray, log_loss: np.ndarray) -> tuple[float, float, float]:
    """(slope, intercept, ssr) of the least-squares line in log-log space."""
    x = log_scale - log_scale.mean()
    slope = float(np.dot(x, log_loss) / np.dot(x, x))
    intercept = float(log_loss.mean() - slope * log_scale.mean())
    resid = log_loss - (slope * log_scale + intercept)
    return slope, intercept, float(np.dot(resid, resid))


def _r_squared(y: np.ndarray, y_hat: np.ndarray) -> float:
    sst = float(np.sum((y - y.mean()) ** 2))
    ssr = float(np.sum((y - y_hat) ** 2))
    if sst == 0.0:
        return 1.0 if ssr == 0.0 else 0.0
    return 1.0 - ssr / sst


def fit_power_law(
    points: Sequence[ScalingPoint],
    mode: str = DATA_SCALING,
    floor: str = FLOOR_FREE,
) -> PowerLawFit:
    """Fit the power law to the non-trapped points.

    floor=FLOOR_ZERO pins A = 0 and reduces to ordinary least squares of
    log(loss) on log(scale). floor=FLOOR_FREE searches A over
    [0, min(loss)) with a coarse grid refined by golden section, running
    the closed-form log-log regression on log(loss - A) at each candidate
    and keeping the A with the smallest residual sum of squares.
    """
    if mode not in (DATA_SCALING, PARAMETER_SCALING):
        raise GeoscaleError(f"unknown scaling mode {mode!r}")
    if floor not in (FLOOR_ZERO, FLOOR_FREE):
        raise GeoscaleError(f"unknown floor mode {floor!r}")
    usable = [p for p in points if not p.trapped]
    excluded = tuple(p.run_id for p in points if p.trapped)
    if len(usable) < 3:
        raise GeoscaleError(f"need >= 3 non-trapped points, got {len(usable)}")
    scale = np.array([p.scale for p in usable])
    loss = np.array([p.loss for p in usable])
    if len(np.unique(scale)) != len(scale):
        raise GeoscaleError("scales must be pairwise distinct")
    log_scale = np.log(scale)

    if floor == FLOOR_ZERO:
        a_floor = 0.0
        slope, intercept, _ = _loglog_ols(log_scale, np.log(loss))
    else:
        min_loss = float(loss.min())

        def ssr_at(a: float) -> float:
            return _loglog_ols(log_scale, np.log(loss - a))[2]

        grid = np.linspace(0.0, min_loss * (1.0 - 1e-9), 257)
        ssr_grid = np.array([ssr_at(a) for a in grid])
        best = int(np.argmin(ssr_grid))
        lo = grid[max(best - 1, 0)]
        hi = grid[min(best + 1, len(grid) - 1)]
        a_floor = _golden_section(ssr_at, lo, hi, tol=1e-14 * max(min_loss, 1.0))
        if ssr_at(0.0) <= ssr_at(a_floor):
            a_floor = 0.0
        slope, intercept, _ = _loglog_ols(log_scale, np.log(loss - a_floor))

    exponent = -slope
    b_scale = float(np.exp(intercept))
    log_resid_target = np.log(loss - a_floor)
    log_pred = slope * log_scale + intercept
    fit = PowerLawFit(
        A=a_floor,
        B=b_scale,
        exponent=exponent,
        r_squared=_r_squared(log_resid_target, log_pred),
        r_squared_linear=_r_squared(loss, a_floor + np.exp(log_pred)),
        excluded=excluded,
        mode=mode,
        floor=floor,
    )
    return fit


def _golden_section(fn, lo: float, hi: float, tol: float) -> float:
    """Minimize a unimodal scalar function on [lo, hi]."""
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = fn(d)
    return (a + b) / 2.0


def plan_dataset_size(fit: PowerLawFit, target_loss: float) -> float:
    """Scale required for the fitted law to reach ``target_loss``.

    Inverts L = A + B * N^(-a) to N = ((L - A) / B) ** (-1/a).
    """
    if target_loss <= fit.A:
        raise GeoscaleError("target below asymptotic floor")
    if fit.exponent <= 0:
        raise GeoscaleError("law cannot be inverted")
    return float(((target_loss - fit.A) / fit.B) ** (-1.0 / fit.exponent))


@dataclass(frozen=True)
class BatchTradeoffFit:
    """Fitted S(B) = s_min * (1 + b_crit / B).

    ``below_tested_range`` is set when the fitted critical batch size is
    under a quarter of the smallest tested batch, i.e. the sweep shows
    batch-insensitive convergence over the tested range.
    """

    s_min: float
    b_crit: float
    points: tuple[tuple[float, float], ...]
    below_tested_range: bool

    def predict(self, batch: float | np.ndarray) -> float | np.ndarray:
        return self.s_min * (1.0 + self.b_crit / np.asarray(batch, dtype=np.float64))


def fit_batch_tradeoff(points: Sequence[tuple[float, float]]) -> BatchTradeoffFit:
    """Least-squares fit of steps-to-target against batch size.

    Uses the linear form S = s_min + (s_min * b_crit) * (1/B). Points
    with non-finite step counts (runs that never reached the target) are
    dropped; at least 3 distinct batch sizes must remain.
    """
    clean = [(float(b), float(s)) for b, s in points if s is not None and np.isfinite(s)]
    batches = np.array([b for b, _ in clean])
    steps = np.array([s for _, s in clean])
    if len(set(batches.tolist())) < 3:
        raise GeoscaleError(f"need >= 3 distinct batch sizes with finite steps, got {len(set(batches.tolist()))}")
    if np.any(batches <= 0):
        raise GeoscaleError("batch sizes must be positive")
    x = 1.0 / batches
    xc = x - x.mean()
    slope = float(np.dot(xc, steps) / np.dot(xc, xc))
    intercept = float(steps.mean() - slope * x.mean())
    if intercept <= 0:
        raise GeoscaleError("fitted asymptotic step count is not positive; data inconsistent with the tradeoff model")
    b_crit = max(slope / intercept, 0.0)
    return BatchTradeoffFit(
        s_min=intercept,
        b_crit=b_crit,
        points=tuple(clean),
        below_tested_range=b_crit < float(batches.min()) / 4.0,
    )
