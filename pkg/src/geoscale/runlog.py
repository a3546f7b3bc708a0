"""Per-step training telemetry: the RunLog record and its CSV form.

The on-disk format is a CSV with header ``step,loss,grad_norm,lr``, one
row per logged step. Steps must be strictly increasing.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GeoscaleError


@dataclass(frozen=True, eq=False)
class RunLog:
    """Telemetry for one training run.

    Attributes:
        step: strictly increasing step numbers, shape (n,).
        loss: training/validation loss per step.
        grad_norm: gradient norm per step.
        lr: learning rate per step (zeros when the producer did not log it).
    """

    step: np.ndarray
    loss: np.ndarray
    grad_norm: np.ndarray
    lr: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        step = np.asarray(self.step, dtype=np.int64)
        loss = np.asarray(self.loss, dtype=np.float64)
        grad = np.asarray(self.grad_norm, dtype=np.float64)
        lr = np.zeros_like(loss) if self.lr is None else np.asarray(self.lr, dtype=np.float64)
        if not (len(step) == len(loss) == len(grad) == len(lr)):
            raise GeoscaleError("run log columns must have equal length")
        if len(step) == 0:
            raise GeoscaleError("run log must contain at least one step")
        if np.any(np.diff(step) <= 0):
            raise GeoscaleError("run log steps must be strictly increasing")
        object.__setattr__(self, "step", step)
        object.__setattr__(self, "loss", loss)
        object.__setattr__(self, "grad_norm", grad)
        object.__setattr__(self, "lr", lr)

    def __len__(self) -> int:
        return len(self.step)

    def head(self, n: int) -> "RunLog":
        """First ``n`` entries, as a new log."""
        return RunLog(self.step[:n], self.loss[:n], self.grad_norm[:n], self.lr[:n])

    def same_as(self, other: "RunLog") -> bool:
        """Exact (bitwise) equality of all columns."""
        return (
            np.array_equal(self.step, other.step)
            and np.array_equal(self.loss, other.loss)
            and np.array_equal(self.grad_norm, other.grad_norm)
            and np.array_equal(self.lr, other.lr)
        )


def write_runlog(log: RunLog, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "loss", "grad_norm", "lr"])
        for s, l, g, r in zip(log.step, log.loss, log.grad_norm, log.lr):
            writer.writerow([int(s), repr(float(l)), repr(float(g)), repr(float(r))])


def read_runlog(path: str | Path) -> RunLog:
    path = Path(path)
    if not path.exists():
        raise GeoscaleError(f"run log not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:4]] != ["step", "loss", "grad_norm", "lr"]:
            raise GeoscaleError(f"{path}: expected header 'step,loss,grad_norm,lr'")
        steps, losses, grads, lrs = [], [], [], []
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                steps.append(int(row[0]))
                losses.append(float(row[1]))
                grads.append(float(row[2]))
                lrs.append(float(row[3]) if len(row) > 3 and row[3] != "" else 0.0)
            except (ValueError, IndexError) as exc:
                raise GeoscaleError(f"{path}: malformed row at line {i}: {exc}") from exc
    if not steps:
        raise GeoscaleError(f"{path}: empty run log")
    return RunLog(np.array(steps), np.array(losses), np.array(grads), np.array(lrs))
