"""Adam optimizer and validation-plateau learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import ShapeMismatch, Tensor


class Adam:
    """Bias-corrected Adam over a fixed list of named parameters."""

    def __init__(self, params: list[tuple[str, Tensor]], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = {name: np.zeros_like(t.data) for name, t in params}
        self.v = {name: np.zeros_like(t.data) for name, t in params}

    def step(self) -> None:
        """Apply one update from the gradients stored on the parameters."""
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for name, p in self.params:
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            if g.shape != p.data.shape:
                raise ShapeMismatch(f"gradient shape {g.shape} != param shape {p.data.shape} for {name}")
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / bc1
            v_hat = v / bc2
            p.data -= (self.lr * m_hat / (np.sqrt(v_hat) + self.eps)).astype(p.data.dtype)

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.grad = None


@dataclass
class LrSchedule:
    """Plateau annealing plus early stopping on validation loss.

    The rate halves each time the non-improvement streak reaches a multiple
    of ``plateau_patience``; training stops once the streak reaches
    ``early_stop_patience``. Improvement means the loss beats the best seen
    by more than ``tol``.
    """

    lr: float
    anneal_factor: float = 0.5
    plateau_patience: int = 5
    early_stop_patience: int = 8
    tol: float = 1e-6
    best: float = field(default=float("inf"))
    since_improvement: int = 0

    def improved_last_epoch(self) -> bool:
        return self.since_improvement == 0


def schedule_epoch(val_loss: float, sched: LrSchedule) -> tuple[float, bool]:
    """Advance the schedule by one epoch; returns (new lr, stop flag)."""
    if val_loss < sched.best - sched.tol:
        sched.best = val_loss
        sched.since_improvement = 0
        return sched.lr, False
    sched.since_improvement += 1
    if sched.since_improvement % sched.plateau_patience == 0:
        sched.lr *= sched.anneal_factor
    stop = sched.since_improvement >= sched.early_stop_patience
    return sched.lr, stop
