"""First-order optimization: Adam with bias correction and a OneCycle schedule.

Both the coefficient training loop and the reconstruction loop step one Adam
state per parameter block, with learning rates drawn from a three-phase
OneCycle schedule (cosine warmup, cosine anneal back, cosine decay to a
final floor).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Adam", "OneCycleSchedule"]


class Adam:
    """Adam state for one parameter block.

    Lazily sizes its moment buffers to the first gradient seen; every step
    increments the internal counter by exactly one.
    """

    def __init__(self, beta1=0.9, beta2=0.99, eps=1e-8):
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.m = None
        self.v = None
        self.t = 0

    def step(self, params, grads, lr):
        """Return the updated parameter block (bias-corrected Adam update)."""
        params = np.asarray(params, dtype=float)
        grads = np.asarray(grads, dtype=float)
        if params.shape != grads.shape:
            raise ValueError(
                f"shape mismatch: params {params.shape} vs grads {grads.shape}")
        if not lr > 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        if not np.all(np.isfinite(grads)):
            idx = tuple(int(i) for i in np.argwhere(~np.isfinite(grads))[0])
            raise ValueError(f"non-finite gradient at index {idx}")
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        elif self.m.shape != params.shape:
            raise ValueError(
                f"optimizer state shaped {self.m.shape}, got block {params.shape}")
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grads
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grads * grads
        m_hat = self.m / (1.0 - self.beta1 ** self.t)
        v_hat = self.v / (1.0 - self.beta2 ** self.t)
        return params - lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass(frozen=True)
class OneCycleSchedule:
    """Three-phase OneCycle learning-rate schedule.

    Phase 1 (first `pct_start` of the run): cosine ramp from
    max_lr / div_factor up to max_lr.  Phase 2 (next `pct_start`): cosine
    anneal back down to max_lr / div_factor.  Phase 3 (remainder): cosine
    anneal to the floor (max_lr / div_factor) / final_div_factor.

    With three_phase=False the ramp is followed by a single anneal from
    max_lr straight to the floor.
    """

    max_lr: float
    total_steps: int
    pct_start: float = 0.15
    div_factor: float = 10.0
    final_div_factor: float = 100.0
    three_phase: bool = True

    def __post_init__(self):
        if not 0.0 < self.pct_start < 0.5:
            raise ValueError(f"pct_start must be in (0, 0.5), got {self.pct_start}")
        if not (self.div_factor > 1.0 and self.final_div_factor > 1.0):
            raise ValueError("div factors must exceed 1")
        if self.total_steps < 1:
            raise ValueError(f"total_steps must be >= 1, got {self.total_steps}")
        if not self.max_lr > 0:
            raise ValueError(f"max_lr must be positive, got {self.max_lr}")

    @property
    def initial_lr(self) -> float:
        return self.max_lr / self.div_factor

    @property
    def final_lr(self) -> float:
        return self.initial_lr / self.final_div_factor

    def lr(self, step: int) -> float:
        """Learning rate at a 0-based step index in [0, total_steps)."""
        if not 0 <= step < self.total_steps:
            raise ValueError(
                f"step {step} outside [0, {self.total_steps})")
        last = self.total_steps - 1
        ramp_end = min(math.ceil(self.pct_start * self.total_steps), last)
        if step <= ramp_end:
            return _cosine(self.initial_lr, self.max_lr, step, ramp_end)
        if self.three_phase:
            down_end = min(math.ceil(2.0 * self.pct_start * self.total_steps), last)
            if step <= down_end:
                return _cosine(self.max_lr, self.initial_lr,
                               step - ramp_end, down_end - ramp_end)
            return _cosine(self.initial_lr, self.final_lr,
                           step - down_end, last - down_end)
        return _cosine(self.max_lr, self.final_lr, step - ramp_end, last - ramp_end)


def _cosine(start, end, step, span):
    if span <= 0:
        return start if step <= 0 else end
    frac = (1.0 - math.cos(math.pi * step / span)) / 2.0
    return start + (end - start) * frac
