"""AdamW with decoupled weight decay and the one-cycle learning-rate schedule."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

PEAK_LR = 6e-4
WEIGHT_DECAY = 1e-3


@dataclass
class OneCycleSchedule:
    """Linear ramp ``peak/div_start -> peak`` then cosine decay to ``peak/div_final``."""

    total_steps: int
    peak_lr: float = PEAK_LR
    warmup_frac: float = 0.3
    div_start: float = 25.0
    div_final: float = 1e4

    def __post_init__(self):
        if self.total_steps < 2:
            raise ConfigError(f"one-cycle schedule needs at least 2 steps, got {self.total_steps}")
        if self.peak_lr <= 0:
            raise ConfigError(f"peak_lr must be > 0, got {self.peak_lr}")

    @property
    def start_lr(self) -> float:
        return self.peak_lr / self.div_start

    @property
    def final_lr(self) -> float:
        return self.peak_lr / self.div_final

    @property
    def warmup_steps(self) -> int:
        return min(max(1, round(self.warmup_frac * self.total_steps)), self.total_steps - 1)

    def lr_at(self, step: int) -> float:
        if not 0 <= step < self.total_steps:
            raise ConfigError(f"step {step} outside [0, {self.total_steps})")
        w = self.warmup_steps
        if step <= w:
            return self.start_lr + (self.peak_lr - self.start_lr) * step / w
        frac = (step - w) / (self.total_steps - 1 - w)
        return self.final_lr + (self.peak_lr - self.final_lr) * 0.5 * (1 + math.cos(math.pi * frac))


def lr_at(schedule: OneCycleSchedule, step: int) -> float:
    return schedule.lr_at(step)


@dataclass
class AdamW:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = WEIGHT_DECAY
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def step(self, registry, lr: float) -> None:
        """One in-place update of every parameter in ``registry`` (path -> Param)."""
        if not lr > 0:
            raise ConfigError(f"learning rate must be > 0, got {lr}")
        self.step_count += 1
        t = self.step_count
        bc1 = 1 - self.beta1**t
        bc2 = 1 - self.beta2**t
        for path, p in registry.items():
            g = p.grad
            if path not in self.m:
                self.m[path] = np.zeros_like(p.value)
                self.v[path] = np.zeros_like(p.value)
            m, v = self.m[path], self.v[path]
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * (g * g)
            if p.decay and self.weight_decay:
                p.value *= 1 - lr * self.weight_decay
            p.value -= (lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)).astype(p.value.dtype, copy=False)


def adamw_step(registry, state: AdamW, lr: float) -> None:
    state.step(registry, lr)


def zero_grad(registry) -> None:
    for p in registry.values():
        p.grad[...] = 0
