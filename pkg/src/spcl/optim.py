"""AdamW with a half-cosine learning-rate schedule, over dicts of numpy arrays."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EvaluationError


def cosine_lr(step: int, total_steps: int, peak: float, floor: float = 0.0) -> float:
    """Half-cosine decay from ``peak`` at step 0 to ``floor`` at ``total_steps``."""
    if total_steps <= 0:
        return peak
    progress = min(max(step / total_steps, 0.0), 1.0)
    return floor + 0.5 * (peak - floor) * (1.0 + math.cos(math.pi * progress))


@dataclass
class AdamWState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def optimizer_step(params: dict, grads: dict, state: AdamWState, lr: float, *,
                   weight_decay: float = 0.01, betas=(0.9, 0.999), eps: float = 1e-8) -> None:
    """One in-place AdamW update of every block in ``grads``."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise EvaluationError(f"non-finite gradient in parameter block {name!r}")
    b1, b2 = betas
    state.step += 1
    t = state.step
    for name, g in grads.items():
        p = params[name]
        if p.shape != g.shape:
            raise ConfigError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        if weight_decay:
            p -= lr * weight_decay * p
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)


class AdamW:
    """Stateful wrapper pairing ``optimizer_step`` with ``cosine_lr``."""

    def __init__(self, params: dict, lr: float = 3e-3, weight_decay: float = 0.01,
                 lr_floor: float = 0.0, total_steps: int = 0, betas=(0.9, 0.999), eps: float = 1e-8):
        if lr <= 0 or weight_decay < 0 or lr_floor < 0:
            raise ConfigError(f"bad optimizer settings lr={lr} weight_decay={weight_decay} floor={lr_floor}")
        self.params = params
        self.lr, self.weight_decay, self.lr_floor = lr, weight_decay, lr_floor
        self.total_steps = total_steps
        self.betas, self.eps = betas, eps
        self.state = AdamWState()

    def current_lr(self) -> float:
        return cosine_lr(self.state.step, self.total_steps, self.lr, self.lr_floor)

    def step(self, grads: dict) -> None:
        optimizer_step(self.params, grads, self.state, self.current_lr(),
                       weight_decay=self.weight_decay, betas=self.betas, eps=self.eps)
