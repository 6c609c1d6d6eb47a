"""Reward shaping, Gumbel-Softmax sampling and temperature annealing."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

U_CLAMP = 1e-12


def compute_reward(mean_beta: float, beta_threshold: float = 0.35) -> float:
    """Quadratic reward around the beta threshold: positive below it, negative at or above."""
    d = (mean_beta - beta_threshold) * 10.0
    if mean_beta < beta_threshold:
        return d * d
    if d == 0.0:
        return 0.0
    return -(d * d)


def sample_gumbel(rng: np.random.Generator, shape=(2,)) -> np.ndarray:
    u = rng.random(shape)
    return gumbel_from_uniform(u)


def gumbel_from_uniform(u) -> np.ndarray:
    u = np.clip(np.asarray(u, dtype=float), U_CLAMP, 1.0 - U_CLAMP)
    return -np.log(-np.log(u))


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def gumbel_softmax(logits, tau: float, noise: np.ndarray | None = None,
                   rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Relaxed one-hot sample ``softmax((logits + g) / tau)``.

    Returns the sample and the Gumbel noise used, so that callers can replay
    the same realisation when differentiating.
    """
    logits = np.asarray(logits, dtype=float)
    if tau <= 0:
        raise ValueError("temperature must be positive")
    if noise is None:
        noise = sample_gumbel(rng, logits.shape)
    return softmax((logits + noise) / tau), noise


def softmax_backward(y: np.ndarray, dy: np.ndarray, tau: float) -> np.ndarray:
    """Gradient w.r.t. logits of ``y = softmax((logits + g) / tau)``; ``g`` is constant."""
    return y * (dy - np.sum(dy * y, axis=-1, keepdims=True)) / tau


@dataclass
class AnnealSchedule:
    tau0: float = 1.0
    tau_min: float = 0.1
    lambda_tau: float = 0.001

    def __post_init__(self):
        if not (self.tau0 >= self.tau_min > 0) or self.lambda_tau < 0:
            raise ValueError("need tau0 >= tau_min > 0 and lambda_tau >= 0")


def anneal_temperature(t: int, sched: AnnealSchedule) -> float:
    if t < 0:
        raise ValueError("step index must be non-negative")
    return max(sched.tau_min, sched.tau0 * math.exp(-sched.lambda_tau * t))


def epsilon_at(progress: float, start: float, end: float) -> float:
    """Linear epsilon decay for the non-Gumbel baselines, ``progress`` in [0, 1]."""
    progress = min(max(progress, 0.0), 1.0)
    return start + (end - start) * progress
