from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Transition:
    s: np.ndarray
    a: np.ndarray  # relaxed action on the 2-simplex
    a_logits: np.ndarray
    r: float
    r_hat: float
    s_next: np.ndarray


@dataclass
class Batch:
    s: np.ndarray
    a: np.ndarray
    a_logits: np.ndarray
    r: np.ndarray
    r_hat: np.ndarray
    s_next: np.ndarray

    def __len__(self) -> int:
        return self.s.shape[0]


class ReplayBuffer:
    """Fixed-capacity ring buffer; the oldest transition is overwritten first."""

    def __init__(self, capacity: int, obs_dim: int, rng: np.random.Generator, n_actions: int = 2):
        self.capacity = capacity
        self.rng = rng
        self.s = np.zeros((capacity, obs_dim))
        self.a = np.zeros((capacity, n_actions))
        self.a_logits = np.zeros((capacity, n_actions))
        self.r = np.zeros(capacity)
        self.r_hat = np.zeros(capacity)
        self.s_next = np.zeros((capacity, obs_dim))
        self.pos = 0
        self.size = 0
        self.pushed = 0

    def __len__(self) -> int:
        return self.size

    def push(self, t: Transition) -> None:
        vals = (t.s, t.a, t.a_logits, t.r, t.r_hat, t.s_next)
        if not all(np.all(np.isfinite(v)) for v in vals):
            raise ValueError("transition contains non-finite values")
        if np.shape(t.s) != self.s.shape[1:] or np.shape(t.s_next) != self.s.shape[1:]:
            raise ValueError("state length does not match the buffer")
        i = self.pos
        self.s[i] = t.s
        self.a[i] = t.a
        self.a_logits[i] = t.a_logits
        self.r[i] = t.r
        self.r_hat[i] = t.r_hat
        self.s_next[i] = t.s_next
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.pushed += 1

    def sample(self, batch_size: int) -> Batch:
        """Uniform batch drawn without replacement."""
        if batch_size > self.size:
            raise ValueError(f"cannot sample {batch_size} from {self.size} transitions")
        idx = self.rng.choice(self.size, size=batch_size, replace=False)
        return self.take(idx)

    def take(self, idx) -> Batch:
        return Batch(self.s[idx], self.a[idx], self.a_logits[idx], self.r[idx],
                     self.r_hat[idx], self.s_next[idx])

    def ordered(self) -> Batch:
        """All stored transitions, oldest first."""
        if self.size < self.capacity:
            idx = np.arange(self.size)
        else:
            idx = (np.arange(self.capacity) + self.pos) % self.capacity
        return self.take(idx)
