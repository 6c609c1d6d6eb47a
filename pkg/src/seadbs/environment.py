"""Closed-loop environment: network + biomarker + reward behind reset/step."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .agent.exploration import compute_reward
from .biomarker import ObservationWindow, RollingTrace, beta_power, mean_beta
from .config import BiomarkerConfig, NetworkConfig, StimConfig
from .neural.network import PARKINSONIAN, NetworkState, env_step, init_network, run_unstimulated


@dataclass
class StepResult:
    state: np.ndarray
    reward: float
    beta: float
    mean_beta: float
    sim_clock: float


class DbsEnv:
    """Each reset re-seeds the network and runs an unstimulated warm-up so the
    rolling analysis window is full before the first control step."""

    def __init__(self, network: NetworkConfig, stim: StimConfig, biomarker: BiomarkerConfig,
                 beta_threshold: float = 0.35, mode: str = PARKINSONIAN):
        network.validate()
        stim.validate()
        self.network_cfg = network
        self.stim = stim
        self.bio = biomarker
        self.beta_threshold = beta_threshold
        self.mode = mode
        self.window_samples = int(round(biomarker.window_ms * network.sampling_rate / 1000.0))
        self.net: NetworkState | None = None
        self.history = RollingTrace(self.window_samples)
        self.window = ObservationWindow(biomarker.n_obs)

    @property
    def n_obs(self) -> int:
        return self.bio.n_obs

    def _beta(self) -> float:
        return beta_power(self.history.buf, self.network_cfg.sampling_rate, self.window_samples,
                          tuple(self.bio.band), tuple(self.bio.total_band))

    def reset(self, seed: int) -> np.ndarray:
        self.net = init_network(self.network_cfg, seed, self.mode)
        self.history = RollingTrace(self.window_samples)
        self.window = ObservationWindow(self.bio.n_obs)
        self.history.extend(run_unstimulated(self.net, self.bio.warmup_ms))
        return self.window.push(self._beta())

    def step(self, action: int) -> StepResult:
        if self.net is None:
            raise RuntimeError("reset() must be called before step()")
        _, trace = env_step(self.net, int(action), self.stim)
        self.history.extend(trace.samples)
        beta = self._beta()
        state = self.window.push(beta)
        mb = mean_beta(self.window)
        return StepResult(state, compute_reward(mb, self.beta_threshold), beta, mb, self.net.sim_clock)
