"""Cortico-basal-ganglia-thalamic network state, stepping and DBS delivery."""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..config import (
    EXCITATORY,
    NEURONS_PER_POPULATION,
    NetworkConfig,
    PopulationId,
    StimConfig,
)
from . import hh
from .kernel import advance

HEALTHY = "healthy"
PARKINSONIAN = "parkinsonian"
MODES = (HEALTHY, PARKINSONIAN)

N_POP = len(PopulationId)
N_NEURONS = N_POP * NEURONS_PER_POPULATION


@dataclass
class Wiring:
    """Per-run synaptic layout; stochastic edges are drawn once at init."""

    keys: list[str]
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    erev: np.ndarray
    decay: np.ndarray
    delay_steps: np.ndarray
    mask: np.ndarray  # (edges, src neuron, dst neuron) bool
    bias: np.ndarray  # per neuron
    noise: np.ndarray  # per neuron


@dataclass
class NetworkState:
    v: np.ndarray
    m: np.ndarray
    h: np.ndarray
    n_gate: np.ndarray
    g: np.ndarray  # synaptic conductance per (edge, dst neuron)
    pending: np.ndarray  # delayed conductance increments, ring over substeps
    last_spike: np.ndarray
    wiring: Wiring
    config: NetworkConfig
    mode: str
    seed: int
    rng: np.random.Generator
    clock: int = 0  # substeps since reset
    stim_until: int = 0  # substep index where an in-flight pulse ends
    spikes: np.ndarray = field(default_factory=lambda: np.zeros(N_NEURONS, dtype=np.int64))

    @property
    def sim_clock(self) -> float:
        """Elapsed simulated time in ms."""
        return self.clock * self.config.dt

    def population_slice(self, pop: PopulationId | str) -> slice:
        p = PopulationId[pop] if isinstance(pop, str) else pop
        lo = int(p) * NEURONS_PER_POPULATION
        return slice(lo, lo + NEURONS_PER_POPULATION)

    def copy(self) -> "NetworkState":
        return copy.deepcopy(self)


@dataclass
class GpiTrace:
    """GPi membrane potentials sampled at the biomarker rate over one step."""

    t0: float
    sampling_rate: float
    samples: np.ndarray  # (n_samples, 10)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + (np.arange(1, self.samples.shape[0] + 1) * 1000.0 / self.sampling_rate)

    def to_csv(self, path: str | Path, append: bool = False) -> None:
        mode = "a" if append else "w"
        with open(path, mode) as fh:
            if not append or fh.tell() == 0:
                fh.write("time_ms," + ",".join(f"neuron_{j}" for j in range(self.samples.shape[1])) + "\n")
            for t, row in zip(self.times, self.samples):
                fh.write(f"{t:.3f}," + ",".join(f"{x:.6f}" for x in row) + "\n")


def _build_wiring(config: NetworkConfig, mode: str, rng: np.random.Generator) -> Wiring:
    k = NEURONS_PER_POPULATION
    conns = config.connections
    n_e = len(conns)
    src = np.empty(n_e, dtype=np.int64)
    dst = np.empty(n_e, dtype=np.int64)
    weight = np.empty(n_e)
    erev = np.empty(n_e)
    decay = np.empty(n_e)
    delay = np.empty(n_e, dtype=np.int64)
    mask = np.ones((n_e, k, k), dtype=np.bool_)
    for e, c in enumerate(conns):
        src[e] = PopulationId[c.src]
        dst[e] = PopulationId[c.dst]
        w = c.weight
        if mode == PARKINSONIAN:
            w *= config.pd_multipliers.get(c.key, 1.0)
        weight[e] = w
        exc = c.sign == EXCITATORY
        erev[e] = config.e_exc if exc else config.e_inh
        decay[e] = math.exp(-config.dt / (config.tau_exc if exc else config.tau_inh))
        delay[e] = max(1, int(round(c.delay / config.dt)))
        if c.probability < 1.0:
            mask[e] = rng.random((k, k)) < c.probability
    bias = np.empty(N_NEURONS)
    noise = np.empty(N_NEURONS)
    for p in PopulationId:
        pc = config.populations[p.name]
        sl = slice(int(p) * k, (int(p) + 1) * k)
        bias[sl] = pc.bias
        noise[sl] = pc.noise
    return Wiring(
        keys=[c.key for c in conns], src=src, dst=dst, weight=weight, erev=erev,
        decay=decay, delay_steps=delay, mask=mask, bias=bias, noise=noise,
    )


def init_network(config: NetworkConfig, seed: int, mode: str = PARKINSONIAN) -> NetworkState:
    """Fresh network at rest with stochastic edges drawn from ``seed``."""
    config.validate()
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    wiring = _build_wiring(config, mode, rng)
    v_rest = hh.resting_potential(0.0)
    m0, h0, n0 = hh.steady_state(v_rest)
    n_slots = int(wiring.delay_steps.max()) + 2
    n_e = len(config.connections)
    return NetworkState(
        v=np.full(N_NEURONS, v_rest),
        m=np.full(N_NEURONS, m0),
        h=np.full(N_NEURONS, h0),
        n_gate=np.full(N_NEURONS, n0),
        g=np.zeros((n_e, NEURONS_PER_POPULATION)),
        pending=np.zeros((n_slots, n_e, NEURONS_PER_POPULATION)),
        last_spike=np.full(N_NEURONS, -(10**9), dtype=np.int64),
        wiring=wiring,
        config=config,
        mode=mode,
        seed=seed,
        rng=rng,
    )


def reset(state: NetworkState | None, seed: int, mode: str = PARKINSONIAN,
          config: NetworkConfig | None = None) -> NetworkState:
    """Re-initialise neurons, wiring and rng; the caller clears biomarker history."""
    cfg = config if config is not None else state.config
    return init_network(cfg, seed, mode)


def pulse_starts(clock: int, n_sub: int, dt: float, carrier_freq: float) -> list[int]:
    """Substep indices in ``[clock, clock + n_sub)`` where the carrier fires.

    The carrier is a global clock with pulses at multiples of 1/f from t = 0,
    rounded to the integration grid.
    """
    period = 1000.0 / carrier_freq / dt
    k_lo = max(0, int(math.floor((clock - 1) / period)))
    k_hi = int(math.ceil((clock + n_sub + 1) / period))
    out = []
    for kk in range(k_lo, k_hi + 1):
        s = int(math.floor(kk * period + 0.5))
        if clock <= s < clock + n_sub:
            out.append(s)
    return out


def stim_profile(state: NetworkState, action: int, stim: StimConfig) -> np.ndarray:
    """Injected STN current per substep for the coming step; updates ``stim_until``."""
    cfg = state.config
    n_sub = cfg.substeps
    out = np.zeros(n_sub)
    if state.stim_until > state.clock:
        out[: min(n_sub, state.stim_until - state.clock)] = stim.pulse_amplitude
    if action == 1:
        width = max(1, int(round(stim.pulse_width / cfg.dt)))
        for s in pulse_starts(state.clock, n_sub, cfg.dt, stim.carrier_freq):
            lo = s - state.clock
            out[lo : min(n_sub, lo + width)] = stim.pulse_amplitude
            state.stim_until = max(state.stim_until, s + width)
    return out


def advance_substeps(state: NetworkState, n_sub: int, stim_current: np.ndarray) -> np.ndarray:
    """Run ``n_sub`` substeps; returns GPi samples at the biomarker rate."""
    cfg = state.config
    w = state.wiring
    noise = state.rng.standard_normal((n_sub, N_NEURONS)) * (w.noise / math.sqrt(cfg.dt))
    rec_every = cfg.record_every
    trace = np.empty((n_sub // rec_every, NEURONS_PER_POPULATION))
    stn = state.population_slice(PopulationId.STN)
    pop_of = np.repeat(np.arange(N_POP, dtype=np.int64), NEURONS_PER_POPULATION)
    advance(
        state.v, state.m, state.h, state.n_gate, state.g, state.pending, state.last_spike,
        state.clock, n_sub, cfg.dt,
        w.bias, noise, stim_current, stn.start, stn.stop,
        pop_of, w.src, w.dst, w.weight, w.erev, w.decay, w.delay_steps, w.mask,
        cfg.spike_threshold, int(round(cfg.refractory / cfg.dt)),
        int(PopulationId.GPi) * NEURONS_PER_POPULATION, rec_every, trace, state.spikes,
    )
    state.clock += n_sub
    return trace


def env_step(state: NetworkState, action: int, stim: StimConfig) -> tuple[NetworkState, GpiTrace]:
    """Advance one control step (mutates and returns ``state``)."""
    if action not in (0, 1):
        raise ValueError(f"action must be 0 or 1, got {action!r}")
    t0 = state.sim_clock
    current = stim_profile(state, int(action), stim)
    samples = advance_substeps(state, state.config.substeps, current)
    return state, GpiTrace(t0=t0, sampling_rate=state.config.sampling_rate, samples=samples)


def run_unstimulated(state: NetworkState, duration_ms: float) -> np.ndarray:
    """Advance whole steps without stimulation; returns stacked GPi samples."""
    n_steps = int(round(duration_ms / state.config.step_ms))
    zero = np.zeros(state.config.substeps)
    chunks = [advance_substeps(state, state.config.substeps, zero) for _ in range(n_steps)]
    return np.concatenate(chunks, axis=0)
