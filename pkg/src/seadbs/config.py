"""Configuration dataclasses and YAML loading.

Every tunable constant of the simulator, the agent and the experiments lives
here so that a run is reproducible from a single config file plus a seed.
"""
from __future__ import annotations

import copy
import enum
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path
from typing import Any

import yaml


class ConfigError(ValueError):
    """Raised for invalid or inconsistent configuration."""


class PopulationId(enum.IntEnum):
    CtxE = 0
    CtxI = 1
    StrD1 = 2
    StrD2 = 3
    STN = 4
    GPe = 5
    GPi = 6
    Thal = 7


NEURONS_PER_POPULATION = 10

EXCITATORY = "excitatory"
INHIBITORY = "inhibitory"

# Fixed cortico-basal-ganglia-thalamic circuit: (src, dst) -> sign.
CIRCUIT: dict[tuple[str, str], str] = {
    ("CtxE", "CtxI"): EXCITATORY,
    ("CtxI", "CtxE"): INHIBITORY,
    ("CtxE", "StrD1"): EXCITATORY,
    ("CtxE", "StrD2"): EXCITATORY,
    ("StrD1", "GPi"): INHIBITORY,
    ("StrD2", "GPe"): INHIBITORY,
    ("GPe", "STN"): INHIBITORY,
    ("STN", "GPe"): EXCITATORY,
    ("STN", "GPi"): EXCITATORY,
    ("GPi", "Thal"): INHIBITORY,
    ("Thal", "CtxE"): EXCITATORY,
}


@dataclass
class PopulationConfig:
    bias: float = 0.0  # constant injected current, uA/cm^2
    noise: float = 0.0  # white-noise current intensity, mV/sqrt(ms)


@dataclass
class ConnectionSpec:
    src: str
    dst: str
    sign: str
    weight: float  # conductance increment per presynaptic spike, mS/cm^2
    probability: float = 1.0
    delay: float = 1.0  # ms

    @property
    def key(self) -> str:
        return f"{self.src}->{self.dst}"


def _default_populations() -> dict[str, PopulationConfig]:
    return {
        "CtxE": PopulationConfig(bias=7.0, noise=1.0),
        "CtxI": PopulationConfig(bias=5.0, noise=1.0),
        "StrD1": PopulationConfig(bias=2.0, noise=1.0),
        "StrD2": PopulationConfig(bias=2.0, noise=1.0),
        "STN": PopulationConfig(bias=7.0, noise=1.0),
        "GPe": PopulationConfig(bias=2.0, noise=1.0),
        "GPi": PopulationConfig(bias=-10.0, noise=1.0),
        "Thal": PopulationConfig(bias=5.0, noise=1.0),
    }


def _default_connections() -> list[ConnectionSpec]:
    return [
        ConnectionSpec("CtxE", "CtxI", EXCITATORY, 0.02, 0.5, 1.0),
        ConnectionSpec("CtxI", "CtxE", INHIBITORY, 0.02, 0.5, 1.0),
        ConnectionSpec("CtxE", "StrD1", EXCITATORY, 0.01, 0.3, 5.0),
        ConnectionSpec("CtxE", "StrD2", EXCITATORY, 0.01, 0.3, 5.0),
        ConnectionSpec("StrD1", "GPi", INHIBITORY, 0.01, 0.3, 4.0),
        ConnectionSpec("StrD2", "GPe", INHIBITORY, 0.01, 0.3, 4.0),
        ConnectionSpec("GPe", "STN", INHIBITORY, 0.125, 1.0, 3.0),
        ConnectionSpec("STN", "GPe", EXCITATORY, 0.025, 1.0, 3.0),
        ConnectionSpec("STN", "GPi", EXCITATORY, 0.004, 1.0, 2.0),
        ConnectionSpec("GPi", "Thal", INHIBITORY, 0.02, 0.5, 2.0),
        ConnectionSpec("Thal", "CtxE", EXCITATORY, 0.01, 0.5, 5.0),
    ]


def _default_pd_multipliers() -> dict[str, float]:
    return {"STN->GPe": 8.0, "GPe->STN": 8.0, "StrD2->GPe": 8.0}


@dataclass
class NetworkConfig:
    populations: dict[str, PopulationConfig] = field(default_factory=_default_populations)
    connections: list[ConnectionSpec] = field(default_factory=_default_connections)
    pd_multipliers: dict[str, float] = field(default_factory=_default_pd_multipliers)
    dt: float = 0.02
    substeps: int = 100
    sampling_rate: float = 2000.0
    tau_exc: float = 5.0
    tau_inh: float = 8.0
    e_exc: float = 0.0
    e_inh: float = -80.0
    spike_threshold: float = 0.0
    refractory: float = 1.0

    @property
    def step_ms(self) -> float:
        return self.dt * self.substeps

    @property
    def record_every(self) -> int:
        """Substeps between two biomarker samples."""
        return int(round(1000.0 / (self.sampling_rate * self.dt)))

    def validate(self) -> None:
        names = {p.name for p in PopulationId}
        missing = names - set(self.populations)
        if missing:
            raise ConfigError(f"missing populations: {sorted(missing)}")
        extra = set(self.populations) - names
        if extra:
            raise ConfigError(f"unknown populations: {sorted(extra)}")
        seen = set()
        for c in self.connections:
            expected = CIRCUIT.get((c.src, c.dst))
            if expected is None:
                raise ConfigError(f"connection {c.key} is not part of the circuit")
            if c.sign != expected:
                raise ConfigError(f"connection {c.key} must be {expected}, got {c.sign}")
            if c.key in seen:
                raise ConfigError(f"duplicate connection {c.key}")
            seen.add(c.key)
            if not 0.0 < c.probability <= 1.0:
                raise ConfigError(f"connection {c.key}: probability must be in (0, 1]")
            if c.weight < 0:
                raise ConfigError(f"connection {c.key}: negative weight")
            if c.delay < self.dt:
                raise ConfigError(f"connection {c.key}: delay shorter than dt")
        for key in self.pd_multipliers:
            if key not in seen:
                raise ConfigError(f"pd multiplier for unknown connection {key}")
        if self.substeps * self.dt <= 0:
            raise ConfigError("step duration must be positive")
        samples = self.substeps / self.record_every
        if abs(self.record_every * self.sampling_rate * self.dt - 1000.0) > 1e-9 or samples != int(samples):
            raise ConfigError("sampling rate must divide the integration grid and the step evenly")


@dataclass
class StimConfig:
    pulse_amplitude: float = 200.0  # uA/cm^2
    pulse_width: float = 0.3  # ms
    carrier_freq: float = 50.0  # Hz

    def validate(self) -> None:
        if not self.carrier_freq > 0:
            raise ConfigError(f"carrier frequency must be positive, got {self.carrier_freq}")
        if not 0 < self.pulse_width < 1000.0 / self.carrier_freq:
            raise ConfigError("pulse width must be positive and shorter than the carrier period")


@dataclass
class BiomarkerConfig:
    window_ms: float = 128.0
    warmup_ms: float = 128.0
    n_obs: int = 5
    band: tuple[float, float] = (13.0, 35.0)
    total_band: tuple[float, float] = (1.0, 200.0)


@dataclass
class TrainingConfig:
    episodes: int = 150
    steps_per_episode: int = 30
    actor_lr: float = 0.0005
    critic_lr: float = 0.001
    pred_lr: float = 0.001
    gamma: float = 0.99
    buffer_size: int = 8192
    batch_size: int = 32
    rho: float = 0.005
    beta_threshold: float = 0.35
    tau0: float = 1.0
    tau_min: float = 0.1
    lambda_tau: float = 0.001
    anneal_per: str = "step"  # "step" or "episode"
    eps_start: float = 0.9
    eps_end: float = 0.05
    hidden: int = 64
    replace_reward: bool = False  # use r_hat instead of r + r_hat in the Q-target

    def validate(self) -> None:
        if not 0 <= self.gamma < 1:
            raise ConfigError("gamma must be in [0, 1)")
        if not 0 < self.rho <= 1:
            raise ConfigError("rho must be in (0, 1]")
        if not self.tau0 >= self.tau_min > 0 or self.lambda_tau < 0:
            raise ConfigError("invalid temperature schedule")
        if self.anneal_per not in ("step", "episode"):
            raise ConfigError(f"anneal_per must be 'step' or 'episode', got {self.anneal_per!r}")
        if self.batch_size > self.buffer_size:
            raise ConfigError("batch larger than replay buffer")


VARIANTS = ("baseline", "baseline_pm", "baseline_gs", "sea_dbs")


@dataclass
class EvalConfig:
    intervals: list[int] = field(default_factory=lambda: [10, 20, 50, 75])
    rollout_steps: int = 150
    eval_seeds: list[int] = field(default_factory=lambda: [1001, 1002, 1003])
    carrier_freqs: list[float] = field(default_factory=lambda: [50.0, 30.0])
    carrier_steps: int = 150


@dataclass
class ExperimentConfig:
    name: str = "sea-dbs"
    variant: str = "sea_dbs"
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    out_dir: str = "runs"
    network: NetworkConfig = field(default_factory=NetworkConfig)
    stim: StimConfig = field(default_factory=StimConfig)
    biomarker: BiomarkerConfig = field(default_factory=BiomarkerConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    calibration_seeds: list[int] = field(default_factory=lambda: list(range(10)))

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        self.network.validate()
        self.stim.validate()
        self.training.validate()
        if self.biomarker.n_obs < 1:
            raise ConfigError("n_obs must be >= 1")
        if any(n <= 0 for n in self.evaluation.intervals):
            raise ConfigError("seed-change intervals must be positive")


def to_dict(cfg: Any) -> Any:
    if is_dataclass(cfg):
        return {f.name: to_dict(getattr(cfg, f.name)) for f in fields(cfg)}
    if isinstance(cfg, dict):
        return {k: to_dict(v) for k, v in cfg.items()}
    if isinstance(cfg, (list, tuple)):
        return [to_dict(v) for v in cfg]
    return cfg


def _merge(cls, data: dict[str, Any], where: str):
    obj = cls()
    known = {f.name: f for f in fields(cls)}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"unknown key {where}{key}")
        current = getattr(obj, key)
        if key == "populations":
            pops = copy.deepcopy(current)
            for name, pdata in value.items():
                base = asdict(pops.get(name, PopulationConfig()))
                base.update(pdata)
                pops[name] = PopulationConfig(**base)
            value = pops
        elif key == "connections":
            value = [ConnectionSpec(**c) for c in value]
        elif is_dataclass(current):
            value = _merge(type(current), value or {}, f"{where}{key}.")
        elif isinstance(current, tuple):
            value = tuple(value)
        setattr(obj, key, value)
    return obj


def from_dict(data: dict[str, Any]) -> ExperimentConfig:
    return _merge(ExperimentConfig, data or {}, "")


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    with open(path) as fh:
        data = yaml.safe_load(fh)
    return from_dict(data or {})


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)
