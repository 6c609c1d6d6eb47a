"""Experiment orchestration: calibration, training, evaluation protocols, outputs."""
from __future__ import annotations

import copy
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
from scipy import stats

from .agent.ddpg import AgentNetworks
from .agent.train import RunMetrics, train, variant_flags
from .biomarker import beta_power
from .config import VARIANTS, ConfigError, ExperimentConfig, StimConfig, to_dict
from .environment import DbsEnv
from .neural.network import HEALTHY, PARKINSONIAN, init_network, run_unstimulated
from .quantize import (
    ModelCheckpoint,
    checkpoint_from_agent,
    load_for_inference,
    quantize_fp16,
    read_checkpoint,
    save_checkpoint,
)
from . import plotting

log = logging.getLogger(__name__)

ROLLOUT_COLUMNS = ["eval_seed", "step", "env_seed", "action", "beta_power", "mean_beta", "reward"]

Policy = Callable[[np.ndarray], int]


class CalibrationError(RuntimeError):
    pass


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "" if np.isnan(x) else repr(float(x))
    return str(x)


def write_rows(path: str | Path, columns: list[str], rows: Iterable[dict]) -> Path:
    """Write a CSV; refuses empty input before touching the filesystem."""
    rows = list(rows)
    if not rows:
        raise ValueError(f"no rows to write for {path}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])
    return path


def read_rows(path: str | Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def make_env(cfg: ExperimentConfig, mode: str = PARKINSONIAN, stim: StimConfig | None = None) -> DbsEnv:
    return DbsEnv(cfg.network, stim or cfg.stim, cfg.biomarker, cfg.training.beta_threshold, mode)


# -- calibration -------------------------------------------------------------

@dataclass
class CalibrationResult:
    threshold: float
    rows: list[dict] = field(default_factory=list)
    p_value: float = 1.0

    def betas(self, mode: str) -> np.ndarray:
        return np.array([r["beta_power"] for r in self.rows if r["mode"] == mode])

    @property
    def passed(self) -> bool:
        pd = self.betas(PARKINSONIAN)
        hl = self.betas(HEALTHY)
        return bool(np.all(pd > self.threshold) and np.all(hl < self.threshold) and self.p_value < 0.01)


def unstimulated_beta(cfg: ExperimentConfig, seed: int, mode: str, duration_ms: float = 256.0) -> float:
    net = init_network(cfg.network, seed, mode)
    trace = run_unstimulated(net, duration_ms)
    n = int(round(cfg.biomarker.window_ms * cfg.network.sampling_rate / 1000.0))
    return beta_power(trace, cfg.network.sampling_rate, n, tuple(cfg.biomarker.band),
                      tuple(cfg.biomarker.total_band))


def calibrate(cfg: ExperimentConfig, seeds: Iterable[int] | None = None) -> CalibrationResult:
    """Unstimulated relative beta in both modes; the gate for training."""
    seeds = list(cfg.calibration_seeds if seeds is None else seeds)
    res = CalibrationResult(cfg.training.beta_threshold)
    for mode in (PARKINSONIAN, HEALTHY):
        for seed in seeds:
            res.rows.append({"mode": mode, "seed": seed, "beta_power": unstimulated_beta(cfg, seed, mode)})
    pd, hl = res.betas(PARKINSONIAN), res.betas(HEALTHY)
    res.p_value = float(stats.mannwhitneyu(pd, hl, alternative="greater").pvalue)
    return res


def require_calibrated(cfg: ExperimentConfig) -> CalibrationResult:
    res = calibrate(cfg)
    if not res.passed:
        raise CalibrationError(
            "environment config fails the beta-separation check "
            f"(parkinsonian min {res.betas(PARKINSONIAN).min():.3f}, "
            f"healthy max {res.betas(HEALTHY).max():.3f}, threshold {res.threshold})"
        )
    return res


# -- rollouts ------------------------------------------------------------------

def reseed_steps(n: int, total: int) -> list[int]:
    """Steps (0-based) at which the environment is re-seeded."""
    if n <= 0:
        raise ConfigError(f"seed-change interval must be positive, got {n}")
    return list(range(0, total, n))


def block_seed(eval_seed: int, block: int) -> int:
    return int(np.random.SeedSequence([eval_seed, block, 11]).generate_state(1)[0])


def greedy_policy(nets: AgentNetworks) -> Policy:
    return nets.greedy_action


def constant_policy(action: int) -> Policy:
    return lambda s: action


def rollout(policy: Policy, env: DbsEnv, eval_seed: int, steps: int,
            reseed_every: int | None = None) -> list[dict]:
    """Deterministic evaluation rollout; re-seeds every ``reseed_every`` steps."""
    n = steps if reseed_every is None else reseed_every
    resets = set(reseed_steps(n, steps))
    rows = []
    s = None
    env_seed = None
    for k in range(steps):
        if k in resets:
            env_seed = block_seed(eval_seed, k // n)
            s = env.reset(env_seed)
        a = int(policy(s))
        res = env.step(a)
        rows.append({"eval_seed": eval_seed, "step": k, "env_seed": env_seed, "action": a,
                     "beta_power": res.beta, "mean_beta": res.mean_beta, "reward": res.reward})
        s = res.state
    return rows


def _as_nets(model) -> AgentNetworks:
    if isinstance(model, AgentNetworks):
        return model
    return load_for_inference(model)


def run_seed_shift_eval(model, cfg: ExperimentConfig, n: int, episodes: int | None = None) -> dict:
    """Greedy rollouts with the environment re-seeded every ``n`` steps."""
    reseed_steps(n, 1)
    nets = _as_nets(model)
    steps = cfg.evaluation.rollout_steps if episodes is None else episodes
    env = make_env(cfg)
    rows = []
    for es in cfg.evaluation.eval_seeds:
        for r in rollout(greedy_policy(nets), env, es, steps, n):
            rows.append({"interval": n, **r})
    return {
        "interval": n,
        "mean_beta_power": float(np.mean([r["beta_power"] for r in rows])),
        "mean_reward": float(np.mean([r["reward"] for r in rows])),
        "stim_fraction": float(np.mean([r["action"] for r in rows])),
        "n_reseeds": len(reseed_steps(n, steps)),
        "rows": rows,
    }


def run_carrier_eval(model, cfg: ExperimentConfig, freq: float, steps: int | None = None) -> dict:
    """Greedy rollouts at one carrier frequency, paired with unstimulated references."""
    if not freq or freq <= 0:
        raise ConfigError(f"carrier frequency must be positive, got {freq}")
    stim = copy.deepcopy(cfg.stim)
    stim.carrier_freq = float(freq)
    stim.validate()
    nets = _as_nets(model)
    steps = cfg.evaluation.carrier_steps if steps is None else steps
    env = make_env(cfg, stim=stim)
    rows, ref = [], []
    for es in cfg.evaluation.eval_seeds:
        rows += [{"carrier_freq": float(freq), **r} for r in rollout(greedy_policy(nets), env, es, steps)]
        ref += rollout(constant_policy(0), env, es, steps)
    traj = np.array([r["beta_power"] for r in rows]).reshape(-1, steps).mean(axis=0)
    ref_traj = np.array([r["beta_power"] for r in ref]).reshape(-1, steps).mean(axis=0)
    return {
        "carrier_freq": float(freq),
        "mean_beta_power": float(traj.mean()),
        "reference_beta_power": float(ref_traj.mean()),
        "suppression": float(ref_traj.mean() - traj.mean()),
        "stim_fraction": float(np.mean([r["action"] for r in rows])),
        "trajectory": traj,
        "reference_trajectory": ref_traj,
        "rows": rows,
    }


# -- training ------------------------------------------------------------------

def train_one(cfg: ExperimentConfig, variant: str, seed: int) -> tuple[AgentNetworks, RunMetrics]:
    variant_flags(variant)
    return train(make_env(cfg), cfg.training, variant, seed)


def save_run(out: Path, nets: AgentNetworks, metrics: RunMetrics, cfg: ExperimentConfig,
             variant: str, seed: int) -> Path:
    if not metrics.rows:
        raise ValueError("empty metrics")
    out.mkdir(parents=True, exist_ok=True)
    metrics.write_csv(out / f"train_metrics_{seed}.csv")
    metrics.write_episode_csv(out / f"train_episodes_{seed}.csv")
    ckpt = checkpoint_from_agent(nets, to_dict(cfg), seed, {"variant": variant})
    path = out / f"checkpoint_{seed}.ckpt"
    save_checkpoint(ckpt, path)
    return path


def run_training(cfg: ExperimentConfig, out_dir: str | Path, seeds: list[int] | None = None,
                 variant: str | None = None, check_calibration: bool = True) -> dict[int, dict]:
    """Train one variant for each seed; writes metrics CSVs and a checkpoint per seed."""
    cfg.validate()
    variant = variant or cfg.variant
    variant_flags(variant)
    if check_calibration:
        require_calibrated(cfg)
    out = Path(out_dir) / variant
    results = {}
    for seed in (cfg.seeds if seeds is None else seeds):
        try:
            nets, metrics = train_one(cfg, variant, seed)
        except Exception as exc:
            out.mkdir(parents=True, exist_ok=True)
            (out / f"train_{seed}.partial").write_text(f"{type(exc).__name__}: {exc}\n")
            raise
        ckpt = save_run(out, nets, metrics, cfg, variant, seed)
        results[seed] = {"metrics": metrics, "checkpoint": ckpt, "nets": nets}
    emit_training_plots({variant: [r["metrics"] for r in results.values()]}, out)
    return results


def episode_curves(runs: list[RunMetrics]) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    eps = [m.episodes() for m in runs]
    x = np.array([e["episode"] for e in eps[0]])
    beta = np.mean([[e["mean_beta_power"] for e in ep] for ep in eps], axis=0)
    ret = np.mean([[e["cumulative_reward"] for e in ep] for ep in eps], axis=0)
    return x, beta, ret


def emit_training_plots(runs: dict[str, list[RunMetrics]], out_dir: Path, prefix: str = "train") -> list[Path]:
    curves = {v: episode_curves(ms) for v, ms in runs.items() if ms}
    if not curves:
        raise ValueError("no metrics to plot")
    return plotting.training_curves(curves, out_dir, prefix)


def final_window_beta(metrics: RunMetrics, last: int = 10) -> float:
    eps = metrics.episodes()[-last:]
    return float(np.mean([e["mean_beta_power"] for e in eps]))


def run_ablation(cfg: ExperimentConfig, out_dir: str | Path, seeds: list[int] | None = None,
                 check_calibration: bool = True) -> dict:
    """Train all four variants on shared seeds; aligned curves and final ranking."""
    cfg.validate()
    if check_calibration:
        require_calibrated(cfg)
    seeds = list(cfg.seeds if seeds is None else seeds)
    out = Path(out_dir)
    runs: dict[str, list[RunMetrics]] = {}
    ckpts: dict[str, dict[int, Path]] = {}
    for variant in VARIANTS:
        runs[variant] = []
        ckpts[variant] = {}
        for seed in seeds:
            log.info("ablation: training %s seed %d", variant, seed)
            nets, metrics = train_one(cfg, variant, seed)
            ckpts[variant][seed] = save_run(out / variant, nets, metrics, cfg, variant, seed)
            runs[variant].append(metrics)
    rows = []
    for variant in VARIANTS:
        for seed, m in zip(seeds, runs[variant]):
            for e in m.episodes():
                rows.append({"variant": variant, "seed": seed, **e})
    write_rows(out / "ablation_episodes.csv",
               ["variant", "seed", "episode", "mean_beta_power", "cumulative_reward"], rows)
    final = {v: float(np.mean([final_window_beta(m) for m in runs[v]])) for v in VARIANTS}
    order = sorted(VARIANTS, key=lambda v: final[v])
    summary_rows = [{"variant": v, "final_beta_power": final[v], "rank": order.index(v) + 1} for v in VARIANTS]
    write_rows(out / "ablation_summary.csv", ["variant", "final_beta_power", "rank"], summary_rows)
    emit_training_plots(runs, out, prefix="ablation")
    return {"runs": runs, "final": final, "ranking": order, "checkpoints": ckpts, "seeds": seeds}


# -- table 2 / carrier / parity -------------------------------------------------

def sign_test(wins: int, n: int) -> float:
    """One-sided sign test p-value; ties count as non-wins."""
    return float(stats.binomtest(wins, n, 0.5, alternative="greater").pvalue)


def compare_seed_shift(ckpts_a: dict[int, Path], ckpts_b: dict[int, Path], cfg: ExperimentConfig,
                       intervals: list[int] | None = None) -> list[dict]:
    """Paired seed-shift evaluation of two checkpoint sets (``a`` is the challenger)."""
    out = []
    for n in intervals or cfg.evaluation.intervals:
        per_seed = []
        for seed in sorted(ckpts_a):
            ea = run_seed_shift_eval(ckpts_a[seed], cfg, n)
            eb = run_seed_shift_eval(ckpts_b[seed], cfg, n)
            per_seed.append((ea, eb))
        psd_wins = sum(a["mean_beta_power"] < b["mean_beta_power"] for a, b in per_seed)
        rew_wins = sum(a["mean_reward"] > b["mean_reward"] for a, b in per_seed)
        k = len(per_seed)
        out.append({
            "interval": n,
            "a_mean_beta_power": float(np.mean([a["mean_beta_power"] for a, _ in per_seed])),
            "b_mean_beta_power": float(np.mean([b["mean_beta_power"] for _, b in per_seed])),
            "a_mean_reward": float(np.mean([a["mean_reward"] for a, _ in per_seed])),
            "b_mean_reward": float(np.mean([b["mean_reward"] for _, b in per_seed])),
            "psd_wins": psd_wins,
            "reward_wins": rew_wins,
            "n_seeds": k,
            "psd_p": sign_test(psd_wins, k),
            "reward_p": sign_test(rew_wins, k),
        })
    return out


def run_quantization_parity(ckpt: ModelCheckpoint | str | Path, cfg: ExperimentConfig,
                            out_dir: str | Path | None = None) -> dict:
    """Quantize, evaluate both precisions on identical seeds at the configured carrier."""
    full = ckpt if isinstance(ckpt, ModelCheckpoint) else read_checkpoint(ckpt)
    half = quantize_fp16(full)
    steps = cfg.evaluation.carrier_steps
    env = make_env(cfg)
    nets = {"fp32": load_for_inference(full), "fp16": load_for_inference(half)}
    rows = []
    for precision, net in nets.items():
        for es in cfg.evaluation.eval_seeds:
            rows += [{"precision": precision, **r} for r in rollout(greedy_policy(net), env, es, steps)]
    def traj(p):
        return np.array([r["beta_power"] for r in rows if r["precision"] == p]).reshape(-1, steps).mean(axis=0)
    a32 = np.array([r["action"] for r in rows if r["precision"] == "fp32"])
    a16 = np.array([r["action"] for r in rows if r["precision"] == "fp16"])
    t32, t16 = traj("fp32"), traj("fp16")
    states = np.random.default_rng(0).uniform(0.0, 1.0, size=(100, nets["fp32"].actor.in_dim))
    summary = {
        "fp32_payload_bytes": full.payload_nbytes(),
        "fp16_payload_bytes": half.payload_nbytes(),
        "payload_ratio": half.payload_nbytes() / full.payload_nbytes(),
        "fp32_mean_beta_power": float(t32.mean()),
        "fp16_mean_beta_power": float(t16.mean()),
        # mean per-step gap between the paired trajectories, relative to the fp32 mean
        "relative_difference": float(np.mean(np.abs(t16 - t32)) / t32.mean()),
        "action_agreement": float(np.mean(a32 == a16)),
        "max_logit_difference": float(np.max(np.abs(
            nets["fp16"].actor.forward(states) - nets["fp32"].actor.forward(states)))),
        "trajectory_fp32": t32,
        "trajectory_fp16": t16,
        "rows": rows,
    }
    if out_dir is not None:
        out = Path(out_dir)
        write_rows(out / "parity.csv", ["precision"] + ROLLOUT_COLUMNS, rows)
        write_rows(out / "parity_summary.csv", PARITY_COLUMNS, [summary])
        save_checkpoint(half, out / "checkpoint_fp16.ckpt")
        steps_x = np.arange(1, steps + 1)
        plotting.line_plot({"fp32": (steps_x, t32), "fp16": (steps_x, t16)}, out / "parity_beta.png",
                           "evaluation step", "relative beta power", hline=cfg.training.beta_threshold)
    return summary


PARITY_COLUMNS = [
    "fp32_payload_bytes", "fp16_payload_bytes", "payload_ratio", "fp32_mean_beta_power",
    "fp16_mean_beta_power", "relative_difference", "action_agreement", "max_logit_difference",
]
SEEDSHIFT_COLUMNS = ["model", "interval", "mean_beta_power", "mean_reward", "stim_fraction", "n_reseeds"]
CARRIER_COLUMNS = ["model", "carrier_freq", "mean_beta_power", "reference_beta_power", "suppression",
                   "stim_fraction"]


def seed_shift_report(models: dict[str, object], cfg: ExperimentConfig, out_dir: str | Path) -> list[dict]:
    out = Path(out_dir)
    summaries, rows = [], []
    for label, model in models.items():
        for n in cfg.evaluation.intervals:
            s = run_seed_shift_eval(model, cfg, n)
            summaries.append({"model": label, **{k: s[k] for k in SEEDSHIFT_COLUMNS[1:]}})
            rows += [{"model": label, **r} for r in s["rows"]]
    write_rows(out / "seedshift.csv", ["model", "interval"] + ROLLOUT_COLUMNS, rows)
    write_rows(out / "seedshift_summary.csv", SEEDSHIFT_COLUMNS, summaries)
    series = {}
    for label in models:
        ss = [s for s in summaries if s["model"] == label]
        series[label] = (np.array([s["interval"] for s in ss]), np.array([s["mean_reward"] for s in ss]))
    plotting.line_plot(series, out / "seedshift_reward.png", "seed-change interval (steps)", "mean reward")
    return summaries


def carrier_report(models: dict[str, object], cfg: ExperimentConfig, out_dir: str | Path) -> list[dict]:
    out = Path(out_dir)
    summaries, rows, series = [], [], {}
    for label, model in models.items():
        for f in cfg.evaluation.carrier_freqs:
            s = run_carrier_eval(model, cfg, f)
            summaries.append({"model": label, **{k: s[k] for k in CARRIER_COLUMNS[1:]}})
            rows += [{"model": label, **r} for r in s["rows"]]
            x = np.arange(1, len(s["trajectory"]) + 1)
            series[f"{label} {f:g} Hz"] = (x, s["trajectory"])
    write_rows(out / "carrier.csv", ["model", "carrier_freq"] + ROLLOUT_COLUMNS, rows)
    write_rows(out / "carrier_summary.csv", CARRIER_COLUMNS, summaries)
    plotting.line_plot(series, out / "carrier_beta.png", "evaluation step", "relative beta power",
                       hline=cfg.training.beta_threshold)
    return summaries
