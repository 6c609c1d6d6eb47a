"""Training loop for the four learner variants."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..config import VARIANTS, ConfigError, TrainingConfig
from ..nn import AdamState
from .ddpg import (
    N_ACTIONS,
    AgentNetworks,
    actor_update,
    critic_update,
    predict_reward,
    predictive_update,
    soft_update,
)
from .exploration import AnnealSchedule, anneal_temperature, epsilon_at, gumbel_softmax, sample_gumbel
from .replay import ReplayBuffer, Transition

log = logging.getLogger(__name__)

# variant -> (predictive Q-target, Gumbel-Softmax exploration)
VARIANT_FLAGS = {
    "baseline": (False, False),
    "baseline_pm": (True, False),
    "baseline_gs": (False, True),
    "sea_dbs": (True, True),
}

STEP_COLUMNS = [
    "episode", "step", "beta_power", "reward", "r_hat", "tau",
    "critic_loss", "actor_loss", "pred_loss", "action",
]
EPISODE_COLUMNS = ["episode", "mean_beta_power", "cumulative_reward"]


def variant_flags(variant: str) -> tuple[bool, bool]:
    try:
        return VARIANT_FLAGS[variant]
    except KeyError:
        raise ConfigError(f"unknown variant {variant!r}; expected one of {VARIANTS}") from None


def episode_seed(seed: int, episode: int) -> int:
    """Environment seed for a training episode, decorrelated from ``seed``."""
    return int(np.random.SeedSequence([seed, episode, 7]).generate_state(1)[0])


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    return repr(float(x))


@dataclass
class RunMetrics:
    rows: list[dict] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([np.nan if r[name] is None else r[name] for r in self.rows], dtype=float)

    def episodes(self) -> list[dict]:
        out: dict[int, list] = {}
        for r in self.rows:
            out.setdefault(r["episode"], []).append(r)
        return [
            {
                "episode": ep,
                "mean_beta_power": float(np.mean([r["beta_power"] for r in rows])),
                "cumulative_reward": float(np.sum([r["reward"] for r in rows])),
            }
            for ep, rows in sorted(out.items())
        ]

    def write_csv(self, path: str | Path) -> None:
        if not self.rows:
            raise ValueError("no metrics to write")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(STEP_COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(r[c]) for c in STEP_COLUMNS])

    def write_episode_csv(self, path: str | Path) -> None:
        eps = self.episodes()
        if not eps:
            raise ValueError("no metrics to write")
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(EPISODE_COLUMNS)
            for e in eps:
                w.writerow([_fmt(e[c]) for c in EPISODE_COLUMNS])


def build_agent(n_obs: int, cfg: TrainingConfig, seed: int) -> AgentNetworks:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    return AgentNetworks.build(
        n_obs, rng, hidden=cfg.hidden, gamma=cfg.gamma, rho=cfg.rho,
        beta_threshold=cfg.beta_threshold, tau_min=cfg.tau_min,
    )


def train(env, cfg: TrainingConfig, variant: str = "sea_dbs", seed: int = 0,
          pm: bool | None = None, gs: bool | None = None) -> tuple[AgentNetworks, RunMetrics]:
    """Run ``cfg.episodes`` x ``cfg.steps_per_episode`` interaction steps.

    ``pm`` / ``gs`` override the flags implied by ``variant``.
    """
    cfg.validate()
    use_pm, use_gs = variant_flags(variant)
    use_pm = use_pm if pm is None else pm
    use_gs = use_gs if gs is None else gs

    nets = build_agent(env.n_obs, cfg, seed)
    a_opt = AdamState.for_net(nets.actor, cfg.actor_lr)
    c_opt = AdamState.for_net(nets.critic, cfg.critic_lr)
    p_opt = AdamState.for_net(nets.predictor, cfg.pred_lr)
    explore_rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    buffer = ReplayBuffer(cfg.buffer_size, env.n_obs, np.random.default_rng(np.random.SeedSequence([seed, 2])))
    sched = AnnealSchedule(cfg.tau0, cfg.tau_min, cfg.lambda_tau)
    total = cfg.episodes * cfg.steps_per_episode
    metrics = RunMetrics()
    t = 0
    for ep in range(cfg.episodes):
        s = env.reset(episode_seed(seed, ep))
        for step in range(cfg.steps_per_episode):
            tau = anneal_temperature(t if cfg.anneal_per == "step" else ep, sched)
            logits = nets.actor.forward(s)
            if use_gs:
                a_rel, _ = gumbel_softmax(logits, tau, rng=explore_rng)
                action = int(np.argmax(a_rel))
            else:
                eps = epsilon_at(t / max(1, total - 1), cfg.eps_start, cfg.eps_end)
                if explore_rng.random() < eps:
                    action = int(explore_rng.integers(N_ACTIONS))
                else:
                    action = int(np.argmax(logits))
                a_rel = np.eye(N_ACTIONS)[action]
            res = env.step(action)
            r_hat = predict_reward(nets.predictor, s, a_rel)
            buffer.push(Transition(s, a_rel, logits, res.reward, r_hat, res.state))

            lc = la = lp = None
            if len(buffer) >= cfg.batch_size:
                batch = buffer.sample(cfg.batch_size)
                lc = critic_update(batch, nets, c_opt, predictive=use_pm,
                                   replace_reward=use_pm and cfg.replace_reward)
                if use_gs:
                    noise = sample_gumbel(explore_rng, (cfg.batch_size, N_ACTIONS))
                    la = actor_update(batch.s, nets, a_opt, tau, noise)
                else:
                    la = actor_update(batch.s, nets, a_opt, cfg.tau_min, np.zeros((cfg.batch_size, N_ACTIONS)))
                lp = predictive_update(batch, nets.predictor, p_opt)
                soft_update(nets.actor, nets.target_actor, cfg.rho)
                soft_update(nets.critic, nets.target_critic, cfg.rho)

            metrics.rows.append({
                "episode": ep, "step": step, "beta_power": res.beta, "reward": res.reward,
                "r_hat": r_hat, "tau": tau, "critic_loss": lc, "actor_loss": la,
                "pred_loss": lp, "action": action,
            })
            s = res.state
            t += 1
        if log.isEnabledFor(logging.INFO) and (ep + 1) % 10 == 0:
            last = metrics.episodes()[-1]
            log.info("%s seed=%d episode %d: beta=%.3f return=%.2f", variant, seed, ep + 1,
                     last["mean_beta_power"], last["cumulative_reward"])
    return nets, metrics
