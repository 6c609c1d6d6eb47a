"""Actor-critic learner: Q-targets, network updates and target tracking."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import AdamState, Mlp, NonFiniteError, ShapeError, adam_step, mse
from .exploration import softmax, softmax_backward
from .replay import Batch

N_ACTIONS = 2


@dataclass
class AgentNetworks:
    actor: Mlp
    critic: Mlp
    target_actor: Mlp
    target_critic: Mlp
    predictor: Mlp
    gamma: float = 0.99
    rho: float = 0.005
    beta_threshold: float = 0.35
    tau_min: float = 0.1

    def __post_init__(self):
        if not 0 <= self.gamma < 1:
            raise ValueError("gamma must be in [0, 1)")
        if not 0 < self.rho <= 1:
            raise ValueError("rho must be in (0, 1]")

    @classmethod
    def build(cls, n_obs: int, rng: np.random.Generator, hidden: int = 64, **kw) -> "AgentNetworks":
        acts = ["relu", "relu", "identity"]
        actor = Mlp.build([n_obs, hidden, hidden, N_ACTIONS], acts, rng)
        critic = Mlp.build([n_obs + N_ACTIONS, hidden, hidden, 1], acts, rng)
        predictor = Mlp.build([n_obs + N_ACTIONS, hidden, hidden, 1], acts, rng)
        return cls(actor, critic, actor.copy(), critic.copy(), predictor, **kw)

    def named_networks(self) -> dict[str, Mlp]:
        return {
            "actor": self.actor,
            "critic": self.critic,
            "target_actor": self.target_actor,
            "target_critic": self.target_critic,
            "predictor": self.predictor,
        }

    def greedy_action(self, s) -> int:
        return int(np.argmax(self.actor.forward(s)))


def _sa(s, a) -> np.ndarray:
    s = np.atleast_2d(np.asarray(s, dtype=float))
    a = np.atleast_2d(np.asarray(a, dtype=float))
    return np.concatenate([s, a], axis=1)


def predict_reward(f: Mlp, s, a) -> np.ndarray | float:
    """Auxiliary reward estimate for (state, relaxed action); scalar for a single pair."""
    out = f.forward(_sa(s, a))[:, 0]
    return float(out[0]) if np.ndim(s) == 1 else out


def target_policy(nets: AgentNetworks, s_next) -> np.ndarray:
    """Noise-free target-actor action: softmax of its logits at ``tau_min``."""
    return softmax(np.atleast_2d(nets.target_actor.forward(s_next)) / nets.tau_min)


def _bootstrap(nets: AgentNetworks, s_next) -> np.ndarray:
    a_next = target_policy(nets, s_next)
    return nets.target_critic.forward(_sa(s_next, a_next))[:, 0]


def q_target_baseline(r, s_next, nets: AgentNetworks):
    q = np.asarray(r, dtype=float) + nets.gamma * _bootstrap(nets, s_next)
    return float(q[0]) if np.ndim(s_next) == 1 else q


def q_target_predictive(r, r_hat, s_next, nets: AgentNetworks):
    q = np.asarray(r, dtype=float) + np.asarray(r_hat, dtype=float) + nets.gamma * _bootstrap(nets, s_next)
    return float(q[0]) if np.ndim(s_next) == 1 else q


def _check(loss: float, what: str) -> None:
    if not np.isfinite(loss):
        raise NonFiniteError(f"non-finite {what} loss")


def critic_update(batch: Batch, nets: AgentNetworks, opt: AdamState,
                  predictive: bool = True, replace_reward: bool = False) -> float:
    """One regression step of Q(s, a) toward the (stop-gradient) bootstrap target."""
    if replace_reward:
        target = q_target_baseline(batch.r_hat, batch.s_next, nets)
    elif predictive:
        target = q_target_predictive(batch.r, batch.r_hat, batch.s_next, nets)
    else:
        target = q_target_baseline(batch.r, batch.s_next, nets)
    q, cache = nets.critic.forward_cache(_sa(batch.s, batch.a))
    loss, dq = mse(q[:, 0], target)
    _check(loss, "critic")
    grads, _ = nets.critic.backward(cache, dq[:, None])
    adam_step(nets.critic, grads, opt)
    return loss


def actor_objective(actor: Mlp, critic: Mlp, s, noise, tau: float):
    """Actor loss ``-mean Q(s, relaxed(actor(s)))`` and its parameter gradients.

    ``noise`` is the Gumbel realisation (zeros for a deterministic softmax);
    the critic only propagates gradient, its parameters are untouched.
    """
    s = np.atleast_2d(np.asarray(s, dtype=float))
    logits, a_cache = actor.forward_cache(s)
    a = softmax((logits + noise) / tau)
    q, c_cache = critic.forward_cache(_sa(s, a))
    n = s.shape[0]
    loss = -float(q.mean())
    _, d_in = critic.backward(c_cache, np.full((n, 1), -1.0 / n))
    d_a = d_in[:, -N_ACTIONS:]
    d_logits = softmax_backward(a, d_a, tau)
    grads, _ = actor.backward(a_cache, d_logits)
    return loss, grads


def actor_update(batch_s, nets: AgentNetworks, opt: AdamState, tau: float, noise) -> float:
    loss, grads = actor_objective(nets.actor, nets.critic, batch_s, noise, tau)
    _check(loss, "actor")
    adam_step(nets.actor, grads, opt)
    return loss


def predictive_update(batch: Batch, f: Mlp, opt: AdamState) -> float:
    pred, cache = f.forward_cache(_sa(batch.s, batch.a))
    loss, d = mse(pred[:, 0], batch.r)
    _check(loss, "predictive")
    grads, _ = f.backward(cache, d[:, None])
    adam_step(f, grads, opt)
    return loss


def soft_update(online: Mlp, target: Mlp, rho: float) -> Mlp:
    """Polyak averaging ``target <- rho * online + (1 - rho) * target`` in place."""
    if not 0 < rho <= 1:
        raise ValueError("rho must be in (0, 1]")
    src, dst = online.params(), target.params()
    if len(src) != len(dst) or any(a.shape != b.shape for a, b in zip(src, dst)):
        raise ShapeError("online and target networks differ in shape")
    for p, tp in zip(src, dst):
        tp *= 1.0 - rho
        tp += rho * p
    return target
