"""Central finite differences for the acceptance gradient check."""
from __future__ import annotations

import numpy as np

from seadbs.agent.ddpg import _sa, actor_objective
from seadbs.agent.exploration import softmax
from seadbs.nn import Mlp, mse

EPS = 1e-6


def numeric_grads(loss_fn, params: list[np.ndarray]) -> list[np.ndarray]:
    out = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = p[i]
            p[i] = old + EPS
            up = loss_fn()
            p[i] = old - EPS
            down = loss_fn()
            p[i] = old
            g[i] = (up - down) / (2 * EPS)
        out.append(g)
    return out


def rel_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.linalg.norm(a) + np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / denom)


def worst(analytic, numeric) -> float:
    return max(rel_error(a, n) for a, n in zip(analytic, numeric))


def mse_case(seed: int, acts=("relu", "relu", "identity")) -> float:
    """Critic / predictor regression loss: parameters and input."""
    rng = np.random.default_rng(seed)
    n_in = int(rng.integers(2, 8))
    net = Mlp.build([n_in, 16, 16, 1], list(acts), rng)
    x = rng.uniform(-1, 1, size=(int(rng.integers(1, 6)), n_in))
    y = rng.normal(size=x.shape[0])

    def loss():
        return mse(net.forward(x)[:, 0], y)[0]

    pred, cache = net.forward_cache(x)
    _, d = mse(pred[:, 0], y)
    grads, dx = net.backward(cache, d[:, None])
    err = worst(grads, numeric_grads(loss, net.params()))
    dx_num = numeric_grads(lambda: mse(net.forward(x)[:, 0], y)[0], [x])[0]
    return max(err, rel_error(dx, dx_num))


def actor_case(seed: int) -> float:
    """Actor loss -mean Q(s, softmax((logits + g) / tau)) with frozen Gumbel noise."""
    rng = np.random.default_rng(seed)
    n_obs = int(rng.integers(2, 7))
    actor = Mlp.build([n_obs, 16, 16, 2], ["relu", "relu", "identity"], rng)
    critic = Mlp.build([n_obs + 2, 16, 16, 1], ["relu", "relu", "identity"], rng)
    s = rng.uniform(0, 1, size=(int(rng.integers(1, 6)), n_obs))
    noise = -np.log(-np.log(rng.uniform(1e-6, 1 - 1e-6, size=(s.shape[0], 2))))
    tau = float(rng.uniform(0.2, 2.0))

    def loss():
        a = softmax((actor.forward(s) + noise) / tau)
        return -float(critic.forward(_sa(s, a)).mean())

    value, grads = actor_objective(actor, critic, s, noise, tau)
    assert abs(value - loss()) < 1e-12
    return worst(grads, numeric_grads(loss, actor.params()))
