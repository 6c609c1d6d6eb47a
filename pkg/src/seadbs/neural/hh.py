"""Classic Hodgkin-Huxley membrane kinetics.

Units throughout: mV, ms, mS/cm^2, uA/cm^2, uF/cm^2.  The rate functions are
numba-compiled so the network kernel can inline them; they are equally
callable from plain Python with floats or numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit
from scipy.optimize import brentq

C_M = 1.0
G_NA = 120.0
G_K = 36.0
G_L = 0.3
E_NA = 50.0
E_K = -77.0
E_L = -54.4


@njit(cache=True)
def _vtrap(x, y):
    # x / (1 - exp(-x/y)) with the removable singularity at x = 0
    if abs(x / y) < 1e-6:
        return y * (1.0 + 0.5 * x / y)
    return x / -np.expm1(-x / y)


@njit(cache=True)
def alpha_m(v):
    return 0.1 * _vtrap(v + 40.0, 10.0)


@njit(cache=True)
def beta_m(v):
    return 4.0 * np.exp(-(v + 65.0) / 18.0)


@njit(cache=True)
def alpha_h(v):
    return 0.07 * np.exp(-(v + 65.0) / 20.0)


@njit(cache=True)
def beta_h(v):
    return 1.0 / (1.0 + np.exp(-(v + 35.0) / 10.0))


@njit(cache=True)
def alpha_n(v):
    return 0.01 * _vtrap(v + 55.0, 10.0)


@njit(cache=True)
def beta_n(v):
    return 0.125 * np.exp(-(v + 65.0) / 80.0)


@njit(cache=True)
def derivs(v, m, h, n, i_in):
    """Scalar HH right-hand side; ``i_in`` is the net injected current."""
    i_na = G_NA * m * m * m * h * (v - E_NA)
    i_k = G_K * n * n * n * n * (v - E_K)
    i_l = G_L * (v - E_L)
    dv = (i_in - i_na - i_k - i_l) / C_M
    am = alpha_m(v)
    bm = beta_m(v)
    ah = alpha_h(v)
    bh = beta_h(v)
    an = alpha_n(v)
    bn = beta_n(v)
    dm = am * (1.0 - m) - bm * m
    dh = ah * (1.0 - h) - bh * h
    dn = an * (1.0 - n) - bn * n
    return dv, dm, dh, dn


def steady_state(v: float) -> tuple[float, float, float]:
    """Gating values (m, h, n) at equilibrium for a clamped potential."""
    m = alpha_m(v) / (alpha_m(v) + beta_m(v))
    h = alpha_h(v) / (alpha_h(v) + beta_h(v))
    n = alpha_n(v) / (alpha_n(v) + beta_n(v))
    return float(m), float(h), float(n)


def _net_current(v: float, i_ext: float) -> float:
    m, h, n = steady_state(v)
    return derivs(v, m, h, n, i_ext)[0]


def resting_potential(i_ext: float = 0.0) -> float:
    """Root of dV/dt with every gate at its steady state (bracketed search)."""
    return brentq(_net_current, -90.0, -50.0, args=(i_ext,), xtol=1e-12)


@dataclass
class NeuronState:
    v: float
    m: float
    h: float
    n_gate: float
    syn_conductances: np.ndarray | None = None

    @classmethod
    def resting(cls, i_ext: float = 0.0) -> "NeuronState":
        v = resting_potential(i_ext)
        m, h, n = steady_state(v)
        return cls(v=v, m=m, h=h, n_gate=n)


class NeuronStateDerivative(NamedTuple):
    dv: float
    dm: float
    dh: float
    dn: float


def hh_derivatives(state: NeuronState, i_ext: float) -> NeuronStateDerivative:
    """Time derivatives of an isolated neuron under external current ``i_ext``.

    Synaptic current, if any, must already be folded into ``i_ext``.
    """
    return NeuronStateDerivative(*derivs(state.v, state.m, state.h, state.n_gate, i_ext))


@njit(cache=True)
def _rk4_single(v, m, h, n, i_ext, dt, n_steps, v_out):
    half = 0.5 * dt
    for k in range(n_steps):
        k1 = derivs(v, m, h, n, i_ext)
        k2 = derivs(v + half * k1[0], m + half * k1[1], h + half * k1[2], n + half * k1[3], i_ext)
        k3 = derivs(v + half * k2[0], m + half * k2[1], h + half * k2[2], n + half * k2[3], i_ext)
        k4 = derivs(v + dt * k3[0], m + dt * k3[1], h + dt * k3[2], n + dt * k3[3], i_ext)
        v += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        m += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        h += dt / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
        n += dt / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
        v_out[k] = v
    return v, m, h, n


def simulate_single(
    state: NeuronState, i_ext: float, duration: float, dt: float = 0.02
) -> np.ndarray:
    """Integrate one isolated neuron with RK4; returns v after every step."""
    n_steps = int(round(duration / dt))
    out = np.empty(n_steps)
    _rk4_single(state.v, state.m, state.h, state.n_gate, float(i_ext), dt, n_steps, out)
    return out


def spike_times(v: np.ndarray, dt: float, threshold: float = 0.0) -> np.ndarray:
    """Upward threshold crossings, linearly interpolated (ms)."""
    idx = np.flatnonzero((v[:-1] < threshold) & (v[1:] >= threshold))
    frac = (threshold - v[idx]) / (v[idx + 1] - v[idx])
    return (idx + 1 + frac) * dt
