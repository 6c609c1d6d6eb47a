"""Independent reference implementations used to derive frozen test values.

Nothing here imports the package; everything is plain Python or numpy so
that a bug in the library cannot leak into its own oracle.
"""
from __future__ import annotations

import math

import numpy as np


def reward_scalar(p: float, thr: float = 0.35) -> float:
    d = (p - thr) * 10.0
    if p < thr:
        return d * d
    return -(d * d) if d != 0 else 0.0


def _rates(v):
    am = 1.0 if abs(v + 40.0) < 1e-9 else 0.1 * (v + 40.0) / (1.0 - math.exp(-(v + 40.0) / 10.0))
    bm = 4.0 * math.exp(-(v + 65.0) / 18.0)
    ah = 0.07 * math.exp(-(v + 65.0) / 20.0)
    bh = 1.0 / (1.0 + math.exp(-(v + 35.0) / 10.0))
    an = 0.1 if abs(v + 55.0) < 1e-9 else 0.01 * (v + 55.0) / (1.0 - math.exp(-(v + 55.0) / 10.0))
    bn = 0.125 * math.exp(-(v + 65.0) / 80.0)
    return am, bm, ah, bh, an, bn


def hh_rhs(y, i_ext):
    v, m, h, n = y
    am, bm, ah, bh, an, bn = _rates(v)
    i_ion = 120.0 * m**3 * h * (v - 50.0) + 36.0 * n**4 * (v + 77.0) + 0.3 * (v + 54.4)
    return (i_ext - i_ion, am * (1 - m) - bm * m, ah * (1 - h) - bh * h, an * (1 - n) - bn * n)


def hh_rest(i_ext=0.0):
    """Bisection on the steady-state current balance."""
    def f(v):
        am, bm, ah, bh, an, bn = _rates(v)
        m, h, n = am / (am + bm), ah / (ah + bh), an / (an + bn)
        return i_ext - (120.0 * m**3 * h * (v - 50.0) + 36.0 * n**4 * (v + 77.0) + 0.3 * (v + 54.4))
    lo, hi = -90.0, -50.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(lo) * f(mid) <= 0:
            hi = mid
        else:
            lo = mid
    v = 0.5 * (lo + hi)
    am, bm, ah, bh, an, bn = _rates(v)
    return v, am / (am + bm), ah / (ah + bh), an / (an + bn)


def hh_firing_rate(i_ext, dt=0.001, t_end=200.0, t_skip=50.0):
    """Plain RK4 from rest; spikes/s from upward 0 mV crossings after ``t_skip``."""
    y = hh_rest(0.0)
    times = []
    t = 0.0
    for _ in range(int(round(t_end / dt))):
        k1 = hh_rhs(y, i_ext)
        k2 = hh_rhs([a + 0.5 * dt * b for a, b in zip(y, k1)], i_ext)
        k3 = hh_rhs([a + 0.5 * dt * b for a, b in zip(y, k2)], i_ext)
        k4 = hh_rhs([a + dt * b for a, b in zip(y, k3)], i_ext)
        new = [a + dt / 6.0 * (p + 2 * q + 2 * r + s) for a, p, q, r, s in zip(y, k1, k2, k3, k4)]
        t += dt
        if y[0] < 0.0 <= new[0] and t > t_skip:
            times.append(t)
        y = new
    isi = np.diff(times)
    return 1000.0 / isi.mean()


def relative_beta_sine(freq, fs=2000.0, n=256, pad=8):
    """Hann-windowed, zero-padded periodogram with trapezoidal band integrals."""
    t = np.arange(n) / fs
    x = np.sin(2 * np.pi * freq * t)
    x = x - x.mean()
    w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    nfft = pad * n
    spec = np.abs(np.fft.fft(x * w, nfft)[: nfft // 2 + 1]) ** 2
    f = np.arange(nfft // 2 + 1) * fs / nfft

    def integ(lo, hi):
        s = (f >= lo) & (f <= hi)
        ff, pp = f[s], spec[s]
        return float(np.sum(0.5 * (pp[1:] + pp[:-1]) * np.diff(ff)))
    return integ(13, 35) / integ(1, 200)
