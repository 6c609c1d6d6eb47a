"""Compiled inner loop: RK4 over the whole network for one block of substeps."""
from __future__ import annotations

import numpy as np
from numba import njit

from .hh import derivs


@njit(cache=True)
def _rhs(v, m, h, n, i_ext, gsum, gerev):
    return derivs(v, m, h, n, i_ext - (gsum * v - gerev))


@njit(cache=True)
def advance(
    v, m, h, n, g, pending, last_spike, clock, n_sub, dt,
    bias, noise, stim, stim_lo, stim_hi,
    pop_of, edge_src, edge_dst, edge_w, edge_erev, edge_decay, edge_delay, mask,
    threshold, refractory_steps, rec_lo, rec_every, trace, spike_count,
):
    """Advance ``n_sub`` substeps in place.

    Synaptic conductances are held fixed within a substep and decay exactly
    afterwards.  ``pending`` is a ring of conductance increments indexed by
    arrival substep, which implements the axonal delays.
    """
    n_neurons = v.shape[0]
    n_edges = g.shape[0]
    n_slots = pending.shape[0]
    per_pop = g.shape[1]
    gsum = np.zeros(n_neurons)
    gerev = np.zeros(n_neurons)
    half = 0.5 * dt
    sixth = dt / 6.0
    for k in range(n_sub):
        c = clock + k
        slot = c % n_slots
        for e in range(n_edges):
            for j in range(per_pop):
                g[e, j] += pending[slot, e, j]
                pending[slot, e, j] = 0.0
        gsum[:] = 0.0
        gerev[:] = 0.0
        for e in range(n_edges):
            base = edge_dst[e] * per_pop
            for j in range(per_pop):
                gsum[base + j] += g[e, j]
                gerev[base + j] += g[e, j] * edge_erev[e]
        for i in range(n_neurons):
            i_ext = bias[i] + noise[k, i]
            if stim[k] != 0.0 and stim_lo <= i < stim_hi:
                i_ext += stim[k]
            v0 = v[i]
            m0 = m[i]
            h0 = h[i]
            n0 = n[i]
            gs = gsum[i]
            ge = gerev[i]
            k1 = _rhs(v0, m0, h0, n0, i_ext, gs, ge)
            k2 = _rhs(v0 + half * k1[0], m0 + half * k1[1], h0 + half * k1[2], n0 + half * k1[3], i_ext, gs, ge)
            k3 = _rhs(v0 + half * k2[0], m0 + half * k2[1], h0 + half * k2[2], n0 + half * k2[3], i_ext, gs, ge)
            k4 = _rhs(v0 + dt * k3[0], m0 + dt * k3[1], h0 + dt * k3[2], n0 + dt * k3[3], i_ext, gs, ge)
            v1 = v0 + sixth * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            m[i] = m0 + sixth * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
            h[i] = h0 + sixth * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
            n[i] = n0 + sixth * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3])
            v[i] = v1
            if v0 < threshold <= v1 and c + 1 - last_spike[i] >= refractory_steps:
                last_spike[i] = c + 1
                spike_count[i] += 1
                p = pop_of[i]
                src_idx = i - p * per_pop
                for e in range(n_edges):
                    if edge_src[e] == p:
                        s2 = (c + 1 + edge_delay[e]) % n_slots
                        for j in range(per_pop):
                            if mask[e, src_idx, j]:
                                pending[s2, e, j] += edge_w[e]
        for e in range(n_edges):
            for j in range(per_pop):
                g[e, j] *= edge_decay[e]
        if (k + 1) % rec_every == 0:
            r = (k + 1) // rec_every - 1
            for j in range(per_pop):
                trace[r, j] = v[rec_lo + j]
    return trace
