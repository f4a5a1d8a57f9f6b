"""Pure-numpy recurrence kernels (fallback backend).

These are the reference implementations of the sequential hot loops; the
Cython module `_recurrence_cy` mirrors them function-for-function. Gate
layout inside every (4H,) block is [input | forget | cell | output].

Convention shared with the compiled kernels: input projections (x @ Wx + b)
are computed by the caller in bulk, so the kernels only run the part that is
inherently sequential. Weight gradients are likewise assembled by the caller
from the returned pre-activation gradients.
"""

from __future__ import annotations

import numpy as np


def _sig(x):
    return 1.0 / (1.0 + np.exp(-x))


def lstm_seq_forward(pre, wh):
    """Run an LSTM over precomputed gate inputs.

    pre : (M, 4H) x_t @ Wx + b for every step
    wh  : (H, 4H) recurrent weights
    Returns (hs, cs, gates, tcs) where gates holds the activated gate values.
    Initial hidden and cell states are zero.
    """
    m, g4 = pre.shape
    h = g4 // 4
    hs = np.zeros((m, h))
    cs = np.zeros((m, h))
    gates = np.empty((m, g4))
    tcs = np.zeros((m, h))
    hv = np.zeros(h)
    cv = np.zeros(h)
    for t in range(m):
        z = pre[t] + hv @ wh
        gi = _sig(z[:h])
        gf = _sig(z[h : 2 * h])
        gg = np.tanh(z[2 * h : 3 * h])
        go = _sig(z[3 * h :])
        cv = gf * cv + gi * gg
        tc = np.tanh(cv)
        hv = go * tc
        gates[t, :h] = gi
        gates[t, h : 2 * h] = gf
        gates[t, 2 * h : 3 * h] = gg
        gates[t, 3 * h :] = go
        cs[t] = cv
        tcs[t] = tc
        hs[t] = hv
    return hs, cs, gates, tcs


def _cell_backward(dht, dc, gates_row, tc, cprev, h):
    gi = gates_row[:h]
    gf = gates_row[h : 2 * h]
    gg = gates_row[2 * h : 3 * h]
    go = gates_row[3 * h :]
    do = dht * tc
    dcv = dc + dht * go * (1.0 - tc * tc)
    dz = np.empty(4 * h)
    dz[:h] = dcv * gg * gi * (1.0 - gi)
    dz[h : 2 * h] = dcv * cprev * gf * (1.0 - gf)
    dz[2 * h : 3 * h] = dcv * gi * (1.0 - gg * gg)
    dz[3 * h :] = do * go * (1.0 - go)
    return dz, dcv * gf


def lstm_seq_backward(dhs, wh, hs, cs, gates, tcs):
    """Backprop through lstm_seq_forward; returns dpre (M, 4H)."""
    m, h = hs.shape
    dpre = np.zeros((m, 4 * h))
    dh = np.zeros(h)
    dc = np.zeros(h)
    for t in range(m - 1, -1, -1):
        dht = dhs[t] + dh
        cprev = cs[t - 1] if t > 0 else np.zeros(h)
        dz, dc = _cell_backward(dht, dc, gates[t], tcs[t], cprev, h)
        dpre[t] = dz
        dh = dz @ wh.T
    return dpre


def lstm_cell_step(x, hv, cv, wx, wh, b):
    """Single LSTM cell step (used for autoregressive generation)."""
    h = wh.shape[0]
    z = x @ wx + hv @ wh + b
    gi = _sig(z[:h])
    gf = _sig(z[h : 2 * h])
    gg = np.tanh(z[2 * h : 3 * h])
    go = _sig(z[3 * h :])
    cv = gf * cv + gi * gg
    hv = go * np.tanh(cv)
    return hv, cv


def _lrelu(x):
    return np.where(x > 0, x, 0.01 * x)


def _lrelu_slope(a):
    return np.where(a > 0, 1.0, 0.01)


def accum_seq_forward(
    pre0fix, wx0fb, wh0, wx1, b1, wh1, wx2, b2, wh2, w1, c1, w2, c2, w3, c3, w4, c4
):
    """Autoregressive height accumulator: three stacked LSTM layers plus an
    MLP head predict a per-step height delta whose running sum is fed back
    into the first layer's input.

    pre0fix : (M, 4H) gate inputs from the non-recurrent input columns
    wx0fb   : (4H,)  input weights of the fed-back accumulated height
    Returns (hacc (M+1,), dh (M,), caches).
    """
    m = pre0fix.shape[0]
    h = wh0.shape[0]
    hacc = np.zeros(m + 1)
    dh = np.zeros(m)
    g0 = np.empty((m, 4 * h)); cs0 = np.zeros((m, h)); tc0 = np.zeros((m, h)); hs0 = np.zeros((m, h))
    g1 = np.empty((m, 4 * h)); cs1 = np.zeros((m, h)); tc1 = np.zeros((m, h)); hs1 = np.zeros((m, h))
    g2 = np.empty((m, 4 * h)); cs2 = np.zeros((m, h)); tc2 = np.zeros((m, h)); hs2 = np.zeros((m, h))
    a1s = np.empty((m, w1.shape[1])); a2s = np.empty((m, w2.shape[1])); a3s = np.empty((m, w3.shape[1]))
    state = [(np.zeros(h), np.zeros(h)) for _ in range(3)]

    def step(z, gcache, ccache, tcache, hcache, t, layer):
        hv, cv = state[layer]
        gi = _sig(z[:h]); gf = _sig(z[h : 2 * h]); gg = np.tanh(z[2 * h : 3 * h]); go = _sig(z[3 * h :])
        cv = gf * cv + gi * gg
        tc = np.tanh(cv)
        hv = go * tc
        gcache[t, :h] = gi; gcache[t, h : 2 * h] = gf
        gcache[t, 2 * h : 3 * h] = gg; gcache[t, 3 * h :] = go
        ccache[t] = cv; tcache[t] = tc; hcache[t] = hv
        state[layer] = (hv, cv)
        return hv

    for t in range(m):
        h0 = step(pre0fix[t] + hacc[t] * wx0fb + state[0][0] @ wh0, g0, cs0, tc0, hs0, t, 0)
        h1 = step(b1 + h0 @ wx1 + state[1][0] @ wh1, g1, cs1, tc1, hs1, t, 1)
        h2 = step(b2 + h1 @ wx2 + state[2][0] @ wh2, g2, cs2, tc2, hs2, t, 2)
        a1 = _lrelu(h2 @ w1 + c1)
        a2 = _lrelu(a1 @ w2 + c2)
        a3 = _lrelu(a2 @ w3 + c3)
        d = float(a3 @ w4[:, 0] + c4[0])
        a1s[t] = a1; a2s[t] = a2; a3s[t] = a3
        dh[t] = d
        hacc[t + 1] = hacc[t] + d
    caches = (g0, cs0, tc0, hs0, g1, cs1, tc1, hs1, g2, cs2, tc2, hs2, a1s, a2s, a3s)
    return hacc, dh, caches


def accum_seq_backward(dhacc, wx0fb, wh0, wx1, wh1, wx2, wh2, w1, w2, w3, w4, caches, hacc):
    """Backprop through accum_seq_forward.

    dhacc : (M+1,) upstream gradient on the accumulated height sequence.
    Returns (dpre0, dpre1, dpre2, dz1s, dz2s, dz3s, ddh): pre-activation
    gradients for the three LSTM layers and the three hidden head layers,
    plus the per-step gradient on the predicted delta. The caller turns
    these into weight and input gradients with batched matmuls.
    """
    (g0, cs0, tc0, hs0, g1, cs1, tc1, hs1, g2, cs2, tc2, hs2, a1s, a2s, a3s) = caches
    m, h = hs0.shape
    k = w1.shape[1]
    dpre0 = np.zeros((m, 4 * h)); dpre1 = np.zeros((m, 4 * h)); dpre2 = np.zeros((m, 4 * h))
    dz1s = np.zeros((m, k)); dz2s = np.zeros((m, k)); dz3s = np.zeros((m, k))
    ddh = np.zeros(m)
    dh_c = [np.zeros(h), np.zeros(h), np.zeros(h)]
    dc_c = [np.zeros(h), np.zeros(h), np.zeros(h)]
    g = float(dhacc[m])
    for t in range(m - 1, -1, -1):
        ddh[t] = g
        dz3 = g * w4[:, 0] * _lrelu_slope(a3s[t])
        dz2 = (dz3 @ w3.T) * _lrelu_slope(a2s[t])
        dz1 = (dz2 @ w2.T) * _lrelu_slope(a1s[t])
        dz3s[t] = dz3; dz2s[t] = dz2; dz1s[t] = dz1
        dx3 = dz1 @ w1.T

        cprev = cs2[t - 1] if t > 0 else np.zeros(h)
        dz, dc_c[2] = _cell_backward(dx3 + dh_c[2], dc_c[2], g2[t], tc2[t], cprev, h)
        dpre2[t] = dz
        dh_c[2] = dz @ wh2.T
        dx2 = dz @ wx2.T

        cprev = cs1[t - 1] if t > 0 else np.zeros(h)
        dz, dc_c[1] = _cell_backward(dx2 + dh_c[1], dc_c[1], g1[t], tc1[t], cprev, h)
        dpre1[t] = dz
        dh_c[1] = dz @ wh1.T
        dx1 = dz @ wx1.T

        cprev = cs0[t - 1] if t > 0 else np.zeros(h)
        dz, dc_c[0] = _cell_backward(dx1 + dh_c[0], dc_c[0], g0[t], tc0[t], cprev, h)
        dpre0[t] = dz
        dh_c[0] = dz @ wh0.T

        g = g + float(dhacc[t]) + float(dz @ wx0fb)
    return dpre0, dpre1, dpre2, dz1s, dz2s, dz3s, ddh
