# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled recurrence kernels.

Function-for-function mirror of _recurrence_py; see that module for the
contracts. Gate layout in every (4H,) block is [input | forget | cell |
output]; initial hidden/cell states are zero.
"""

import numpy as np

from libc.math cimport exp, tanh as ctanh


cdef inline double _sig(double x) noexcept nogil:
    return 1.0 / (1.0 + exp(-x))


def lstm_seq_forward(double[:, ::1] pre, double[:, ::1] wh):
    cdef Py_ssize_t m = pre.shape[0]
    cdef Py_ssize_t g4 = pre.shape[1]
    cdef Py_ssize_t h = g4 // 4
    hs_np = np.zeros((m, h))
    cs_np = np.zeros((m, h))
    gates_np = np.empty((m, g4))
    tcs_np = np.zeros((m, h))
    cdef double[:, ::1] hs = hs_np
    cdef double[:, ::1] cs = cs_np
    cdef double[:, ::1] gates = gates_np
    cdef double[:, ::1] tcs = tcs_np
    cdef double[::1] z = np.empty(g4)
    cdef Py_ssize_t t, j, k
    cdef double gi, gf, gg, go, cv, tc, hk
    with nogil:
        for t in range(m):
            for j in range(g4):
                z[j] = pre[t, j]
            if t > 0:
                for k in range(h):
                    hk = hs[t - 1, k]
                    if hk != 0.0:
                        for j in range(g4):
                            z[j] += hk * wh[k, j]
            for k in range(h):
                gi = _sig(z[k])
                gf = _sig(z[h + k])
                gg = ctanh(z[2 * h + k])
                go = _sig(z[3 * h + k])
                cv = gf * (cs[t - 1, k] if t > 0 else 0.0) + gi * gg
                tc = ctanh(cv)
                gates[t, k] = gi
                gates[t, h + k] = gf
                gates[t, 2 * h + k] = gg
                gates[t, 3 * h + k] = go
                cs[t, k] = cv
                tcs[t, k] = tc
                hs[t, k] = go * tc
    return hs_np, cs_np, gates_np, tcs_np


def lstm_seq_backward(double[:, ::1] dhs, double[:, ::1] wh,
                      double[:, ::1] hs, double[:, ::1] cs,
                      double[:, ::1] gates, double[:, ::1] tcs):
    cdef Py_ssize_t m = hs.shape[0]
    cdef Py_ssize_t h = hs.shape[1]
    cdef Py_ssize_t g4 = 4 * h
    dpre_np = np.zeros((m, g4))
    cdef double[:, ::1] dpre = dpre_np
    cdef double[::1] dh = np.zeros(h)
    cdef double[::1] dc = np.zeros(h)
    cdef Py_ssize_t t, k, j
    cdef double dht, gi, gf, gg, go, tc, dcv, cprev, do, s
    with nogil:
        for t in range(m - 1, -1, -1):
            for k in range(h):
                dht = dhs[t, k] + dh[k]
                gi = gates[t, k]
                gf = gates[t, h + k]
                gg = gates[t, 2 * h + k]
                go = gates[t, 3 * h + k]
                tc = tcs[t, k]
                do = dht * tc
                dcv = dc[k] + dht * go * (1.0 - tc * tc)
                cprev = cs[t - 1, k] if t > 0 else 0.0
                dpre[t, k] = dcv * gg * gi * (1.0 - gi)
                dpre[t, h + k] = dcv * cprev * gf * (1.0 - gf)
                dpre[t, 2 * h + k] = dcv * gi * (1.0 - gg * gg)
                dpre[t, 3 * h + k] = do * go * (1.0 - go)
                dc[k] = dcv * gf
            for k in range(h):
                s = 0.0
                for j in range(g4):
                    s += dpre[t, j] * wh[k, j]
                dh[k] = s
    return dpre_np


def accum_seq_forward(double[:, ::1] pre0fix, double[::1] wx0fb,
                      double[:, ::1] wh0,
                      double[:, ::1] wx1, double[::1] b1, double[:, ::1] wh1,
                      double[:, ::1] wx2, double[::1] b2, double[:, ::1] wh2,
                      double[:, ::1] w1, double[::1] c1,
                      double[:, ::1] w2, double[::1] c2,
                      double[:, ::1] w3, double[::1] c3,
                      double[:, ::1] w4, double[::1] c4):
    cdef Py_ssize_t m = pre0fix.shape[0]
    cdef Py_ssize_t g4 = pre0fix.shape[1]
    cdef Py_ssize_t h = g4 // 4
    cdef Py_ssize_t kw = w1.shape[1]
    hacc_np = np.zeros(m + 1)
    dh_np = np.zeros(m)
    g0_np = np.empty((m, g4)); cs0_np = np.zeros((m, h)); tc0_np = np.zeros((m, h)); hs0_np = np.zeros((m, h))
    g1_np = np.empty((m, g4)); cs1_np = np.zeros((m, h)); tc1_np = np.zeros((m, h)); hs1_np = np.zeros((m, h))
    g2_np = np.empty((m, g4)); cs2_np = np.zeros((m, h)); tc2_np = np.zeros((m, h)); hs2_np = np.zeros((m, h))
    a1s_np = np.empty((m, kw)); a2s_np = np.empty((m, kw)); a3s_np = np.empty((m, kw))
    cdef double[::1] hacc = hacc_np
    cdef double[::1] dh = dh_np
    cdef double[:, ::1] g0 = g0_np, g1 = g1_np, g2 = g2_np
    cdef double[:, ::1] cs0 = cs0_np, cs1 = cs1_np, cs2 = cs2_np
    cdef double[:, ::1] tc0 = tc0_np, tc1 = tc1_np, tc2 = tc2_np
    cdef double[:, ::1] hs0 = hs0_np, hs1 = hs1_np, hs2 = hs2_np
    cdef double[:, ::1] a1s = a1s_np, a2s = a2s_np, a3s = a3s_np
    cdef double[::1] z = np.empty(g4)
    cdef Py_ssize_t t, j, k
    cdef double gi, gf, gg, go, cv, tc, hk, acc, d
    with nogil:
        for t in range(m):
            # layer 0: fixed input projection + fed-back accumulated height
            acc = hacc[t]
            for j in range(g4):
                z[j] = pre0fix[t, j] + acc * wx0fb[j]
            if t > 0:
                for k in range(h):
                    hk = hs0[t - 1, k]
                    if hk != 0.0:
                        for j in range(g4):
                            z[j] += hk * wh0[k, j]
            for k in range(h):
                gi = _sig(z[k]); gf = _sig(z[h + k])
                gg = ctanh(z[2 * h + k]); go = _sig(z[3 * h + k])
                cv = gf * (cs0[t - 1, k] if t > 0 else 0.0) + gi * gg
                tc = ctanh(cv)
                g0[t, k] = gi; g0[t, h + k] = gf; g0[t, 2 * h + k] = gg; g0[t, 3 * h + k] = go
                cs0[t, k] = cv; tc0[t, k] = tc; hs0[t, k] = go * tc
            # layer 1
            for j in range(g4):
                z[j] = b1[j]
            for k in range(h):
                hk = hs0[t, k]
                if hk != 0.0:
                    for j in range(g4):
                        z[j] += hk * wx1[k, j]
            if t > 0:
                for k in range(h):
                    hk = hs1[t - 1, k]
                    if hk != 0.0:
                        for j in range(g4):
                            z[j] += hk * wh1[k, j]
            for k in range(h):
                gi = _sig(z[k]); gf = _sig(z[h + k])
                gg = ctanh(z[2 * h + k]); go = _sig(z[3 * h + k])
                cv = gf * (cs1[t - 1, k] if t > 0 else 0.0) + gi * gg
                tc = ctanh(cv)
                g1[t, k] = gi; g1[t, h + k] = gf; g1[t, 2 * h + k] = gg; g1[t, 3 * h + k] = go
                cs1[t, k] = cv; tc1[t, k] = tc; hs1[t, k] = go * tc
            # layer 2
            for j in range(g4):
                z[j] = b2[j]
            for k in range(h):
                hk = hs1[t, k]
                if hk != 0.0:
                    for j in range(g4):
                        z[j] += hk * wx2[k, j]
            if t > 0:
                for k in range(h):
                    hk = hs2[t - 1, k]
                    if hk != 0.0:
                        for j in range(g4):
                            z[j] += hk * wh2[k, j]
            for k in range(h):
                gi = _sig(z[k]); gf = _sig(z[h + k])
                gg = ctanh(z[2 * h + k]); go = _sig(z[3 * h + k])
                cv = gf * (cs2[t - 1, k] if t > 0 else 0.0) + gi * gg
                tc = ctanh(cv)
                g2[t, k] = gi; g2[t, h + k] = gf; g2[t, 2 * h + k] = gg; g2[t, 3 * h + k] = go
                cs2[t, k] = cv; tc2[t, k] = tc; hs2[t, k] = go * tc
            # head: three leaky-relu layers + linear output
            for j in range(kw):
                d = c1[j]
                for k in range(h):
                    d += hs2[t, k] * w1[k, j]
                a1s[t, j] = d if d > 0 else 0.01 * d
            for j in range(kw):
                d = c2[j]
                for k in range(kw):
                    d += a1s[t, k] * w2[k, j]
                a2s[t, j] = d if d > 0 else 0.01 * d
            for j in range(kw):
                d = c3[j]
                for k in range(kw):
                    d += a2s[t, k] * w3[k, j]
                a3s[t, j] = d if d > 0 else 0.01 * d
            d = c4[0]
            for k in range(kw):
                d += a3s[t, k] * w4[k, 0]
            dh[t] = d
            hacc[t + 1] = hacc[t] + d
    caches = (g0_np, cs0_np, tc0_np, hs0_np, g1_np, cs1_np, tc1_np, hs1_np,
              g2_np, cs2_np, tc2_np, hs2_np, a1s_np, a2s_np, a3s_np)
    return hacc_np, dh_np, caches


def accum_seq_backward(double[::1] dhacc, double[::1] wx0fb,
                       double[:, ::1] wh0, double[:, ::1] wx1, double[:, ::1] wh1,
                       double[:, ::1] wx2, double[:, ::1] wh2,
                       double[:, ::1] w1, double[:, ::1] w2,
                       double[:, ::1] w3, double[:, ::1] w4,
                       caches, double[::1] hacc):
    g0_np, cs0_np, tc0_np, hs0_np, g1_np, cs1_np, tc1_np, hs1_np, \
        g2_np, cs2_np, tc2_np, hs2_np, a1s_np, a2s_np, a3s_np = caches
    cdef double[:, ::1] g0 = g0_np, g1 = g1_np, g2 = g2_np
    cdef double[:, ::1] cs0 = cs0_np, cs1 = cs1_np, cs2 = cs2_np
    cdef double[:, ::1] tc0 = tc0_np, tc1 = tc1_np, tc2 = tc2_np
    cdef double[:, ::1] hs0 = hs0_np, hs1 = hs1_np, hs2 = hs2_np
    cdef double[:, ::1] a1s = a1s_np, a2s = a2s_np, a3s = a3s_np
    cdef Py_ssize_t m = hs0_np.shape[0]
    cdef Py_ssize_t h = hs0_np.shape[1]
    cdef Py_ssize_t g4 = 4 * h
    cdef Py_ssize_t kw = w1.shape[1]
    dpre0_np = np.zeros((m, g4)); dpre1_np = np.zeros((m, g4)); dpre2_np = np.zeros((m, g4))
    dz1s_np = np.zeros((m, kw)); dz2s_np = np.zeros((m, kw)); dz3s_np = np.zeros((m, kw))
    ddh_np = np.zeros(m)
    cdef double[:, ::1] dpre0 = dpre0_np, dpre1 = dpre1_np, dpre2 = dpre2_np
    cdef double[:, ::1] dz1s = dz1s_np, dz2s = dz2s_np, dz3s = dz3s_np
    cdef double[::1] ddh = ddh_np
    cdef double[::1] dhc0 = np.zeros(h), dhc1 = np.zeros(h), dhc2 = np.zeros(h)
    cdef double[::1] dcc0 = np.zeros(h), dcc1 = np.zeros(h), dcc2 = np.zeros(h)
    cdef double[::1] dx = np.zeros(h)
    cdef Py_ssize_t t, k, j
    cdef double g, dht, gi, gf, gg, go, tc, dcv, cprev, do, s, dfb
    g = dhacc[m]
    with nogil:
        for t in range(m - 1, -1, -1):
            ddh[t] = g
            # head backward
            for j in range(kw):
                dz3s[t, j] = g * w4[j, 0] * (1.0 if a3s[t, j] > 0 else 0.01)
            for j in range(kw):
                s = 0.0
                for k in range(kw):
                    s += dz3s[t, k] * w3[j, k]
                dz2s[t, j] = s * (1.0 if a2s[t, j] > 0 else 0.01)
            for j in range(kw):
                s = 0.0
                for k in range(kw):
                    s += dz2s[t, k] * w2[j, k]
                dz1s[t, j] = s * (1.0 if a1s[t, j] > 0 else 0.01)
            for k in range(h):
                s = 0.0
                for j in range(kw):
                    s += dz1s[t, j] * w1[k, j]
                dx[k] = s
            # layer 2 cell backward
            for k in range(h):
                dht = dx[k] + dhc2[k]
                gi = g2[t, k]; gf = g2[t, h + k]; gg = g2[t, 2 * h + k]; go = g2[t, 3 * h + k]
                tc = tc2[t, k]
                do = dht * tc
                dcv = dcc2[k] + dht * go * (1.0 - tc * tc)
                cprev = cs2[t - 1, k] if t > 0 else 0.0
                dpre2[t, k] = dcv * gg * gi * (1.0 - gi)
                dpre2[t, h + k] = dcv * cprev * gf * (1.0 - gf)
                dpre2[t, 2 * h + k] = dcv * gi * (1.0 - gg * gg)
                dpre2[t, 3 * h + k] = do * go * (1.0 - go)
                dcc2[k] = dcv * gf
            for k in range(h):
                s = 0.0
                for j in range(g4):
                    s += dpre2[t, j] * wh2[k, j]
                dhc2[k] = s
            for k in range(h):
                s = 0.0
                for j in range(g4):
                    s += dpre2[t, j] * wx2[k, j]
                dx[k] = s
            # layer 1 cell backward
            for k in range(h):
                dht = dx[k] + dhc1[k]
                gi = g1[t, k]; gf = g1[t, h + k]; gg = g1[t, 2 * h + k]; go = g1[t, 3 * h + k]
                tc = tc1[t, k]
                do = dht * tc
                dcv = dcc1[k] + dht * go * (1.0 - tc * tc)
                cprev = cs1[t - 1, k] if t > 0 else 0.0
                dpre1[t, k] = dcv * gg * gi * (1.0 - gi)
                dpre1[t, h + k] = dcv * cprev * gf * (1.0 - gf)
                dpre1[t, 2 * h + k] = dcv * gi * (1.0 - gg * gg)
                dpre1[t, 3 * h + k] = do * go * (1.0 - go)
                dcc1[k] = dcv * gf
            for k in range(h):
                s = 0.0
                for j in range(g4):
                    s += dpre1[t, j] * wh1[k, j]
                dhc1[k] = s
            for k in range(h):
                s = 0.0
                for j in range(g4):
                    s += dpre1[t, j] * wx1[k, j]
                dx[k] = s
            # layer 0 cell backward
            for k in range(h):
                dht = dx[k] + dhc0[k]
                gi = g0[t, k]; gf = g0[t, h + k]; gg = g0[t, 2 * h + k]; go = g0[t, 3 * h + k]
                tc = tc0[t, k]
                do = dht * tc
                dcv = dcc0[k] + dht * go * (1.0 - tc * tc)
                cprev = cs0[t - 1, k] if t > 0 else 0.0
                dpre0[t, k] = dcv * gg * gi * (1.0 - gi)
                dpre0[t, h + k] = dcv * cprev * gf * (1.0 - gf)
                dpre0[t, 2 * h + k] = dcv * gi * (1.0 - gg * gg)
                dpre0[t, 3 * h + k] = do * go * (1.0 - go)
                dcc0[k] = dcv * gf
            for k in range(h):
                s = 0.0
                for j in range(g4):
                    s += dpre0[t, j] * wh0[k, j]
                dhc0[k] = s
            dfb = 0.0
            for j in range(g4):
                dfb += dpre0[t, j] * wx0fb[j]
            g = g + dhacc[t] + dfb
    return dpre0_np, dpre1_np, dpre2_np, dz1s_np, dz2s_np, dz3s_np, ddh_np
