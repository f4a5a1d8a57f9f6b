"""Parity between the compiled kernels and the numpy fallback."""

import numpy as np
import pytest

from ball3d.nn import kernels
from ball3d.nn.kernels import _recurrence_py as pyk

cyk = pytest.importorskip("ball3d.nn.kernels._recurrence_cy")


def _lstm_inputs(rng, m=11, h=6):
    pre = rng.normal(size=(m, 4 * h))
    wh = rng.normal(size=(h, 4 * h)) * 0.3
    return pre, wh


def test_lstm_forward_parity(rng):
    pre, wh = _lstm_inputs(rng)
    out_c = cyk.lstm_seq_forward(pre, wh)
    out_p = pyk.lstm_seq_forward(pre, wh)
    for a, b in zip(out_c, out_p):
        assert np.max(np.abs(a - b)) < 1e-13


def test_lstm_backward_parity(rng):
    pre, wh = _lstm_inputs(rng)
    hs, cs, gates, tcs = pyk.lstm_seq_forward(pre, wh)
    dhs = rng.normal(size=hs.shape)
    d_c = cyk.lstm_seq_backward(dhs, wh, hs, cs, gates, tcs)
    d_p = pyk.lstm_seq_backward(dhs, wh, hs, cs, gates, tcs)
    assert np.max(np.abs(d_c - d_p)) < 1e-13


def _accum_inputs(rng, m=9, h=5, k=32):
    args = dict(
        pre0fix=rng.normal(size=(m, 4 * h)),
        wx0fb=rng.normal(size=4 * h) * 0.2,
        wh0=rng.normal(size=(h, 4 * h)) * 0.3,
        wx1=rng.normal(size=(h, 4 * h)) * 0.3,
        b1=rng.normal(size=4 * h) * 0.1,
        wh1=rng.normal(size=(h, 4 * h)) * 0.3,
        wx2=rng.normal(size=(h, 4 * h)) * 0.3,
        b2=rng.normal(size=4 * h) * 0.1,
        wh2=rng.normal(size=(h, 4 * h)) * 0.3,
        w1=rng.normal(size=(h, k)) * 0.3,
        c1=rng.normal(size=k) * 0.1,
        w2=rng.normal(size=(k, k)) * 0.3,
        c2=rng.normal(size=k) * 0.1,
        w3=rng.normal(size=(k, k)) * 0.3,
        c3=rng.normal(size=k) * 0.1,
        w4=rng.normal(size=(k, 1)) * 0.3,
        c4=rng.normal(size=1) * 0.1,
    )
    return args


def test_accum_parity(rng):
    a = _accum_inputs(rng)
    h_c, dh_c, caches_c = cyk.accum_seq_forward(*a.values())
    h_p, dh_p, caches_p = pyk.accum_seq_forward(*a.values())
    assert np.max(np.abs(h_c - h_p)) < 1e-12
    assert np.max(np.abs(dh_c - dh_p)) < 1e-12
    for cc, cp in zip(caches_c, caches_p):
        assert np.max(np.abs(cc - cp)) < 1e-12

    m = a["pre0fix"].shape[0]
    dhacc = rng.normal(size=m + 1)
    back_args = (
        a["wx0fb"], a["wh0"], a["wx1"], a["wh1"], a["wx2"], a["wh2"],
        a["w1"], a["w2"], a["w3"], a["w4"],
    )
    outs_c = cyk.accum_seq_backward(dhacc, *back_args, caches_c, h_c)
    outs_p = pyk.accum_seq_backward(dhacc, *back_args, caches_p, h_p)
    for oc, op in zip(outs_c, outs_p):
        assert np.max(np.abs(oc - op)) < 1e-11


def test_selected_backend_reported():
    assert kernels.BACKEND in ("cython", "python")
