"""Sequence-model building blocks: LSTM layers, bidirectional stacks with a
residual shortcut, MLP heads, and the autoregressive height-accumulator net.

All containers hold Tensors so the whole model trains through the tape; the
sequential recurrences run in the kernel backend (compiled when available).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch
from . import kernels as K
from .tensor import Tensor, add, concat, flip0, from_op, leaky_relu, matmul, sigmoid

LEAKY_SLOPE = 0.01


@dataclass
class LstmLayerParams:
    """One directional LSTM layer. Gate blocks in the 4H axis are ordered
    [input | forget | cell | output]."""

    wx: Tensor  # (input_size, 4H)
    wh: Tensor  # (H, 4H)
    b: Tensor  # (4H,)
    direction: str = "forward"

    @property
    def input_size(self) -> int:
        return self.wx.data.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.wh.data.shape[0]

    def named(self, prefix):
        yield f"{prefix}.wx", self.wx
        yield f"{prefix}.wh", self.wh
        yield f"{prefix}.b", self.b


def init_lstm_layer(input_size, hidden_size, rng, direction="forward") -> LstmLayerParams:
    # PyTorch-style LSTM init: every parameter uniform in +-1/sqrt(hidden)
    k = 1.0 / np.sqrt(hidden_size)
    u = lambda *shape: Tensor(rng.uniform(-k, k, shape), requires_grad=True)
    return LstmLayerParams(
        wx=u(input_size, 4 * hidden_size),
        wh=u(hidden_size, 4 * hidden_size),
        b=u(4 * hidden_size),
        direction=direction,
    )


@dataclass
class MlpHead:
    weights: list[Tensor]
    biases: list[Tensor]
    out_activation: str = "linear"  # "linear" | "sigmoid"
    slope: float = LEAKY_SLOPE

    @property
    def sizes(self):
        return [self.weights[0].data.shape[0]] + [w.data.shape[1] for w in self.weights]

    def named(self, prefix):
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            yield f"{prefix}.fc{i}.w", w
            yield f"{prefix}.fc{i}.b", b


def init_mlp_head(sizes, rng, out_activation="linear") -> MlpHead:
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        k = 1.0 / np.sqrt(fan_in)
        weights.append(Tensor(rng.uniform(-k, k, (fan_in, fan_out)), requires_grad=True))
        biases.append(Tensor(rng.uniform(-k, k, fan_out), requires_grad=True))
    return MlpHead(weights, biases, out_activation)


@dataclass
class BiLstmStack:
    """Three bidirectional layers; the output of layer 0 is added to the
    input of layer 2 (residual shortcut). Output width is 2 * hidden."""

    layers: list[tuple[LstmLayerParams, LstmLayerParams]] = field(default_factory=list)

    @property
    def hidden_size(self) -> int:
        return self.layers[0][0].hidden_size

    def named(self, prefix):
        for i, (fwd, bwd) in enumerate(self.layers):
            yield from fwd.named(f"{prefix}.l{i}.fwd")
            yield from bwd.named(f"{prefix}.l{i}.bwd")


def init_bilstm_stack(input_size, hidden_size, rng) -> BiLstmStack:
    layers = []
    width = input_size
    for _ in range(3):
        fwd = init_lstm_layer(width, hidden_size, rng, "forward")
        bwd = init_lstm_layer(width, hidden_size, rng, "backward")
        layers.append((fwd, bwd))
        width = 2 * hidden_size
    return BiLstmStack(layers)


@dataclass
class AccumNet:
    """Unidirectional 3-layer LSTM + head predicting per-step height deltas;
    the accumulated height is fed back as the last input column."""

    l0: LstmLayerParams
    l1: LstmLayerParams
    l2: LstmLayerParams
    head: MlpHead

    def named(self, prefix):
        yield from self.l0.named(f"{prefix}.l0")
        yield from self.l1.named(f"{prefix}.l1")
        yield from self.l2.named(f"{prefix}.l2")
        yield from self.head.named(f"{prefix}.head")


def init_accum_net(input_size, hidden_size, rng) -> AccumNet:
    return AccumNet(
        l0=init_lstm_layer(input_size, hidden_size, rng),
        l1=init_lstm_layer(hidden_size, hidden_size, rng),
        l2=init_lstm_layer(hidden_size, hidden_size, rng),
        head=init_mlp_head([hidden_size, 32, 32, 32, 1], rng, "linear"),
    )


# -- forward passes ----------------------------------------------------------


def _lstm_recurrence(pre: Tensor, wh: Tensor) -> Tensor:
    hs, cs, gates, tcs = K.lstm_seq_forward(
        np.ascontiguousarray(pre.data), np.ascontiguousarray(wh.data)
    )

    def vjp(g):
        dpre = K.lstm_seq_backward(
            np.ascontiguousarray(g), np.ascontiguousarray(wh.data), hs, cs, gates, tcs
        )
        h_prev = np.vstack([np.zeros((1, hs.shape[1])), hs[:-1]])
        return dpre, h_prev.T @ dpre

    return from_op(hs, (pre, wh), vjp)


def lstm_layer_forward(x: Tensor, p: LstmLayerParams, reverse=False) -> Tensor:
    """Hidden-state sequence of one LSTM layer; zero initial states.
    `reverse` processes the flipped sequence and flips the result back."""
    if x.data.ndim != 2 or x.data.shape[1] != p.input_size:
        raise ShapeMismatch(
            f"lstm input width {x.data.shape} does not match {p.input_size}"
        )
    xx = flip0(x) if reverse else x
    pre = add(matmul(xx, p.wx), p.b)
    hs = _lstm_recurrence(pre, p.wh)
    return flip0(hs) if reverse else hs


def bilstm_forward(x: Tensor, pair) -> Tensor:
    fwd, bwd = pair
    return concat(
        [lstm_layer_forward(x, fwd), lstm_layer_forward(x, bwd, reverse=True)], axis=1
    )


def bilstm_stack_forward(x: Tensor, stack: BiLstmStack) -> Tensor:
    y0 = bilstm_forward(x, stack.layers[0])
    y1 = bilstm_forward(y0, stack.layers[1])
    return bilstm_forward(add(y1, y0), stack.layers[2])


def mlp_forward(x: Tensor, head: MlpHead) -> Tensor:
    h = x
    n = len(head.weights)
    for i, (w, b) in enumerate(zip(head.weights, head.biases)):
        h = add(matmul(h, w), b)
        if i < n - 1:
            h = leaky_relu(h, head.slope)
    if head.out_activation == "sigmoid":
        h = sigmoid(h)
    return h


def accum_net_forward(dp: np.ndarray, eps: Tensor, net: AccumNet) -> Tensor:
    """Accumulated height sequence (length M+1) from M per-step inputs
    (dp_t, eps_t, h_t) where h is the running sum of predicted deltas."""
    m = dp.shape[0]
    if eps.data.shape != (m,):
        raise ShapeMismatch(f"eps shape {eps.data.shape} does not match {m} steps")
    n_fix = dp.shape[1] + 1
    if net.l0.input_size != n_fix + 1:
        raise ShapeMismatch(
            f"accumulator expects input width {net.l0.input_size}, got {n_fix + 1}"
        )
    xfix = np.column_stack([dp, eps.data])
    wx0 = net.l0.wx.data
    pre0fix = xfix @ wx0[:n_fix] + net.l0.b.data
    wx0fb = np.ascontiguousarray(wx0[n_fix])
    hw = net.head.weights
    hb = net.head.biases
    hacc, dh, caches = K.accum_seq_forward(
        pre0fix, wx0fb, net.l0.wh.data,
        net.l1.wx.data, net.l1.b.data, net.l1.wh.data,
        net.l2.wx.data, net.l2.b.data, net.l2.wh.data,
        hw[0].data, hb[0].data, hw[1].data, hb[1].data,
        hw[2].data, hb[2].data, hw[3].data, hb[3].data,
    )
    parents = (
        eps, net.l0.wx, net.l0.wh, net.l0.b,
        net.l1.wx, net.l1.wh, net.l1.b,
        net.l2.wx, net.l2.wh, net.l2.b,
        hw[0], hb[0], hw[1], hb[1], hw[2], hb[2], hw[3], hb[3],
    )

    def vjp(g):
        dpre0, dpre1, dpre2, dz1, dz2, dz3, ddh = K.accum_seq_backward(
            np.ascontiguousarray(g), wx0fb, net.l0.wh.data,
            net.l1.wx.data, net.l1.wh.data, net.l2.wx.data, net.l2.wh.data,
            hw[0].data, hw[1].data, hw[2].data, hw[3].data,
            caches, hacc,
        )
        hs0, hs1, hs2 = caches[3], caches[7], caches[11]
        a1s, a2s, a3s = caches[12], caches[13], caches[14]
        shift = lambda hs: np.vstack([np.zeros((1, hs.shape[1])), hs[:-1]])
        dwx0 = np.empty_like(wx0)
        dwx0[:n_fix] = xfix.T @ dpre0
        dwx0[n_fix] = hacc[:m] @ dpre0
        deps = (dpre0 @ wx0[:n_fix].T)[:, n_fix - 1]
        return (
            deps, dwx0, shift(hs0).T @ dpre0, dpre0.sum(0),
            hs0.T @ dpre1, shift(hs1).T @ dpre1, dpre1.sum(0),
            hs1.T @ dpre2, shift(hs2).T @ dpre2, dpre2.sum(0),
            hs2.T @ dz1, dz1.sum(0),
            a1s.T @ dz2, dz2.sum(0),
            a2s.T @ dz3, dz3.sum(0),
            (a3s * ddh[:, None]).sum(0)[:, None], np.array([ddh.sum()]),
        )

    return from_op(hacc, parents, vjp)


def gapfiller_stack_forward(x: Tensor, layers) -> Tensor:
    """Four unidirectional layers with two shortcuts: layer 2 also consumes
    the output of layer 0, layer 3 the outputs of layers 0 and 1."""
    y0 = lstm_layer_forward(x, layers[0])
    y1 = lstm_layer_forward(y0, layers[1])
    y2 = lstm_layer_forward(add(y1, y0), layers[2])
    y3 = lstm_layer_forward(add(y2, add(y0, y1)), layers[3])
    return y3
