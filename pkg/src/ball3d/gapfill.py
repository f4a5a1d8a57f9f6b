"""Missing track point completion.

Two independent unidirectional 4-layer recurrent models predict the next
pixel delta, one running forward and one backward. Gaps are filled by
autoregressing both models across the gap and blending the two completions
with a linear ramp (trust the forward continuation near the left anchor,
the backward one near the right). Known points pass through unchanged.

Training uses teacher forcing on complete tracks; deltas are normalized by
a per-model scale recorded in the weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry as geo
from .dataset import Sequence, replace_pixels
from .errors import DivergedTraining, UnboundedGap
from .nn import kernels as K
from .nn import tensor as T
from .nn.adam import AdamState
from .nn.checkpoint import load_weights, restore_into, save_weights
from .nn.layers import (
    MlpHead,
    gapfiller_stack_forward,
    init_lstm_layer,
    init_mlp_head,
    mlp_forward,
)
from .nn.tensor import Tensor

HIDDEN = 64
HEAD_SIZES = [HIDDEN, 64, 32, 16, 8, 4, 2]


@dataclass
class GapFillerWeights:
    fwd_layers: list
    fwd_head: MlpHead
    bwd_layers: list
    bwd_head: MlpHead
    delta_scale: float = 1.0

    def named_parameters(self):
        out = []
        for tag, layers, head in (
            ("fwd", self.fwd_layers, self.fwd_head),
            ("bwd", self.bwd_layers, self.bwd_head),
        ):
            for i, l in enumerate(layers):
                out += list(l.named(f"{tag}.l{i}"))
            out += list(head.named(f"{tag}.head"))
        return out


def _init_direction(rng):
    layers = [init_lstm_layer(2, HIDDEN, rng)]
    layers += [init_lstm_layer(HIDDEN, HIDDEN, rng) for _ in range(3)]
    return layers, init_mlp_head(HEAD_SIZES, rng, "linear")


def init_gap_filler(rng) -> GapFillerWeights:
    fl, fh = _init_direction(rng)
    bl, bh = _init_direction(rng)
    return GapFillerWeights(fl, fh, bl, bh)


@dataclass
class GapFillTrainConfig:
    epochs: int = 60
    lr: float = 3e-3
    batch: int = 4
    seed: int = 0


def _direction_loss(layers, head, deltas_scaled):
    x = Tensor(deltas_scaled[:-1])
    pred = mlp_forward(gapfiller_stack_forward(x, layers), head)
    diff = T.sub(pred, deltas_scaled[1:])
    return T.tmean(T.mul(diff, diff))


def train_gap_filler(sequences, config: GapFillTrainConfig) -> tuple:
    """Teacher-forced next-delta training on complete tracks; returns
    (weights, per-epoch loss list)."""
    rng = np.random.default_rng(np.random.SeedSequence([config.seed & (2**63 - 1), 0x6766]))
    w = init_gap_filler(rng)
    all_deltas = np.concatenate([np.diff(s.pixels(), axis=0) for s in sequences])
    w.delta_scale = max(1.0, float(np.percentile(np.abs(all_deltas), 95)))
    params = w.named_parameters()
    opt = AdamState(params, lr=config.lr)
    losses = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(sequences))
        pending = 0
        total = 0.0
        for _, p in params:
            p.grad = None
        for idx in order:
            deltas = np.diff(sequences[idx].pixels(), axis=0) / w.delta_scale
            if len(deltas) < 2:
                continue
            loss = T.add(
                _direction_loss(w.fwd_layers, w.fwd_head, deltas),
                _direction_loss(w.bwd_layers, w.bwd_head, -deltas[::-1]),
            )
            if not np.isfinite(loss.item()):
                raise DivergedTraining(f"gap filler loss diverged at epoch {epoch}")
            loss.backward()
            total += loss.item()
            pending += 1
            if pending == config.batch:
                _apply(opt, params, pending)
                pending = 0
        _apply(opt, params, pending)
        losses.append(total / max(1, len(sequences)))
    return w, losses


def _apply(opt, params, count):
    if count == 0:
        return
    for _, p in params:
        if p.grad is not None:
            p.grad /= count
    opt.step(params)
    for _, p in params:
        p.grad = None


class _Stepper:
    """Stateful single-step runner of one direction (generation only)."""

    def __init__(self, layers, head):
        self.layers = layers
        self.head = head
        self.state = [(np.zeros(HIDDEN), np.zeros(HIDDEN)) for _ in layers]

    def step(self, delta_scaled):
        x = np.asarray(delta_scaled)
        outs = []
        for i, l in enumerate(self.layers):
            if i == 2:
                x = x + outs[0]
            elif i == 3:
                x = x + outs[0] + outs[1]
            h, c = K.lstm_cell_step(x, *self.state[i], l.wx.data, l.wh.data, l.b.data)
            self.state[i] = (h, c)
            outs.append(h)
            x = h
        y = x
        n = len(self.head.weights)
        for i, (wt, b) in enumerate(zip(self.head.weights, self.head.biases)):
            y = y @ wt.data + b.data
            if i < n - 1:
                y = np.where(y > 0, y, 0.01 * y)
        return y


def _complete_one_direction(pixels, known, layers, head, scale):
    """Walk the track once, replacing unknown points with autoregressive
    continuations. Returns a fully populated (N, 2) array."""
    n = len(pixels)
    out = np.array(pixels, dtype=np.float64)
    stepper = _Stepper(layers, head)
    pred_next = None
    for t in range(1, n):
        if known[t]:
            d = (out[t] - out[t - 1]) / scale
        else:
            d = pred_next if pred_next is not None else np.zeros(2)
            out[t] = out[t - 1] + d * scale
        pred_next = stepper.step(d)
    return out


def fill_missing(seq: Sequence, weights: GapFillerWeights, cam) -> Sequence:
    """Fill interior gaps; raises UnboundedGap when an endpoint is missing.
    Returns a sequence with complete pixels and recomputed plane points."""
    known = np.array([s.has_pixel for s in seq.samples], dtype=bool)
    if not known[0] or not known[-1]:
        raise UnboundedGap(f"sequence {seq.seq_id}: first/last track point missing")
    uv = np.array(
        [[s.u if s.has_pixel else np.nan, s.v if s.has_pixel else np.nan] for s in seq.samples]
    )
    if known.all():
        return replace_pixels(seq, uv, cam)
    fwd = _complete_one_direction(uv, known, weights.fwd_layers, weights.fwd_head,
                                  weights.delta_scale)
    bwd = _complete_one_direction(uv[::-1], known[::-1], weights.bwd_layers,
                                  weights.bwd_head, weights.delta_scale)[::-1]
    out = np.array(uv)
    t = 0
    n = len(out)
    while t < n:
        if known[t]:
            t += 1
            continue
        a = t - 1
        b = t
        while not known[b]:
            b += 1
        for j in range(a + 1, b):
            wgt = (j - a) / (b - a)
            out[j] = (1.0 - wgt) * fwd[j] + wgt * bwd[j]
        t = b
    filled = replace_pixels(seq, out, cam)
    for s, orig in zip(filled.samples, seq.samples):
        s.missing = 0
        s.eot = orig.eot
    return filled


def save_gap_filler(path, weights: GapFillerWeights):
    save_weights(
        path,
        [(n, p.data) for n, p in weights.named_parameters()],
        {"delta_scale": weights.delta_scale, "kind": "gapfiller"},
    )


def load_gap_filler(path) -> GapFillerWeights:
    arrays, meta = load_weights(path)
    w = init_gap_filler(np.random.default_rng(0))
    restore_into(w.named_parameters(), arrays)
    w.delta_scale = float(meta.get("delta_scale", 1.0))
    return w
