"""Three-stage learned estimator.

Stage 1 predicts a per-frame end-of-trajectory probability from the temporal
differences of the canonical plane points. Stage 2 accumulates forward and
backward height deltas, blends them with a linear ramp, and refines the
blended height with a bidirectional stack. Stage 3 lifts each refined height
onto its viewing line (rebuilt from the plane points, so the result is
camera independent and projection consistent) and predicts a residual 3D
correction.

All five sub-networks train jointly against the weighted cross-entropy,
reconstruction and below-ground losses.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry as geo
from .errors import DivergedTraining, LengthMismatch, SequenceTooShort, ShapeMismatch
from .nn import tensor as T
from .nn.adam import AdamState
from .nn.checkpoint import load_weights, restore_into, save_weights
from .nn.layers import (
    AccumNet,
    BiLstmStack,
    MlpHead,
    accum_net_forward,
    bilstm_stack_forward,
    init_accum_net,
    init_bilstm_stack,
    init_mlp_head,
    mlp_forward,
)
from .nn.tensor import Tensor, from_op

HIDDEN = 64
PROB_CLAMP = 1e-7

# per-frame input feature width by input mode; "plane" is the canonical
# plane-point encoding, "pixel" the normalized raw track (ablation input)
_FEATURE_WIDTH = {"plane": 4, "pixel": 2}


@dataclass
class PipelineWeights:
    eot_stack: BiLstmStack
    eot_head: MlpHead
    fwd_net: AccumNet
    bwd_net: AccumNet
    height_stack: BiLstmStack
    height_head: MlpHead
    refine_stack: BiLstmStack
    refine_head: MlpHead
    input_mode: str = "plane"

    def named_parameters(self):
        out = []
        out += list(self.eot_stack.named("eot.stack"))
        out += list(self.eot_head.named("eot.head"))
        out += list(self.fwd_net.named("fwd"))
        out += list(self.bwd_net.named("bwd"))
        out += list(self.height_stack.named("height.stack"))
        out += list(self.height_head.named("height.head"))
        out += list(self.refine_stack.named("refine.stack"))
        out += list(self.refine_head.named("refine.head"))
        return out

    def clone(self) -> "PipelineWeights":
        return copy.deepcopy(self)


def init_pipeline(rng, input_mode="plane") -> PipelineWeights:
    f = _FEATURE_WIDTH[input_mode]
    wide = 2 * HIDDEN
    return PipelineWeights(
        eot_stack=init_bilstm_stack(f, HIDDEN, rng),
        eot_head=init_mlp_head([wide, 32, 32, 32, 1], rng, "sigmoid"),
        fwd_net=init_accum_net(f + 2, HIDDEN, rng),
        bwd_net=init_accum_net(f + 2, HIDDEN, rng),
        height_stack=init_bilstm_stack(1 + f, HIDDEN, rng),
        height_head=init_mlp_head([wide, 32, 32, 32, 1], rng, "linear"),
        refine_stack=init_bilstm_stack(3 + f, HIDDEN, rng),
        refine_head=init_mlp_head([wide, 32, 32, 32, 3], rng, "linear"),
        input_mode=input_mode,
    )


@dataclass
class PredictedTrajectory:
    eot: np.ndarray          # (N,) probabilities
    height_fwd: np.ndarray   # (N,) forward-accumulated heights
    height_bwd: np.ndarray   # (N,)
    height_fused: np.ndarray # (N,) ramp blend
    height_refined: np.ndarray
    points_pre: np.ndarray   # (N, 3) projection-consistent lifts
    points: np.ndarray       # (N, 3) final refined output


def input_features(pixels, plane_points, cam, input_mode) -> np.ndarray:
    if input_mode == "plane":
        return np.asarray(plane_points, dtype=np.float64)
    diag = float(np.hypot(*cam.image_size))
    return np.asarray(pixels, dtype=np.float64) / diag


def _lift_op(pp: np.ndarray, href: Tensor) -> Tensor:
    pts = geo.lift_heights_on_canonical_rays(pp, href.data)
    vy = pp[:, 3]
    dx_dh = -(pp[:, 0] - pp[:, 2]) / vy
    dz_dh = -pp[:, 1] / vy

    def vjp(g):
        return (g[:, 0] * dx_dh + g[:, 1] + g[:, 2] * dz_dh,)

    return from_op(pts, (href,), vjp)


def eot_forward(w: PipelineWeights, deltas) -> Tensor:
    """Per-frame trajectory-end probability; the last frame replicates the
    final delta's prediction so the output aligns with the N input frames."""
    x = T.as_tensor(deltas)
    m = x.data.shape[0]
    if m < 1:
        raise SequenceTooShort("need at least one temporal difference")
    probs = mlp_forward(bilstm_stack_forward(x, w.eot_stack), w.eot_head)  # (M, 1)
    eps = T.reshape(T.concat([probs, T.rows(probs, m - 1, m)], axis=0), (m + 1,))
    return eps


def height_forward(w: PipelineWeights, deltas: np.ndarray, eps: Tensor, feats: np.ndarray):
    """Forward/backward accumulation, ramp fusion, and height refinement.
    Returns (h_fwd, h_bwd, h_fused, h_refined) tensors of length N."""
    m = deltas.shape[0]
    n = m + 1
    if n < 2:
        raise SequenceTooShort("ramp weights need at least 2 frames")
    eps_f = T.rows(eps, 0, m)
    h_f = accum_net_forward(deltas, eps_f, w.fwd_net)
    eps_b = T.rows(T.flip0(eps), 0, m)
    h_b = T.flip0(accum_net_forward(-deltas[::-1], eps_b, w.bwd_net))
    ramp = np.arange(n, dtype=np.float64) / (n - 1)
    h = T.add(T.mul(h_f, 1.0 - ramp), T.mul(h_b, ramp))
    hx = T.concat([T.reshape(h, (n, 1)), T.as_tensor(feats)], axis=1)
    href = mlp_forward(bilstm_stack_forward(hx, w.height_stack), w.height_head)
    return h_f, h_b, h, T.reshape(href, (n,))


def lift_and_refine(w: PipelineWeights, href: Tensor, pp: np.ndarray, feats: np.ndarray):
    """Heights to 3D on the canonical viewing lines plus a residual 3D
    correction. Returns (points_pre, points_final) tensors."""
    pts = _lift_op(pp, href)
    rx = T.concat([pts, T.as_tensor(feats)], axis=1)
    d3 = mlp_forward(bilstm_stack_forward(rx, w.refine_stack), w.refine_head)
    return pts, T.add(pts, d3)


def forward_full(w: PipelineWeights, feats: np.ndarray, pp: np.ndarray, eot_feed=None):
    """Run all stages, keeping the tape. `eot_feed` (optional (N,) array)
    replaces the probabilities fed to the accumulators (teacher forcing);
    the returned `eot` stays the predicted one for the loss."""
    n = feats.shape[0]
    if n < 2:
        raise SequenceTooShort("pipeline needs at least 2 frames")
    deltas = np.diff(feats, axis=0)
    eps = eot_forward(w, deltas)
    feed = Tensor(np.asarray(eot_feed, dtype=np.float64)) if eot_feed is not None else eps
    h_f, h_b, h, href = height_forward(w, deltas, feed, feats)
    pts, final = lift_and_refine(w, href, pp, feats)
    return {"eot": eps, "h_fwd": h_f, "h_bwd": h_b, "h_fused": h,
            "h_refined": href, "points_pre": pts, "points": final}


def predict(w: PipelineWeights, seq, cam) -> PredictedTrajectory:
    """Full inference for one track; pixels must be complete."""
    uv = seq.pixels()
    pp = geo.pixels_to_plane_points(uv, cam)
    feats = input_features(uv, pp, cam, w.input_mode)
    out = forward_full(w, feats, pp)
    return PredictedTrajectory(
        eot=out["eot"].data.copy(),
        height_fwd=out["h_fwd"].data.copy(),
        height_bwd=out["h_bwd"].data.copy(),
        height_fused=out["h_fused"].data.copy(),
        height_refined=out["h_refined"].data.copy(),
        points_pre=out["points_pre"].data.copy(),
        points=out["points"].data.copy(),
    )


# -- losses -------------------------------------------------------------------


def loss_eot(eps: Tensor, gt_flags, gamma: float) -> Tensor:
    gt = np.asarray(gt_flags, dtype=np.float64)
    if eps.data.shape != gt.shape:
        raise LengthMismatch(f"eot {eps.data.shape} vs flags {gt.shape}")
    p = T.clip(eps, PROB_CLAMP, 1.0 - PROB_CLAMP)
    pos = T.mul(T.log(p), gamma * gt)
    neg = T.mul(T.log(T.sub(1.0, p)), (1.0 - gamma) * (1.0 - gt))
    return T.mul(T.tmean(T.add(pos, neg)), -1.0)


def loss_3d(final: Tensor, gt_points) -> Tensor:
    gt = np.asarray(gt_points, dtype=np.float64)
    if final.data.shape != gt.shape:
        raise LengthMismatch(f"prediction {final.data.shape} vs gt {gt.shape}")
    diff = T.sub(final, gt)
    return T.mul(T.tsum(T.mul(diff, diff)), 1.0 / gt.shape[0])


def loss_below_ground(final: Tensor) -> Tensor:
    y = final.data[:, 1]
    below = y < 0.0
    count = int(below.sum())
    if count == 0:
        return from_op(np.array(0.0), (final,), lambda g: (np.zeros_like(final.data),))
    val = np.array(float((y[below] ** 2).sum() / count))

    def vjp(g):
        d = np.zeros_like(final.data)
        d[below, 1] = 2.0 * y[below] / count * float(g)
        return (d,)

    return from_op(val, (final,), vjp)


def loss_total(l_eot: Tensor, l_3d: Tensor, l_below: Tensor, lambdas) -> Tensor:
    le, l3, lb = lambdas
    return T.add(T.add(T.mul(l_eot, le), T.mul(l_3d, l3)), T.mul(l_below, lb))


# -- training ------------------------------------------------------------------


@dataclass
class TrainConfig:
    lambda_eot: float = 10.0
    lambda_3d: float = 1.0
    lambda_below: float = 10.0
    gamma: object = "auto"   # float, or "auto" = 1 - positive-flag fraction
    lr: float = 1e-3
    epochs: int = 200
    batch: int = 256
    noise_sigma: float = 2.0
    seed: int = 0
    teacher_force_eot: bool = False
    input_mode: str = "plane"
    val_every: int = 1

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if min(self.lambda_eot, self.lambda_3d, self.lambda_below) < 0:
            raise ValueError("loss weights must be non-negative")

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def resolve_gamma(cfg: TrainConfig, sequences) -> float:
    if cfg.gamma != "auto":
        return float(cfg.gamma)
    flags = np.concatenate([s.eot_flags() for s in sequences])
    return float(1.0 - flags.mean())


@dataclass
class EpochLog:
    epoch: int
    loss_eot: float
    loss_3d: float
    loss_below: float
    loss_total: float
    val_loss_3d: float  # nan when not evaluated this epoch


def _sequence_losses(w, seq, cam, cfg, gamma, uv=None):
    uv = seq.pixels() if uv is None else uv
    pp = geo.pixels_to_plane_points(uv, cam)
    feats = input_features(uv, pp, cam, cfg.input_mode)
    feed = seq.eot_flags() if cfg.teacher_force_eot else None
    out = forward_full(w, feats, pp, eot_feed=feed)
    le = loss_eot(out["eot"], seq.eot_flags(), gamma)
    l3 = loss_3d(out["points"], seq.gt_points())
    lb = loss_below_ground(out["points"])
    return le, l3, lb, loss_total(le, l3, lb, (cfg.lambda_eot, cfg.lambda_3d, cfg.lambda_below))


def validation_loss_3d(w, sequences, cam) -> float:
    if not sequences:
        return float("nan")
    vals = []
    for seq in sequences:
        pred = predict(w, seq, cam)
        diff = pred.points - seq.gt_points()
        vals.append(float((diff * diff).sum() / len(diff)))
    return float(np.mean(vals))


def train(train_seqs, val_seqs, cam, cfg: TrainConfig, weights=None, start_epoch=0,
          on_epoch=None):
    """Joint optimization of all five sub-networks with per-sequence
    gradient accumulation. Returns (best_weights, final_weights, logs)."""
    if weights is None:
        init_rng = np.random.default_rng(
            np.random.SeedSequence([cfg.seed & (2**63 - 1), 0x696E])
        )
        weights = init_pipeline(init_rng, cfg.input_mode)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed & (2**63 - 1), 0x7472]))
    params = weights.named_parameters()
    opt = AdamState(params, lr=cfg.lr)
    gamma = resolve_gamma(cfg, train_seqs)
    logs: list[EpochLog] = []
    best = (float("inf"), weights.clone())

    def zero():
        for _, p in params:
            p.grad = None

    def step(count):
        if count == 0:
            return
        for _, p in params:
            if p.grad is not None:
                p.grad /= count
        opt.step(params)
        zero()

    for epoch in range(start_epoch, cfg.epochs):
        order = rng.permutation(len(train_seqs))
        zero()
        pending = 0
        sums = np.zeros(4)
        for idx in order:
            seq = train_seqs[idx]
            uv = seq.pixels()
            if cfg.noise_sigma > 0:
                uv = uv + rng.normal(0.0, cfg.noise_sigma, uv.shape)
            le, l3, lb, lt = _sequence_losses(weights, seq, cam, cfg, gamma, uv=uv)
            if not np.isfinite(lt.item()):
                raise DivergedTraining(f"non-finite loss at epoch {epoch}")
            lt.backward()
            pending += 1
            sums += [le.item(), l3.item(), lb.item(), lt.item()]
            if pending == cfg.batch:
                step(pending)
                pending = 0
        step(pending)
        val = float("nan")
        if val_seqs and ((epoch + 1) % cfg.val_every == 0 or epoch == cfg.epochs - 1):
            val = validation_loss_3d(weights, val_seqs, cam)
            if val < best[0]:
                best = (val, weights.clone())
        n = len(train_seqs)
        logs.append(EpochLog(epoch, sums[0] / n, sums[1] / n, sums[2] / n, sums[3] / n, val))
        if on_epoch:
            on_epoch(logs[-1])
    if not val_seqs:
        best = (float("nan"), weights.clone())
    return best[1], weights, logs


# -- checkpoints ---------------------------------------------------------------


def save_checkpoint(path, weights: PipelineWeights, cfg: TrainConfig | None = None,
                    extra_meta=None):
    meta = {"input_mode": weights.input_mode}
    if cfg is not None:
        meta["train_config"] = cfg.to_dict()
    meta.update(extra_meta or {})
    save_weights(path, [(n, p.data) for n, p in weights.named_parameters()], meta)


def load_checkpoint(path) -> tuple[PipelineWeights, dict]:
    arrays, meta = load_weights(path)
    w = init_pipeline(np.random.default_rng(0), meta.get("input_mode", "plane"))
    restore_into(w.named_parameters(), arrays)
    return w, meta
