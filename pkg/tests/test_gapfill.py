"""Gap-filler oracles built on constant-velocity tracks (a target the
next-delta model must learn essentially exactly)."""

import numpy as np
import pytest

from ball3d import presets
from ball3d.dataset import Sequence, TrackSample
from ball3d.errors import UnboundedGap
from ball3d.gapfill import (
    GapFillTrainConfig,
    HEAD_SIZES,
    fill_missing,
    init_gap_filler,
    load_gap_filler,
    save_gap_filler,
    train_gap_filler,
)


def const_velocity_sequence(rng, cam, n=24, seq_id="cv"):
    start = np.array([rng.uniform(400, 1100), rng.uniform(300, 700)])
    vel = rng.uniform(-12, 12, 2)
    uv = start + np.arange(n)[:, None] * vel
    samples = [
        TrackSample(frame=i, u=float(uv[i, 0]), v=float(uv[i, 1]))
        for i in range(n)
    ]
    seq = Sequence(samples, fps=50.0, seq_id=seq_id)
    from ball3d.dataset import replace_pixels

    return replace_pixels(seq, uv, cam)


@pytest.fixture(scope="module")
def camera():
    return presets.camera_for_family("single")


@pytest.fixture(scope="module")
def trained(camera):
    rng = np.random.default_rng(5)
    seqs = [const_velocity_sequence(rng, camera, seq_id=f"cv{i}") for i in range(40)]
    w, losses = train_gap_filler(seqs, GapFillTrainConfig(epochs=60, batch=4, lr=3e-3, seed=2))
    return w, losses, seqs


def test_weight_shapes_match_architecture():
    w = init_gap_filler(np.random.default_rng(0))
    assert len(w.fwd_layers) == 4
    assert w.fwd_layers[0].wx.data.shape == (2, 256)
    for l in w.fwd_layers[1:]:
        assert l.wx.data.shape == (64, 256)
        assert l.wh.data.shape == (64, 256)
    widths = [wt.data.shape for wt in w.fwd_head.weights]
    assert widths == [(64, 64), (64, 32), (32, 16), (16, 8), (8, 4), (4, 2)]
    assert HEAD_SIZES == [64, 64, 32, 16, 8, 4, 2]


def test_teacher_forced_loss_non_increasing(trained):
    _, losses, _ = trained
    smooth = np.convolve(losses, np.ones(5) / 5, mode="valid")
    assert smooth[-1] < smooth[0]


def test_one_step_prediction_below_half_pixel(trained, camera):
    w, _, seqs = trained
    from ball3d.gapfill import _Stepper

    rng = np.random.default_rng(9)
    worst = 0.0
    for seq in seqs[:5]:
        deltas = np.diff(seq.pixels(), axis=0) / w.delta_scale
        st = _Stepper(w.fwd_layers, w.fwd_head)
        preds = [st.step(d) for d in deltas[:-1]]
        err = np.abs(np.array(preds) - deltas[1:]) * w.delta_scale
        worst = max(worst, float(err[3:].max()))  # skip warm-up steps
    assert worst < 0.5


def test_no_gaps_is_identity(trained, camera):
    w, _, seqs = trained
    seq = seqs[0]
    out = fill_missing(seq, w, camera)
    assert np.allclose(out.pixels(), seq.pixels(), atol=1e-9)


def test_single_gap_close_to_linear_interpolation(trained, camera):
    w, _, seqs = trained
    seq = seqs[1]
    full = seq.pixels().copy()
    mid = 12
    seq.samples[mid].missing = 1
    seq.samples[mid].u = None
    seq.samples[mid].v = None
    out = fill_missing(seq, w, camera)
    interp = 0.5 * (full[mid - 1] + full[mid + 1])
    assert np.linalg.norm(out.pixels()[mid] - interp) < 1.0
    assert all(s.has_pixel for s in out.samples)
    # known points unchanged
    mask = np.ones(len(full), dtype=bool)
    mask[mid] = False
    assert np.allclose(out.pixels()[mask], full[mask], atol=1e-9)


def test_multi_frame_gap_filled(trained, camera):
    w, _, seqs = trained
    seq = seqs[2]
    full = seq.pixels().copy()
    for i in range(8, 12):
        seq.samples[i].missing = 1
        seq.samples[i].u = None
        seq.samples[i].v = None
    out = fill_missing(seq, w, camera)
    assert all(s.has_pixel for s in out.samples)
    err = np.linalg.norm(out.pixels()[8:12] - full[8:12], axis=1)
    assert err.max() < 3.0  # constant-velocity continuation stays close


def test_unbounded_gap_raises(trained, camera):
    w, _, seqs = trained
    seq = seqs[3]
    seq.samples[0].missing = 1
    with pytest.raises(UnboundedGap):
        fill_missing(seq, w, camera)


def test_gap_filler_checkpoint_round_trip(tmp_path, trained):
    w, _, _ = trained
    path = tmp_path / "gf.b3dw"
    save_gap_filler(path, w)
    w2 = load_gap_filler(path)
    assert w2.delta_scale == w.delta_scale
    for (na, pa), (nb, pb) in zip(w.named_parameters(), w2.named_parameters()):
        assert na == nb
        assert np.array_equal(pa.data, pb.data)
