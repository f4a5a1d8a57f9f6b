import json

import numpy as np
import pytest

from ball3d import presets
from ball3d.dataset import (
    GaussianStd,
    Sequence,
    TrackSample,
    UniformBound,
    add_pixel_noise,
    load_jsonl,
    save_jsonl,
)
from ball3d.errors import MalformedRecord, SchemaVersionMismatch
from ball3d.generate import generate_split, load_split_dir, save_split


@pytest.fixture(scope="module")
def small_split(tmp_path_factory):
    return generate_split("single", (4, 2, 2), seed=13)


def test_round_trip_is_identity(tmp_path, small_split):
    path = tmp_path / "train.jsonl"
    save_jsonl(path, small_split.train)
    loaded = load_jsonl(path)
    assert len(loaded) == len(small_split.train)
    for a, b in zip(loaded, small_split.train):
        assert a.seq_id == b.seq_id
        assert a.fps == b.fps
        assert a.camera_id == b.camera_id
        assert a.bounces == b.bounces
        for sa, sb in zip(a.samples, b.samples):
            assert sa == sb  # dataclass equality: bit-exact floats via repr


def test_empty_file_round_trip(tmp_path):
    path = tmp_path / "empty.jsonl"
    save_jsonl(path, [])
    assert path.read_text().count("\n") == 1  # file header only
    assert load_jsonl(path) == []


def test_nan_pixel_rejected_on_load(tmp_path):
    path = tmp_path / "bad.jsonl"
    lines = [
        json.dumps({"file": "ball3d-dataset", "schema_version": 1, "count": 1}),
        json.dumps({"header": True, "seq_id": "s", "fps": 50.0, "camera_id": "", "n": 2,
                    "bounces": []}),
        json.dumps({"frame": 0, "u": 1.0, "v": 2.0, "gx": 0.0, "gz": 0.0, "vx": 0.0,
                    "vy": 1.0, "x": None, "y": None, "z": None, "eot": 0, "missing": 0}),
        '{"frame": 1, "u": NaN, "v": 2.0, "gx": 0.0, "gz": 0.0, "vx": 0.0, "vy": 1.0,'
        ' "x": null, "y": null, "z": null, "eot": 1, "missing": 0}',
    ]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(MalformedRecord) as exc:
        load_jsonl(path)
    assert exc.value.line == 4


def test_schema_version_mismatch(tmp_path):
    path = tmp_path / "v9.jsonl"
    path.write_text(json.dumps({"file": "ball3d-dataset", "schema_version": 9}) + "\n")
    with pytest.raises(SchemaVersionMismatch):
        load_jsonl(path)


def test_missing_field_rejected(tmp_path):
    path = tmp_path / "m.jsonl"
    lines = [
        json.dumps({"file": "ball3d-dataset", "schema_version": 1, "count": 1}),
        json.dumps({"header": True, "seq_id": "s", "fps": 50.0, "camera_id": "", "n": 1,
                    "bounces": []}),
        json.dumps({"frame": 0, "u": 1.0}),
    ]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(MalformedRecord):
        load_jsonl(path)


def test_zero_noise_is_identity(small_split):
    seq = small_split.train[0]
    out = add_pixel_noise(seq, small_split.camera, GaussianStd(0.0), seed=1)
    assert np.array_equal(out.pixels(), seq.pixels())
    assert np.array_equal(out.plane_points(), seq.plane_points())


def test_uniform_noise_bounded(small_split):
    seq = small_split.train[0]
    out = add_pixel_noise(seq, small_split.camera, UniformBound(25.0), seed=2)
    assert np.max(np.abs(out.pixels() - seq.pixels())) <= 25.0
    # ground truth and flags untouched
    assert np.array_equal(out.gt_points(), seq.gt_points())
    assert np.array_equal(out.eot_flags(), seq.eot_flags())


def test_gaussian_noise_empirical_std(small_split):
    seq = small_split.train[0]
    deltas = []
    for s in range(700):
        out = add_pixel_noise(seq, small_split.camera, GaussianStd(2.0), seed=s)
        deltas.append(out.pixels() - seq.pixels())
    d = np.concatenate(deltas).ravel()
    assert d.size >= 1e5
    assert abs(d.std() - 2.0) / 2.0 < 0.02


def test_noise_replays_plane_points(small_split):
    from ball3d import geometry as geo

    seq = small_split.train[1]
    out = add_pixel_noise(seq, small_split.camera, UniformBound(10.0), seed=3)
    pp = geo.pixels_to_plane_points(out.pixels(), small_split.camera)
    assert np.allclose(out.plane_points(), pp, atol=0)


def test_split_dir_round_trip(tmp_path, small_split):
    save_split(small_split, tmp_path / "d")
    splits, cam = load_split_dir(tmp_path / "d")
    assert cam.camera_id() == small_split.camera.camera_id()
    assert [s.seq_id for s in splits["train"]] == [s.seq_id for s in small_split.train]
    assert splits["train"][0].camera_id == cam.camera_id()


def test_sequence_validation():
    samples = [TrackSample(frame=0, x=0.0, y=0.5, z=0.0), TrackSample(frame=1, x=0.0, y=0.0, z=0.0)]
    with pytest.raises(MalformedRecord):
        Sequence(samples, fps=50).validate()  # first gt sample off the ground
    with pytest.raises(MalformedRecord):
        Sequence([TrackSample(frame=0), TrackSample(frame=0)], fps=50).validate()
