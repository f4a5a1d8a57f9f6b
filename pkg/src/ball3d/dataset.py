"""Track sequences, JSONL serialization, and pixel-noise injection.

File layout: one JSON object per line. The first line is a file header,
each sequence starts with a sequence header, followed by one record per
sample with fields exactly (frame, u, v, gx, gz, vx, vy, x, y, z, eot,
missing). Absent values are null; non-finite numbers are rejected.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import geometry as geo
from .errors import MalformedRecord, SchemaVersionMismatch

SCHEMA_VERSION = 1
FILE_KIND = "ball3d-dataset"

_SAMPLE_FIELDS = ("frame", "u", "v", "gx", "gz", "vx", "vy", "x", "y", "z", "eot", "missing")
_GROUND_TOL = 1e-6


@dataclass
class TrackSample:
    frame: int
    u: float | None = None
    v: float | None = None
    gx: float | None = None
    gz: float | None = None
    vx: float | None = None
    vy: float | None = None
    x: float | None = None
    y: float | None = None
    z: float | None = None
    eot: int = 0
    missing: int = 0

    @property
    def has_pixel(self) -> bool:
        return self.u is not None and not self.missing

    @property
    def has_gt(self) -> bool:
        return self.x is not None


@dataclass
class Sequence:
    """Time-ordered track: pixels, plane points, optional ground truth,
    end-of-trajectory flags, plus ground-contact events in `bounces`."""

    samples: list[TrackSample]
    fps: float
    camera_id: str = ""
    seq_id: str = ""
    bounces: list[dict] = field(default_factory=list)  # {"frame", "x", "z"}

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def dt(self) -> float:
        return 1.0 / self.fps

    def validate(self):
        if len(self.samples) < 2:
            raise MalformedRecord(f"sequence {self.seq_id} has fewer than 2 samples")
        frames = [s.frame for s in self.samples]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise MalformedRecord(f"sequence {self.seq_id} frames are not increasing")
        for s in (self.samples[0], self.samples[-1]):
            if s.has_gt and abs(s.y) > _GROUND_TOL:
                raise MalformedRecord(
                    f"sequence {self.seq_id}: boundary sample y={s.y} not on the ground"
                )
        for s in self.samples:
            if s.eot not in (0, 1):
                raise MalformedRecord(f"sequence {self.seq_id}: eot flag must be 0/1")
        return self

    # -- array views --------------------------------------------------------

    def pixels(self) -> np.ndarray:
        if any(not s.has_pixel for s in self.samples):
            raise MalformedRecord(f"sequence {self.seq_id} has missing pixels")
        return np.array([[s.u, s.v] for s in self.samples])

    def plane_points(self) -> np.ndarray:
        return np.array([[s.gx, s.gz, s.vx, s.vy] for s in self.samples])

    def gt_points(self) -> np.ndarray:
        if any(not s.has_gt for s in self.samples):
            raise MalformedRecord(f"sequence {self.seq_id} lacks full ground truth")
        return np.array([[s.x, s.y, s.z] for s in self.samples])

    def eot_flags(self) -> np.ndarray:
        return np.array([s.eot for s in self.samples], dtype=np.float64)

    def frame_times(self) -> np.ndarray:
        return np.array([s.frame for s in self.samples]) * self.dt


@dataclass
class DatasetSplit:
    train: list[Sequence]
    val: list[Sequence]
    test: list[Sequence]
    camera: "geo.CameraModel"
    config: dict
    seed: int


# -- noise kinds --------------------------------------------------------------


@dataclass(frozen=True)
class GaussianStd:
    sigma: float


@dataclass(frozen=True)
class UniformBound:
    bound: float


def add_pixel_noise(seq: Sequence, cam, kind, seed) -> Sequence:
    """Perturb every pixel and recompute its plane points; ground truth and
    flags are untouched. `kind` is GaussianStd or UniformBound."""
    uv = seq.pixels()
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), 0x6E01]))
    if isinstance(kind, GaussianStd):
        if kind.sigma > 0:
            uv = uv + rng.normal(0.0, kind.sigma, uv.shape)
    elif isinstance(kind, UniformBound):
        if kind.bound > 0:
            uv = uv + rng.uniform(-kind.bound, kind.bound, uv.shape)
    else:
        raise TypeError(f"unknown noise kind {kind!r}")
    return replace_pixels(seq, uv, cam)


def replace_pixels(seq: Sequence, uv: np.ndarray, cam) -> Sequence:
    """New sequence with the given pixels and re-derived plane points."""
    pp = geo.pixels_to_plane_points(uv, cam)
    samples = [
        replace(
            s,
            u=float(uv[i, 0]), v=float(uv[i, 1]),
            gx=float(pp[i, 0]), gz=float(pp[i, 1]),
            vx=float(pp[i, 2]), vy=float(pp[i, 3]),
        )
        for i, s in enumerate(seq.samples)
    ]
    return Sequence(samples, seq.fps, seq.camera_id, seq.seq_id, list(seq.bounces))


# -- JSONL io ------------------------------------------------------------------


def _check_finite(obj, line_no):
    for key, val in obj.items():
        if isinstance(val, float) and not math.isfinite(val):
            raise MalformedRecord(f"non-finite value in field {key!r}", line=line_no)


def _sample_to_obj(s: TrackSample) -> dict:
    return {k: getattr(s, k) for k in _SAMPLE_FIELDS}


def save_jsonl(path, sequences):
    """Write sequences; load(save(x)) is the identity for finite data."""
    with open(path, "w") as f:
        f.write(json.dumps(
            {"file": FILE_KIND, "schema_version": SCHEMA_VERSION, "count": len(sequences)},
            allow_nan=False,
        ) + "\n")
        for seq in sequences:
            header = {
                "header": True,
                "seq_id": seq.seq_id,
                "fps": seq.fps,
                "camera_id": seq.camera_id,
                "n": len(seq.samples),
                "bounces": seq.bounces,
            }
            f.write(json.dumps(header, allow_nan=False) + "\n")
            for s in seq.samples:
                f.write(json.dumps(_sample_to_obj(s), allow_nan=False) + "\n")


def load_jsonl(path) -> list[Sequence]:
    sequences: list[Sequence] = []
    with open(path) as f:
        lines = f.readlines()
    if not lines:
        raise MalformedRecord("empty dataset file", line=0)
    try:
        file_header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise MalformedRecord(f"bad JSON: {exc}", line=1) from exc
    if file_header.get("file") != FILE_KIND:
        raise MalformedRecord("not a dataset file (missing file header)", line=1)
    if file_header.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"schema_version {file_header.get('schema_version')}, expected {SCHEMA_VERSION}"
        )
    i = 1
    while i < len(lines):
        line_no = i + 1
        try:
            header = json.loads(lines[i])
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"bad JSON: {exc}", line=line_no) from exc
        if not header.get("header"):
            raise MalformedRecord("expected a sequence header", line=line_no)
        n = int(header["n"])
        samples = []
        for j in range(n):
            line_no = i + 2 + j
            if i + 1 + j >= len(lines):
                raise MalformedRecord("truncated sequence", line=line_no)
            try:
                obj = json.loads(lines[i + 1 + j])
            except json.JSONDecodeError as exc:
                raise MalformedRecord(f"bad JSON: {exc}", line=line_no) from exc
            missing_fields = set(_SAMPLE_FIELDS) - set(obj)
            if missing_fields:
                raise MalformedRecord(f"missing fields {sorted(missing_fields)}", line=line_no)
            _check_finite(obj, line_no)
            samples.append(TrackSample(**{k: obj[k] for k in _SAMPLE_FIELDS}))
        seq = Sequence(
            samples,
            fps=float(header["fps"]),
            camera_id=header.get("camera_id", ""),
            seq_id=header.get("seq_id", ""),
            bounces=header.get("bounces", []),
        )
        seq.validate()
        sequences.append(seq)
        i += 1 + n
    return sequences
