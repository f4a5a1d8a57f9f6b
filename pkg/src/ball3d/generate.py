"""Deterministic dataset generation: per-sequence seed streams, rendering
through the family camera, and split directories on disk."""

from __future__ import annotations

import json
import math
import os

import numpy as np

from . import presets
from .dataset import DatasetSplit, Sequence, load_jsonl, save_jsonl
from .geometry import CameraModel
from .simulate import (
    LaunchSpec,
    PhysicsParams,
    SimConfig,
    simulate_multi_launch,
    simulate_single_launch,
    simulate_tennis_rally,
)

_SPLIT_IDS = {"train": 0, "val": 1, "test": 2}
_FAMILY_IDS = {"single": 1, "multi": 2, "ipl": 3, "tennis": 4}


def _seq_seed(master_seed, family, split, index) -> int:
    ss = np.random.SeedSequence(
        [int(master_seed) & (2**63 - 1), _FAMILY_IDS[family], _SPLIT_IDS[split], int(index)]
    )
    return int(ss.generate_state(1, dtype=np.uint64)[0] & (2**62 - 1))


def generate_sequence(family, cfg: SimConfig, phys: PhysicsParams, cam, seed, seq_id) -> Sequence:
    from .simulate import render_track

    if cfg.family == "single":
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x51]))
        lo_az, hi_az = presets.SINGLE_AZIMUTH_RANGE
        for _ in range(200):
            speed = float(rng.uniform(*cfg.speed_range))
            elevation = float(rng.uniform(*cfg.elevation_range))
            if speed * math.sin(elevation) <= cfg.max_vertical_speed:
                break
        spec = LaunchSpec(
            speed, elevation, float(rng.uniform(lo_az, hi_az)), presets.SINGLE_LAUNCH_ORIGIN
        )
        seq_phys = PhysicsParams(
            gravity=phys.gravity,
            restitution=float(rng.uniform(*cfg.restitution_range)),
            tangential_retain=phys.tangential_retain,
            rolling_decel=phys.rolling_decel,
            stop_speed=phys.stop_speed,
            dt=1.0 / cfg.fps,
        )
        seq = simulate_single_launch(spec, seq_phys, seq_id)
    elif cfg.family == "multi":
        import dataclasses

        seq_cfg = dataclasses.replace(cfg, seed=seed)
        seq = simulate_multi_launch(seq_cfg, phys, seq_id)
    elif cfg.family == "tennis":
        import dataclasses

        seq_cfg = dataclasses.replace(cfg, seed=seed)
        seq = simulate_tennis_rally(seq_cfg, phys, seq_id)
    else:
        raise ValueError(f"unknown family {cfg.family!r}")
    return render_track(seq, cam)


def generate_split(
    family,
    counts,
    seed,
    config_overrides=None,
    launches_range=None,
) -> DatasetSplit:
    """counts: (n_train, n_val, n_test). launches_range: optional (lo, hi)
    for per-sequence multi-launch counts (val/test style variety)."""
    cfg = presets.sim_config(family, seed=seed, **(config_overrides or {}))
    cam = presets.camera_for_family(family)
    phys = presets.default_physics(cfg.fps)
    out = {}
    for split, n in zip(("train", "val", "test"), counts):
        seqs = []
        for i in range(n):
            s = _seq_seed(seed, family, split, i)
            seq_cfg = cfg
            if launches_range and cfg.family == "multi":
                import dataclasses

                draw = np.random.default_rng(np.random.SeedSequence([s, 0x4C]))
                seq_cfg = dataclasses.replace(
                    cfg, num_launches=int(draw.integers(launches_range[0], launches_range[1] + 1))
                )
            seqs.append(
                generate_sequence(family, seq_cfg, phys, cam, s, f"{family}-{split}-{i:05d}")
            )
        out[split] = seqs
    config_echo = {
        "family": family,
        "counts": list(counts),
        "launches_range": list(launches_range) if launches_range else None,
        "overrides": {k: (list(v) if isinstance(v, tuple) else v)
                      for k, v in (config_overrides or {}).items()},
    }
    return DatasetSplit(out["train"], out["val"], out["test"], cam, config_echo, seed)


def save_split(split: DatasetSplit, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    split.camera.save(os.path.join(out_dir, "camera.json"))
    for name in ("train", "val", "test"):
        save_jsonl(os.path.join(out_dir, f"{name}.jsonl"), getattr(split, name))
    with open(os.path.join(out_dir, "generation.json"), "w") as f:
        json.dump({"seed": split.seed, "config": split.config}, f, indent=2, sort_keys=True)


def load_split_dir(path):
    """Returns (dict split -> sequences, camera)."""
    cam = CameraModel.load(os.path.join(path, "camera.json"))
    out = {}
    for name in ("train", "val", "test"):
        p = os.path.join(path, f"{name}.jsonl")
        out[name] = load_jsonl(p) if os.path.exists(p) else []
    return out, cam
