"""Per-family generation presets: world extents, launch parameter ranges,
frame rates, and the cameras used to render each family.

The scenes are placed so that no viewing ray toward a (noisy) track pixel is
parallel to the ground or the vertical plane z=0, and the single/multi
scenes stay on one side of the vertical plane.
"""

from __future__ import annotations

import math

from .geometry import CameraModel, look_at_extrinsic
from .simulate import PhysicsParams, SimConfig

IMAGE_SIZE = (1664.0, 1088.0)
PRINCIPAL = (832.0, 544.0)

_CAMERAS = {
    # elevated desk-scale view of the launch quadrant
    "single": dict(focal=1400.0, position=(-2.0, 3.5, -3.5), target=(1.8, 0.3, 2.3)),
    # room-scale multi-launch area
    "multi": dict(focal=1100.0, position=(0.0, 6.5, -8.0), target=(0.0, 0.5, 6.0)),
    # pitch-scale multi-launch area
    "ipl": dict(focal=2200.0, position=(0.0, 16.0, -55.0), target=(0.0, 1.0, 42.0)),
    # broadcast-style view down the court
    "tennis": dict(focal=1500.0, position=(0.0, 11.5, -34.0), target=(0.0, 1.0, 1.0)),
}


def make_camera(name: str) -> CameraModel:
    spec = _CAMERAS[name]
    return CameraModel(
        spec["focal"], PRINCIPAL, IMAGE_SIZE,
        look_at_extrinsic(spec["position"], spec["target"]),
    )


def default_physics(fps: float) -> PhysicsParams:
    return PhysicsParams(dt=1.0 / fps)


def sim_config(family: str, seed: int = 0, **overrides) -> SimConfig:
    """Family defaults; keyword overrides win."""
    if family == "single":
        base = dict(
            family="single", fps=50.0,
            extent=(4.5, 4.5),
            speed_range=(1.2, 4.1),
            elevation_range=(math.radians(15), math.radians(75)),
            max_vertical_speed=3.85,
        )
    elif family == "multi":
        base = dict(
            family="multi", fps=50.0, num_launches=2,
            extent=(11.0, 11.0),
            speed_range=(1.5, 4.5),
            elevation_range=(math.radians(15), math.radians(75)),
            max_vertical_speed=5.0,
        )
    elif family == "ipl":
        base = dict(
            family="multi", fps=25.0, num_launches=2,
            extent=(30.0, 75.0),
            speed_range=(6.0, 17.0),
            elevation_range=(math.radians(10), math.radians(60)),
            max_vertical_speed=14.0,
        )
    elif family == "tennis":
        base = dict(family="tennis", fps=30.0, num_strokes=3)
    else:
        raise ValueError(f"unknown family {family!r}")
    base.update(overrides)
    return SimConfig(seed=seed, **base)


def camera_for_family(family: str) -> CameraModel:
    return make_camera("multi" if family == "multi" else family)


# launch-parameter sampling for the single-launch family; azimuth spans the
# quadrant x, z > 0 and the launch point keeps a margin from the vertical
# plane so noisy viewing rays stay well conditioned
SINGLE_LAUNCH_ORIGIN = (0.3, 0.0, 0.6)
SINGLE_AZIMUTH_RANGE = (math.radians(5), math.radians(85))
