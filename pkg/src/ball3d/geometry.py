"""Pinhole camera math: back-projection, plane-point canonicalization,
height-to-3D conversion, and forward projection.

Conventions (fixed for the whole package):
  * world frame is right handed with y pointing up; the ground plane is y=0
    and the canonical vertical plane is z=0,
  * image coordinates are y-down pixels, the camera looks along +z in its
    own frame,
  * the extrinsic E maps world homogeneous coordinates to camera coordinates.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .errors import BehindCamera, MalformedRecord, RayParallelToPlane, SequenceTooShort

EPS_PARALLEL = 1e-9
_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class Pixel:
    """Image point in pixels (y-down). Off-image values are permitted."""

    u: float
    v: float


@dataclass(frozen=True)
class Ray:
    """3D line r(s) = origin + s * direction, world frame, meters."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "origin", np.asarray(self.origin, dtype=np.float64))
        object.__setattr__(self, "direction", np.asarray(self.direction, dtype=np.float64))
        if not np.linalg.norm(self.direction) > 0:
            raise ValueError("ray direction must be non-zero")

    def at(self, s: float) -> np.ndarray:
        return self.origin + self.direction * s


@dataclass(frozen=True)
class PlanePoints:
    """Canonical 4-number encoding of a viewing ray: the ray's ground-plane
    hit with y dropped (g_x, g_z) and its vertical-plane hit with z dropped
    (v_x, v_y). Collinear rays share one encoding."""

    g_x: float
    g_z: float
    v_x: float
    v_y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.g_x, self.g_z, self.v_x, self.v_y], dtype=np.float64)


class CameraModel:
    """Pinhole intrinsics plus a rigid world-to-camera extrinsic."""

    def __init__(self, focal_px, principal_point, image_size, extrinsic):
        self.focal_px = float(focal_px)
        self.principal_point = (float(principal_point[0]), float(principal_point[1]))
        self.image_size = (float(image_size[0]), float(image_size[1]))
        self.extrinsic = np.asarray(extrinsic, dtype=np.float64).reshape(4, 4)
        self._validate()
        self.extrinsic_inv = np.linalg.inv(self.extrinsic)

    def _validate(self):
        if not self.focal_px > 0:
            raise ValueError("focal_px must be positive")
        if not (self.image_size[0] > 0 and self.image_size[1] > 0):
            raise ValueError("image_size components must be positive")
        r = self.extrinsic[:3, :3]
        if not np.allclose(r @ r.T, np.eye(3), atol=_ORTHO_TOL):
            raise ValueError("extrinsic rotation block is not orthonormal")
        if not abs(np.linalg.det(r) - 1.0) < 1e-6:
            raise ValueError("extrinsic rotation block must have determinant +1")
        if not (self.extrinsic[3, :3] == 0).all() or self.extrinsic[3, 3] != 1.0:
            raise ValueError("extrinsic last row must be [0, 0, 0, 1]")

    @property
    def center(self) -> np.ndarray:
        """Camera center of projection in world coordinates."""
        return self.extrinsic_inv[:3, 3].copy()

    # -- file format -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "focal_px": self.focal_px,
            "principal_point": list(self.principal_point),
            "image_size": list(self.image_size),
            "extrinsic": [float(x) for x in self.extrinsic.reshape(-1)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraModel":
        missing = {"focal_px", "principal_point", "image_size", "extrinsic"} - set(d)
        if missing:
            raise MalformedRecord(f"camera file missing fields {sorted(missing)}")
        return cls(d["focal_px"], d["principal_point"], d["image_size"], d["extrinsic"])

    def save(self, path):
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, allow_nan=False)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "CameraModel":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def camera_id(self) -> str:
        """Content hash used to pair datasets with the camera that rendered
        them; survives file renames."""
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def look_at_extrinsic(position, target, up=(0.0, 1.0, 0.0)) -> np.ndarray:
    """Rigid world-to-camera transform for a camera at `position` looking at
    `target`, +z forward, y-down image rows, det(R) = +1."""
    position = np.asarray(position, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    fwd = target - position
    n = np.linalg.norm(fwd)
    if n == 0:
        raise ValueError("camera position and target coincide")
    z = fwd / n
    x = np.cross(z, np.asarray(up, dtype=np.float64))
    nx = np.linalg.norm(x)
    if nx < 1e-12:
        raise ValueError("camera forward direction is parallel to up")
    x /= nx
    y = np.cross(z, x)
    r = np.stack([x, y, z])
    e = np.eye(4)
    e[:3, :3] = r
    e[:3, 3] = -r @ position
    return e


# -- core operations (scalar API) -----------------------------------------


def back_project(pixel: Pixel, cam: CameraModel) -> Ray:
    """Viewing ray through a pixel: origin at the camera center, direction
    toward the pixel on the image plane (unnormalized)."""
    f = cam.focal_px
    px, py = cam.principal_point
    einv = cam.extrinsic_inv
    c = einv @ np.array([0.0, 0.0, 0.0, 1.0])
    d = einv @ np.array([pixel.u - px, pixel.v - py, f, 0.0])
    return Ray(c[:3], d[:3])


def project(point, cam: CameraModel) -> Pixel:
    """Pinhole projection of a world point; raises BehindCamera for
    non-positive depth."""
    p = np.asarray(point, dtype=np.float64)
    pc = cam.extrinsic @ np.array([p[0], p[1], p[2], 1.0])
    if pc[2] <= 0:
        raise BehindCamera(f"point {p.tolist()} has depth {pc[2]:.6g} <= 0")
    f = cam.focal_px
    px, py = cam.principal_point
    return Pixel(f * pc[0] / pc[2] + px, f * pc[1] / pc[2] + py)


def ray_to_plane_points(ray: Ray) -> PlanePoints:
    """Intersect the ray with the ground plane (y=0) and the vertical plane
    (z=0) and drop the constant coordinates."""
    c, d = ray.origin, ray.direction
    if abs(d[1]) <= EPS_PARALLEL:
        raise RayParallelToPlane("ray parallel to ground plane (|d_y| <= 1e-9)")
    if abs(d[2]) <= EPS_PARALLEL:
        raise RayParallelToPlane("ray parallel to vertical plane (|d_z| <= 1e-9)")
    s_g = -c[1] / d[1]
    s_v = -c[2] / d[2]
    pg = c + d * s_g
    pv = c + d * s_v
    return PlanePoints(pg[0], pg[2], pv[0], pv[1])


def height_to_point(ray: Ray, h: float) -> np.ndarray:
    """Unique point on the ray at world height h (solves r_y(s*) = h)."""
    c, d = ray.origin, ray.direction
    if abs(d[1]) <= EPS_PARALLEL:
        raise RayParallelToPlane("ray parallel to ground plane (|d_y| <= 1e-9)")
    s = (h - c[1]) / d[1]
    p = c + d * s
    p[1] = h
    return p


def plane_point_deltas(points) -> np.ndarray:
    """Temporal differences of a plane-point sequence: element t is
    P_{t+1} - P_t. Accepts a list of PlanePoints or an (N, 4) array."""
    arr = plane_points_array(points)
    if arr.shape[0] < 2:
        raise SequenceTooShort("need at least 2 plane points for deltas")
    return np.diff(arr, axis=0)


def plane_points_array(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        arr = np.asarray(points, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != 4:
            raise ValueError("plane point array must have shape (N, 4)")
        return arr
    return np.array([p.as_array() for p in points], dtype=np.float64)


def canonical_ray_from_plane_points(pp) -> Ray:
    """Reconstruct the viewing line from its two plane hits. The result is
    camera independent: any two cameras seeing the same track produce the
    same line up to floating-point rounding."""
    pp = np.asarray(pp, dtype=np.float64)
    origin = np.array([pp[2], pp[3], 0.0])
    direction = np.array([pp[0] - pp[2], -pp[3], pp[1]])
    if np.linalg.norm(direction) <= EPS_PARALLEL:
        raise RayParallelToPlane("plane hits coincide; viewing line is not recoverable")
    return Ray(origin, direction)


# -- vectorized helpers (used by the simulator, datasets and pipeline) -----


def project_points(points, cam: CameraModel):
    """Project an (N, 3) array of world points; returns (N, 2) pixels.
    Raises BehindCamera with the offending row index."""
    pts = np.asarray(points, dtype=np.float64)
    pc = pts @ cam.extrinsic[:3, :3].T + cam.extrinsic[:3, 3]
    bad = np.nonzero(pc[:, 2] <= 0)[0]
    if bad.size:
        raise BehindCamera(f"sample {int(bad[0])} has non-positive depth")
    uv = cam.focal_px * pc[:, :2] / pc[:, 2:3]
    uv[:, 0] += cam.principal_point[0]
    uv[:, 1] += cam.principal_point[1]
    return uv


def pixels_to_plane_points(pixels, cam: CameraModel) -> np.ndarray:
    """Back-project (N, 2) pixels and return their (N, 4) plane points."""
    uv = np.asarray(pixels, dtype=np.float64)
    f = cam.focal_px
    px, py = cam.principal_point
    dirs_cam = np.column_stack(
        [uv[:, 0] - px, uv[:, 1] - py, np.full(len(uv), f)]
    )
    dirs = dirs_cam @ cam.extrinsic_inv[:3, :3].T
    c = cam.center
    if np.any(np.abs(dirs[:, 1]) <= EPS_PARALLEL):
        raise RayParallelToPlane("a back-projected ray is parallel to the ground plane")
    if np.any(np.abs(dirs[:, 2]) <= EPS_PARALLEL):
        raise RayParallelToPlane("a back-projected ray is parallel to the vertical plane")
    s_g = -c[1] / dirs[:, 1]
    s_v = -c[2] / dirs[:, 2]
    pg = c[None, :] + dirs * s_g[:, None]
    pv = c[None, :] + dirs * s_v[:, None]
    return np.column_stack([pg[:, 0], pg[:, 2], pv[:, 0], pv[:, 1]])


def lift_heights_on_canonical_rays(pp, heights):
    """Convert per-frame heights to 3D points on the canonical viewing lines
    rebuilt from plane points. Returns (N, 3)."""
    pp = np.asarray(pp, dtype=np.float64)
    h = np.asarray(heights, dtype=np.float64)
    v_y = pp[:, 3]
    if np.any(np.abs(v_y) <= EPS_PARALLEL):
        raise RayParallelToPlane("degenerate canonical ray (vertical hit on the ground)")
    # line through p_vertical=(v_x, v_y, 0) and p_ground=(g_x, 0, g_z)
    s = 1.0 - h / v_y
    x = pp[:, 2] + (pp[:, 0] - pp[:, 2]) * s
    z = pp[:, 1] * s
    return np.column_stack([x, h, z])
