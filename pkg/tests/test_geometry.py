"""Camera math oracles: hand-computed cases plus randomized round trips."""

import numpy as np
import pytest

from ball3d import geometry as geo
from ball3d.errors import BehindCamera, RayParallelToPlane, SequenceTooShort
from ball3d.geometry import CameraModel, Pixel, Ray


def identity_camera(f=1000.0, pp=(960.0, 540.0)):
    return CameraModel(f, pp, (1920, 1080), np.eye(4))


def random_camera(rng):
    """Elevated camera looking down into the quadrant x,z > 0."""
    pos = np.array([rng.uniform(-6, -2), rng.uniform(3, 8), rng.uniform(-8, -3)])
    target = np.array([rng.uniform(1, 4), rng.uniform(0, 0.5), rng.uniform(1, 4)])
    e = geo.look_at_extrinsic(pos, target)
    return CameraModel(rng.uniform(800, 2000), (832, 544), (1664, 1088), e)


def test_back_project_identity_at_principal_point():
    cam = identity_camera()
    ray = geo.back_project(Pixel(960.0, 540.0), cam)
    assert np.allclose(ray.origin, 0.0)
    assert np.allclose(ray.direction, [0.0, 0.0, 1000.0])


def test_back_project_offset_pixel():
    cam = identity_camera()
    ray = geo.back_project(Pixel(1060.0, 540.0), cam)
    assert np.allclose(ray.direction, [100.0, 0.0, 1000.0])


def test_project_on_axis_and_offset():
    cam = identity_camera()
    assert geo.project([0.0, 0.0, 5.0], cam) == Pixel(960.0, 540.0)
    px = geo.project([0.5, 0.0, 5.0], cam)
    assert px.u == pytest.approx(1060.0)
    assert px.v == pytest.approx(540.0)


def test_project_behind_camera_raises():
    with pytest.raises(BehindCamera):
        geo.project([0.0, 0.0, -1.0], identity_camera())


def test_round_trip_project_back_project(rng):
    for _ in range(50):
        cam = random_camera(rng)
        px = Pixel(rng.uniform(0, 1664), rng.uniform(0, 1088))
        ray = geo.back_project(px, cam)
        back = geo.project(ray.at(7.3), cam)
        assert abs(back.u - px.u) < 1e-9
        assert abs(back.v - px.v) < 1e-9


def test_ray_to_plane_points_hand_case():
    pp = geo.ray_to_plane_points(Ray([1.0, 2.0, 3.0], [0.0, -1.0, -1.0]))
    assert (pp.g_x, pp.g_z) == (1.0, 1.0)
    assert (pp.v_x, pp.v_y) == (1.0, -1.0)


def test_plane_points_are_line_canonical():
    c = np.array([1.0, 2.0, 3.0])
    d = np.array([0.5, -1.0, -1.5])
    a = geo.ray_to_plane_points(Ray(c, d))
    b = geo.ray_to_plane_points(Ray(c + 2 * d, 3 * d))
    assert np.allclose(a.as_array(), b.as_array(), atol=1e-12)


def test_plane_points_origin_case():
    pp = geo.ray_to_plane_points(Ray([0.0, 1.0, 1.0], [0.0, -1.0, -1.0]))
    assert np.allclose(pp.as_array(), 0.0)


def test_parallel_ray_raises():
    with pytest.raises(RayParallelToPlane):
        geo.ray_to_plane_points(Ray([0.0, 1.0, 1.0], [1.0, 0.0, -1.0]))
    with pytest.raises(RayParallelToPlane):
        geo.ray_to_plane_points(Ray([0.0, 1.0, 1.0], [1.0, -1.0, 0.0]))


def test_height_to_point_ground_matches_plane_point():
    ray = Ray([0.3, 2.0, -4.0], [0.2, -0.8, 1.7])
    pp = geo.ray_to_plane_points(ray)
    pt = geo.height_to_point(ray, 0.0)
    assert pt[1] == 0.0
    assert np.allclose([pt[0], pt[2]], [pp.g_x, pp.g_z], atol=1e-12)


def test_height_to_point_linear_solve():
    pt = geo.height_to_point(Ray([0.0, 10.0, 0.0], [1.0, -2.0, 1.0]), 4.0)
    assert np.allclose(pt, [3.0, 4.0, 3.0])


def test_height_to_point_random_height_exact(rng):
    for _ in range(100):
        cam = random_camera(rng)
        px = Pixel(rng.uniform(0, 1664), rng.uniform(0, 1088))
        ray = geo.back_project(px, cam)
        # pick the height of an in-front point so reprojection is defined
        h = ray.at(rng.uniform(0.5, 2.0))[1]
        pt = geo.height_to_point(ray, h)
        assert abs(pt[1] - h) < 1e-12
        back = geo.project(pt, cam)
        assert abs(back.u - px.u) < 1e-9 and abs(back.v - px.v) < 1e-9


def test_plane_point_deltas():
    const = np.tile([[1.0, 2.0, 3.0, 4.0]], (5, 1))
    assert np.all(geo.plane_point_deltas(const) == 0.0)
    prog = np.arange(20.0).reshape(5, 4)
    assert np.allclose(geo.plane_point_deltas(prog), 4.0)
    with pytest.raises(SequenceTooShort):
        geo.plane_point_deltas(prog[:1])


def test_deltas_telescope(rng):
    pts = rng.normal(size=(30, 4))
    d = geo.plane_point_deltas(pts)
    assert np.allclose(pts[0] + d.sum(axis=0), pts[-1], atol=1e-12)


def test_camera_file_round_trip(tmp_path, rng):
    cam = random_camera(rng)
    path = tmp_path / "camera.json"
    cam.save(path)
    loaded = CameraModel.load(path)
    assert loaded.camera_id() == cam.camera_id()
    assert np.array_equal(loaded.extrinsic, cam.extrinsic)
    assert loaded.focal_px == cam.focal_px


def test_camera_invariants_enforced():
    bad = np.eye(4)
    bad[0, 0] = 2.0
    with pytest.raises(ValueError):
        CameraModel(1000, (1, 1), (10, 10), bad)
    with pytest.raises(ValueError):
        CameraModel(-5, (1, 1), (10, 10), np.eye(4))


def test_vectorized_helpers_match_scalar(rng):
    cam = random_camera(rng)
    pts = np.column_stack(
        [rng.uniform(0.5, 4, 20), rng.uniform(0, 1.5, 20), rng.uniform(0.5, 4, 20)]
    )
    uv = geo.project_points(pts, cam)
    for i in range(20):
        px = geo.project(pts[i], cam)
        assert np.allclose(uv[i], [px.u, px.v], atol=1e-10)
    pp = geo.pixels_to_plane_points(uv, cam)
    for i in range(20):
        ray = geo.back_project(Pixel(*uv[i]), cam)
        assert np.allclose(pp[i], geo.ray_to_plane_points(ray).as_array(), atol=1e-9)


def test_canonical_ray_reconstruction(rng):
    cam = random_camera(rng)
    px = Pixel(400.0, 700.0)
    ray = geo.back_project(px, cam)
    pp = geo.ray_to_plane_points(ray).as_array()
    canon = geo.canonical_ray_from_plane_points(pp)
    # same line: canonical points must lie on the camera ray
    cross = np.cross(ray.direction, canon.origin - ray.origin)
    assert np.linalg.norm(cross) / np.linalg.norm(ray.direction) < 1e-9
    cross = np.cross(ray.direction, canon.direction)
    assert np.linalg.norm(cross) / (
        np.linalg.norm(ray.direction) * np.linalg.norm(canon.direction)
    ) < 1e-12


def test_lift_heights_on_canonical_rays_matches_height_to_point(rng):
    cam = random_camera(rng)
    uv = np.column_stack([rng.uniform(0, 1664, 15), rng.uniform(0, 1088, 15)])
    pp = geo.pixels_to_plane_points(uv, cam)
    hs = rng.uniform(0, 2, 15)
    pts = geo.lift_heights_on_canonical_rays(pp, hs)
    for i in range(15):
        ray = geo.back_project(Pixel(*uv[i]), cam)
        assert np.allclose(pts[i], geo.height_to_point(ray, hs[i]), atol=1e-8)
