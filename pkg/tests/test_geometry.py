"""Camera model: rotations, frame change, distortion, pixel mapping."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gridfuse import (
    CameraIntrinsics,
    CameraPose,
    ProjectionStatus,
    distort,
    euler_from_rotation,
    project,
    project_batch,
    rotation_from_euler,
    undistort,
    world_to_camera,
)
from helpers import ground_cloud, random_intrinsics, downward_pose
from oracles import distort_point, project_point, rotation_matrix_by_product

angles = st.floats(-math.pi, math.pi, allow_nan=False)


# ---------------------------------------------------------------------------
# rotations

def test_rotation_identity():
    np.testing.assert_array_equal(rotation_from_euler(0, 0, 0), np.eye(3))


def test_rotation_rx_90deg():
    r = rotation_from_euler(math.pi / 2, 0.0, 0.0)
    expect = np.array([[1, 0, 0], [0, 0, 1], [0, -1, 0]], dtype=float)
    np.testing.assert_allclose(r, expect, atol=1e-15)


@given(angles, angles, angles)
def test_rotation_matches_triple_product(omega, phi, kappa):
    r = rotation_from_euler(omega, phi, kappa)
    ref = np.array(rotation_matrix_by_product(omega, phi, kappa))
    np.testing.assert_allclose(r, ref, atol=1e-14)


@given(angles, angles, angles)
def test_rotation_orthonormal_det_one(omega, phi, kappa):
    r = rotation_from_euler(omega, phi, kappa)
    np.testing.assert_allclose(r @ r.T, np.eye(3), atol=1e-12)
    assert abs(np.linalg.det(r) - 1.0) < 1e-12


@given(angles, st.floats(-1.5, 1.5), angles)
def test_euler_round_trip(omega, phi, kappa):
    r = rotation_from_euler(omega, phi, kappa)
    o2, p2, k2 = euler_from_rotation(r)
    np.testing.assert_allclose(rotation_from_euler(o2, p2, k2), r, atol=1e-12)


def test_euler_gimbal_lock():
    # phi = +-pi/2 leaves only omega+kappa determined; the recomposed matrix
    # must still match even though the angle split differs.
    for phi in (math.pi / 2, -math.pi / 2):
        r = rotation_from_euler(0.4, phi, -0.9)
        o2, p2, k2 = euler_from_rotation(r)
        assert o2 == 0.0
        np.testing.assert_allclose(rotation_from_euler(o2, p2, k2), r, atol=1e-12)


def test_euler_rejects_bad_shape():
    with pytest.raises(ValueError):
        euler_from_rotation(np.eye(4))


# ---------------------------------------------------------------------------
# world -> camera

def test_world_to_camera_translation_only():
    pose = CameraPose(position=np.array([10.0, 0.0, 0.0]),
                      omega=0.0, phi=0.0, kappa=0.0)
    np.testing.assert_array_equal(world_to_camera(pose, [10.0, 0.0, -5.0]),
                                  [0.0, 0.0, -5.0])


def test_world_to_camera_rx90():
    pose = CameraPose(position=np.zeros(3), omega=math.pi / 2, phi=0.0, kappa=0.0)
    np.testing.assert_allclose(world_to_camera(pose, [0.0, 1.0, 0.0]),
                               [0.0, 0.0, -1.0], atol=1e-15)


def test_world_to_camera_center_maps_to_origin():
    pose = CameraPose(position=np.array([3.0, -4.0, 7.0]),
                      omega=0.2, phi=-0.1, kappa=2.0)
    np.testing.assert_array_equal(world_to_camera(pose, pose.position.copy()),
                                  [0.0, 0.0, 0.0])


def test_world_to_camera_rejects_nonfinite():
    pose = CameraPose(position=np.zeros(3), omega=0.0, phi=0.0, kappa=0.0)
    with pytest.raises(ValueError):
        world_to_camera(pose, [np.nan, 0.0, 0.0])


# ---------------------------------------------------------------------------
# distortion

def test_distort_zero_coeffs_is_exact_identity():
    intr = CameraIntrinsics(width=100, height=100, f=50.0)
    xs = np.linspace(-0.9, 0.9, 37)
    xp, yp = distort(intr, xs, -xs)
    np.testing.assert_array_equal(xp, xs)
    np.testing.assert_array_equal(yp, -xs)


def test_distort_k1_hand_value():
    intr = CameraIntrinsics(width=100, height=100, f=50.0, k1=0.01)
    xp, yp = distort(intr, 0.1, 0.0)
    assert abs(xp - 0.10001) < 1e-15
    assert yp == 0.0


def test_distort_matches_scalar_oracle_bitwise():
    rng = np.random.default_rng(11)
    for _ in range(300):
        intr = random_intrinsics(rng)
        x = rng.uniform(-0.8, 0.8)
        y = rng.uniform(-0.8, 0.8)
        assert distort(intr, x, y) == distort_point(intr, x, y)


@given(st.floats(-0.05, 0.05), st.floats(-0.05, 0.05),
       st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
@settings(max_examples=200)
def test_undistort_round_trip(k1, p1, x, y):
    intr = CameraIntrinsics(width=100, height=100, f=50.0, k1=k1, p1=p1)
    xp, yp = distort(intr, x, y)
    x2, y2 = undistort(intr, xp, yp)
    assert math.hypot(x2 - x, y2 - y) < 1e-9


def test_undistort_zero_coeffs_identity():
    intr = CameraIntrinsics(width=100, height=100, f=50.0)
    assert undistort(intr, 0.37, -0.21) == (0.37, -0.21)


def test_undistort_recovers_k1_example():
    intr = CameraIntrinsics(width=100, height=100, f=50.0, k1=0.01)
    xp, yp = distort(intr, 0.1, 0.0)
    x, y = undistort(intr, xp, yp)
    assert abs(x - 0.1) < 1e-10 and abs(y) < 1e-10


# ---------------------------------------------------------------------------
# projection

def plain_intr():
    return CameraIntrinsics(width=4000, height=3000, f=3000.0)


def identity_pose():
    return CameraPose(position=np.zeros(3), omega=0.0, phi=0.0, kappa=0.0)


def test_project_optical_axis_hits_center():
    res = project(plain_intr(), identity_pose(), [0.0, 0.0, -5.0])
    assert (res.f_x, res.f_y, res.z) == (2000.0, 1500.0, 5.0)
    assert res.status == ProjectionStatus.IN_FRAME


def test_project_hand_pixel():
    res = project(plain_intr(), identity_pose(), [0.5, -0.25, -5.0])
    assert abs(res.f_x - 2300.0) < 1e-9
    assert abs(res.f_y - 1350.0) < 1e-9
    assert res.z == 5.0


def test_project_principal_point_offset():
    intr = CameraIntrinsics(width=2000, height=1500, f=3000.0, cx=10.0, cy=-8.0)
    res = project(intr, identity_pose(), [0.0, 0.0, -5.0])
    assert (res.f_x, res.f_y) == (1010.0, 742.0)


def test_project_behind_camera():
    res = project(plain_intr(), identity_pose(), [0.0, 0.0, 5.0])
    assert res.status == ProjectionStatus.BEHIND_CAMERA
    assert res.z == -5.0
    assert math.isnan(res.f_x)
    # a point exactly in the camera plane has no defined pixel either
    res = project(plain_intr(), identity_pose(), [1.0, 1.0, 0.0])
    assert res.status == ProjectionStatus.BEHIND_CAMERA


def test_project_out_of_frame_and_half_open_bounds():
    intr = plain_intr()
    res = project(intr, identity_pose(), [10.0, 0.0, -5.0])
    assert res.status == ProjectionStatus.OUT_OF_FRAME
    # f_x == 0 is inside, f_x == width is not
    at_left = project(intr, identity_pose(), [-2000.0 / 3000.0 * 5.0, 0.0, -5.0])
    assert at_left.f_x == 0.0
    assert at_left.status == ProjectionStatus.IN_FRAME
    at_right = project(intr, identity_pose(), [2000.0 / 3000.0 * 5.0, 0.0, -5.0])
    assert at_right.f_x == 4000.0
    assert at_right.status == ProjectionStatus.OUT_OF_FRAME


def test_project_matches_scalar_oracle_bitwise():
    rng = np.random.default_rng(5)
    for _ in range(50):
        intr = random_intrinsics(rng)
        pose = downward_pose(rng)
        for p in ground_cloud(rng, 20):
            got = project(intr, pose, p)
            ref = project_point(intr, pose, *p)
            if ref is None:
                assert got.status == ProjectionStatus.BEHIND_CAMERA
            else:
                assert (got.f_x, got.f_y, got.z) == ref[:3]
                assert (got.status == ProjectionStatus.IN_FRAME) == ref[3]


def test_project_batch_equals_scalar_bitwise():
    rng = np.random.default_rng(6)
    intr = random_intrinsics(rng)
    pose = downward_pose(rng)
    pts = np.vstack([ground_cloud(rng, 500),
                     ground_cloud(rng, 20) + [0.0, 0.0, 200.0]])  # some behind
    f_x, f_y, z, status = project_batch(intr, pose, pts)
    for i, p in enumerate(pts):
        res = project(intr, pose, p)
        assert status[i] == res.status
        assert z[i] == res.z
        if res.status != ProjectionStatus.BEHIND_CAMERA:
            assert f_x[i] == res.f_x and f_y[i] == res.f_y
        else:
            assert math.isnan(f_x[i]) and math.isnan(f_y[i])


def test_project_rigid_motion_invariance():
    # moving the whole scene and the camera by one rigid motion must not
    # change pixels (up to fp noise from the recomposed rotation)
    rng = np.random.default_rng(7)
    intr = random_intrinsics(rng)
    pose = downward_pose(rng)
    pts = ground_cloud(rng, 200)

    g = rotation_from_euler(*rng.uniform(-1.2, 1.2, 3))
    t = rng.uniform(-100, 100, 3)
    pts2 = pts @ g.T + t
    new_r = pose.rotation @ g.T
    o2, p2, k2 = euler_from_rotation(new_r)
    pose2 = CameraPose(position=g @ pose.position + t, omega=o2, phi=p2, kappa=k2)

    a = project_batch(intr, pose, pts)
    b = project_batch(intr, pose2, pts2)
    np.testing.assert_allclose(b[0], a[0], atol=1e-9)
    np.testing.assert_allclose(b[1], a[1], atol=1e-9)
    np.testing.assert_allclose(b[2], a[2], atol=1e-9)
    np.testing.assert_array_equal(b[3], a[3])


def test_project_batch_rejects_bad_shape_and_nonfinite():
    intr = plain_intr()
    pose = identity_pose()
    with pytest.raises(ValueError):
        project_batch(intr, pose, np.zeros((4, 2)))
    with pytest.raises(ValueError):
        project_batch(intr, pose, np.array([[0.0, 0.0, np.inf]]))


# ---------------------------------------------------------------------------
# validation

def test_intrinsics_validation():
    with pytest.raises(ValueError):
        CameraIntrinsics(width=0, height=100, f=50.0)
    with pytest.raises(ValueError):
        CameraIntrinsics(width=100, height=100, f=-1.0)
    with pytest.raises(ValueError):
        CameraIntrinsics(width=100, height=100, f=50.0, k1=math.nan)


def test_pose_validation():
    with pytest.raises(ValueError):
        CameraPose(position=np.array([0.0, np.inf, 0.0]),
                   omega=0.0, phi=0.0, kappa=0.0)
    with pytest.raises(ValueError):
        CameraPose(position=np.zeros(3), omega=math.nan, phi=0.0, kappa=0.0)
