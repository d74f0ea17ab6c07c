import numpy as np
import pytest

from dualarm.transforms import (
    RigidTransform,
    is_gimbal,
    matrix_to_rpy,
    rotation_about_axis,
    rotation_log,
    rpy_to_matrix,
    wrap_angle,
)


def test_wrap_angle_interval():
    angles = np.linspace(-12.0, 12.0, 2001)
    wrapped = wrap_angle(angles)
    assert np.all(wrapped > -np.pi)
    assert np.all(wrapped <= np.pi)
    # wrapping preserves the angle modulo 2*pi
    assert np.allclose(np.cos(wrapped), np.cos(angles), atol=1e-12)
    assert np.allclose(np.sin(wrapped), np.sin(angles), atol=1e-12)


def test_wrap_angle_seam():
    assert wrap_angle(np.pi) == pytest.approx(np.pi)
    assert wrap_angle(-np.pi) == pytest.approx(np.pi)
    assert wrap_angle(np.pi + 1e-6) == pytest.approx(-np.pi + 1e-6, abs=1e-12)


def test_rpy_round_trip():
    rng = np.random.default_rng(0)
    for _ in range(200):
        rpy = rng.uniform(-np.pi, np.pi, 3)
        rpy[1] = rng.uniform(-1.4, 1.4)  # stay away from the gimbal pitch
        rot = rpy_to_matrix(rpy)
        back = matrix_to_rpy(rot)
        assert np.abs(rpy_to_matrix(back) - rot).max() < 1e-9


def test_gimbal_flag():
    rot = rpy_to_matrix([0.3, np.pi / 2, 0.2])
    assert is_gimbal(rot)
    assert not is_gimbal(rpy_to_matrix([0.3, 0.6, 0.2]))


def test_rotation_about_axis_matches_rpy():
    assert np.allclose(
        rotation_about_axis(np.array([0.0, 0.0, 1.0]), 0.7),
        rpy_to_matrix([0.0, 0.0, 0.7]),
        atol=1e-12,
    )


def test_rigid_transform_compose_inverse():
    rng = np.random.default_rng(1)
    for _ in range(50):
        a = RigidTransform.from_rpy(rng.normal(size=3), rng.uniform(-2, 2, 3))
        b = RigidTransform.from_rpy(rng.normal(size=3), rng.uniform(-2, 2, 3))
        ab = a @ b
        pt = rng.normal(size=3)
        assert np.allclose(ab.apply(pt), a.apply(b.apply(pt)), atol=1e-12)
        ident = a @ a.inverse()
        assert ident.almost_equal(RigidTransform.identity(), tol=1e-12)


def test_rigid_transform_rejects_non_rotation():
    with pytest.raises(ValueError):
        RigidTransform(np.eye(3) * 2.0, np.zeros(3))


def test_rotation_log_round_trip():
    rng = np.random.default_rng(2)
    for _ in range(200):
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(1e-7, np.pi - 1e-7)
        rot = rotation_about_axis(axis, angle)
        vec = rotation_log(rot)
        assert np.allclose(vec, axis * angle, atol=1e-6)


def test_rotation_log_near_pi():
    axis = np.array([1.0, 0.0, 0.0])
    rot = rotation_about_axis(axis, np.pi - 1e-9)
    vec = rotation_log(rot)
    assert abs(np.linalg.norm(vec) - (np.pi - 1e-9)) < 1e-6
    assert np.allclose(np.abs(vec / np.linalg.norm(vec)), axis, atol=1e-5)
