"""Forward kinematics against brute-force matrix composition."""

import numpy as np
import pytest

from draggen.world.kinematics import Transform2D, joint_motion, pose_parts
from draggen.world.parts import Joint, KinematicTree, Part


def homogeneous(t: Transform2D) -> np.ndarray:
    m = np.eye(3)
    m[:2, :2] = t.r
    m[:2, 2] = t.t
    return m


def make_chain(door_angle=np.pi / 2):
    parts = [
        Part("body", (0.5, 0.5), (0.25, 0.25), Joint.fixed(), None, "body"),
        Part("door", (0.05, 0.4), (0.5, 0.05),
             Joint.revolute((0.0, 0.0), 0.0, door_angle), "body", "door"),
        Part("handle", (0.02, 0.05), (0.01, 0.3), Joint.fixed(), "door", "handle"),
    ]
    return KinematicTree(parts)


def test_rest_pose_at_zero_state():
    tree = make_chain()
    poses = pose_parts(tree, {})
    assert np.allclose(poses["body"].t, [0.25, 0.25])
    assert np.allclose(poses["body"].r, np.eye(2))
    # door at rest: parent chain translation only (closed angle 0)
    assert np.allclose(poses["door"].t, [0.75, 0.30])
    assert np.allclose(poses["door"].r, np.eye(2))


def test_prismatic_definition():
    parts = [
        Part("body", (0.5, 0.5), (0.0, 0.0), Joint.fixed(), None, "body"),
        Part("drawer", (0.3, 0.1), (0.1, 0.1),
             Joint.prismatic((0.0, 1.0), 0.3), "body", "drawer"),
    ]
    tree = KinematicTree(parts)
    p0 = pose_parts(tree, {"drawer": 0.0})["drawer"]
    p1 = pose_parts(tree, {"drawer": 1.0})["drawer"]
    assert np.allclose(p1.t - p0.t, [0.0, 0.3])
    half = pose_parts(tree, {"drawer": 0.5})["drawer"]
    assert np.allclose(half.t - p0.t, [0.0, 0.15])


def test_two_level_chain_matches_matrix_oracle():
    tree = make_chain()
    state = {"door": 0.5}
    poses = pose_parts(tree, state)

    # independent composition with homogeneous matrices
    def hom_translate(t):
        m = np.eye(3)
        m[:2, 2] = t
        return m

    def hom_rot(angle, pivot):
        c, s = np.cos(angle), np.sin(angle)
        r = np.array([[c, -s, 0.0], [s, c, 0.0], [0, 0, 1]])
        return hom_translate(pivot) @ r @ hom_translate(-np.asarray(pivot))

    m_body = hom_translate([0.25, 0.25])
    m_door = m_body @ hom_translate([0.5, 0.05]) @ hom_rot(0.5 * np.pi / 2, (0.0, 0.0))
    m_handle = m_door @ hom_translate([0.01, 0.3])
    assert np.allclose(homogeneous(poses["handle"]), m_handle, atol=1e-12)
    assert np.allclose(homogeneous(poses["door"]), m_door, atol=1e-12)


def test_random_three_level_trees_match_oracle():
    rng = np.random.default_rng(9)
    for _ in range(25):
        angle = rng.uniform(0.3, 2.0)
        travel = rng.uniform(0.1, 0.5)
        parts = [
            Part("a", (0.4, 0.4), tuple(rng.uniform(-0.2, 0.2, 2)),
                 Joint.fixed(), None, "body"),
            Part("b", (0.2, 0.2), tuple(rng.uniform(-0.2, 0.2, 2)),
                 Joint.revolute(tuple(rng.uniform(-0.1, 0.1, 2)), 0.0, angle),
                 "a", "door"),
            Part("c", (0.1, 0.1), tuple(rng.uniform(-0.2, 0.2, 2)),
                 Joint.prismatic(rng.uniform(-1, 1, 2) + 1e-3, travel), "b", "drawer"),
        ]
        tree = KinematicTree(parts)
        state = {"b": float(rng.uniform(0, 1)), "c": float(rng.uniform(0, 1))}
        poses = pose_parts(tree, state)

        expected = np.eye(3)
        for pid in ("a", "b", "c"):
            part = tree.part(pid)
            local = Transform2D.translation(part.offset).compose(
                joint_motion(part.joint, state.get(pid, 0.0))
            )
            expected = expected @ homogeneous(local)
        assert np.allclose(homogeneous(poses["c"]), expected, atol=1e-12)


def test_transform_inverse_round_trip():
    t = Transform2D.rotation(0.7, (0.3, -0.2)).compose(Transform2D.translation((1.0, 2.0)))
    pts = np.random.default_rng(0).uniform(-1, 1, (10, 2))
    assert np.allclose(t.inverse().apply(t.apply(pts)), pts, atol=1e-12)


def test_point_reflection_through_pivot():
    rot = Transform2D.rotation(np.pi, (0.5, 0.5))
    assert np.allclose(rot.apply(np.array([0.7, 0.9])), [0.3, 0.1])
