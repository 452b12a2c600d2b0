import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from streamlat.compensation import CompensationError, CompensationStrategy, compensate, ego_reframe
from streamlat.core import BoxSet, Pose2, Rng, apply_pose, rotate_vectors, wrap_angle
from streamlat.prediction import TrajectoryBatch

ALL = [CompensationStrategy(v) for v in ("zero_hold", "velocity_based", "trajectory")] + [
    CompensationStrategy("forecasting", 0.5)]


def boxes(n=5, seed=0):
    r = Rng(seed)
    return BoxSet(center=r.uniform(-20, 20, (n, 2)), yaw=r.uniform(-3, 3, n), size=r.uniform(1, 5, (n, 3)),
                  velocity=r.normal(size=(n, 2)) * 4, class_id=r.integers(0, 3, n), score=r.uniform(0, 1, n))


def trajectories(n=5, seed=0, K=3, W=6):
    r = Rng(seed + 1)
    wp = np.cumsum(r.normal(size=(n, K, W, 2)), axis=2)
    s = r.uniform(0.1, 1.0, (n, K))
    return TrajectoryBatch(wp, s / s.sum(axis=1, keepdims=True), 1.0)


def arc(speed, omega, t, heading=0.0):
    """Displacement along a constant-turn path starting at the origin."""
    r = speed / omega
    return np.array([r * (math.sin(heading + omega * t) - math.sin(heading)),
                     -r * (math.cos(heading + omega * t) - math.cos(heading))])


class TestStrategies:
    def test_zero_hold_verbatim(self):
        d = boxes()
        out = compensate(d, None, 1.0, 1.7, CompensationStrategy("zero_hold"))
        for f in ("center", "yaw", "size", "velocity", "class_id", "score"):
            np.testing.assert_array_equal(getattr(out, f), getattr(d, f))

    def test_velocity_based(self):
        d = BoxSet.from_boxes(boxes(1).to_boxes())
        d.velocity[:] = [2.0, 0.0]
        out = compensate(d, None, 0.0, 0.5, CompensationStrategy("velocity_based"))
        np.testing.assert_allclose(out.center - d.center, [[1.0, 0.0]])
        np.testing.assert_array_equal(out.yaw, d.yaw)

    def test_forecasting_fixed_offset(self):
        d = boxes()
        s = CompensationStrategy("forecasting", 0.4)
        a = compensate(d, None, 1.0, 1.0, s)
        b = compensate(d, None, 1.0, 1.9, s)
        np.testing.assert_array_equal(a.center, b.center)
        np.testing.assert_allclose(a.center, d.center + 0.4 * d.velocity)
        assert not np.allclose(a.center, d.center)

    def test_forecasting_needs_horizon(self):
        with pytest.raises(CompensationError):
            compensate(boxes(), None, 0, 1, CompensationStrategy("forecasting"))

    def test_trajectory_needs_aux(self):
        with pytest.raises(CompensationError):
            compensate(boxes(), None, 0, 1, CompensationStrategy("trajectory"))
        with pytest.raises(CompensationError):
            compensate(boxes(5), trajectories(4), 0, 1, CompensationStrategy("trajectory"))

    def test_invalid(self):
        with pytest.raises(CompensationError):
            CompensationStrategy("teleport")
        with pytest.raises(CompensationError):
            compensate(boxes(), None, 1.0, 0.5, CompensationStrategy("zero_hold"))

    @pytest.mark.parametrize("s", [CompensationStrategy(v) for v in ("zero_hold", "velocity_based", "trajectory")])
    def test_identity_at_capture_time(self, s):
        d = boxes()
        out = compensate(d, trajectories(), 2.0, 2.0, s)
        np.testing.assert_array_equal(out.center, d.center)
        np.testing.assert_array_equal(out.yaw, d.yaw)

    def test_empty(self):
        for s in ALL:
            assert len(compensate(BoxSet.empty(), None, 0.0, 0.3, s)) == 0


class TestTrajectoryStrategy:
    def test_constant_turn_perfect_predictor(self):
        s, w, dt = 5.0, 0.5, 0.8
        d = BoxSet(np.zeros((1, 2)), np.zeros(1), np.ones((1, 3)), np.array([[s, 0.0]]), np.zeros(1, dtype=np.int64),
                   np.ones(1))
        times = (np.arange(6) + 1) / 6
        wp = np.array([arc(s, w, t) for t in times])[None, None]
        aux = TrajectoryBatch(wp, np.ones((1, 1)), 1.0)
        truth = arc(s, w, dt)
        traj = compensate(d, aux, 0.0, dt, CompensationStrategy("trajectory"))
        vel = compensate(d, aux, 0.0, dt, CompensationStrategy("velocity_based"))
        assert np.linalg.norm(traj.center[0] - truth) < 0.05
        # velocity-based misses by the gap between the tangent line and the arc
        r = s / w
        closed = math.hypot(s * dt - r * math.sin(w * dt), r * (1 - math.cos(w * dt)))
        assert np.linalg.norm(vel.center[0] - truth) == pytest.approx(closed, rel=1e-12)
        assert np.linalg.norm(traj.center[0] - truth) < closed
        # heading follows the arc: the local segment tangent has turned by about w*dt
        assert abs(wrap_angle(traj.yaw[0] - w * dt)) < w / 6

    def test_short_segments_keep_yaw(self):
        d = boxes(2)
        wp = np.zeros((2, 1, 6, 2))
        wp[..., 0] = np.linspace(0.01, 0.06, 6)
        out = compensate(d, TrajectoryBatch(wp, np.ones((2, 1)), 1.0), 0.0, 0.5, CompensationStrategy("trajectory"))
        np.testing.assert_array_equal(out.yaw, d.yaw)

    def test_uses_best_mode(self):
        d = boxes(1)
        wp = np.zeros((1, 2, 6, 2))
        wp[0, 1, :, 0] = np.arange(1, 7)
        out = compensate(d, TrajectoryBatch(wp, np.array([[0.2, 0.8]]), 1.0), 0.0, 0.5,
                         CompensationStrategy("trajectory"))
        np.testing.assert_allclose(out.center - d.center, [[3.0, 0.0]])


@given(st.integers(0, 10_000), st.floats(0.0, 1.4))
@settings(max_examples=60, deadline=None)
def test_never_alters_score_class_size(seed, dt):
    d = boxes(6, seed)
    for s in ALL:
        out = compensate(d, trajectories(6, seed), 0.0, dt, s)
        np.testing.assert_array_equal(out.score, d.score)
        np.testing.assert_array_equal(out.class_id, d.class_id)
        np.testing.assert_array_equal(out.size, d.size)


@given(st.integers(0, 10_000), st.floats(0.0, 2.0))
@settings(max_examples=60, deadline=None)
def test_velocity_exact_on_constant_velocity(seed, dt):
    r = Rng(seed)
    p0 = r.uniform(-30, 30, (4, 2))
    v = r.normal(size=(4, 2)) * 5
    d = BoxSet(p0, np.zeros(4), np.ones((4, 3)), v, np.zeros(4, dtype=np.int64), np.ones(4))
    out = compensate(d, None, 1.0, 1.0 + dt, CompensationStrategy("velocity_based"))
    np.testing.assert_allclose(out.center, p0 + v * dt, rtol=0, atol=1e-12)


@given(st.integers(0, 10_000), st.floats(0.0, 1.2), st.floats(-math.pi, math.pi))
@settings(max_examples=60, deadline=None)
def test_rotation_equivariance(seed, dt, theta):
    """Rotating detections and their trajectories rotates the compensated output."""
    d, tr = boxes(5, seed), trajectories(5, seed)
    rot = Pose2(0.0, 0.0, theta)
    d2 = d.with_(center=apply_pose(rot, d.center), yaw=wrap_angle(d.yaw + theta),
                 velocity=rotate_vectors(theta, d.velocity))
    tr2 = TrajectoryBatch(rotate_vectors(theta, tr.waypoints), tr.scores, tr.horizon)
    for s in ALL:
        a = compensate(d, tr, 0.0, dt, s)
        b = compensate(d2, tr2, 0.0, dt, s)
        np.testing.assert_allclose(b.center, apply_pose(rot, a.center), atol=1e-9)
        np.testing.assert_allclose(np.cos(b.yaw - a.yaw - theta), 1.0, atol=1e-9)


@given(st.integers(0, 10_000), st.floats(-50, 50), st.floats(-50, 50), st.floats(-math.pi, math.pi))
@settings(max_examples=60, deadline=None)
def test_global_transform_invariance(seed, gx, gy, gyaw):
    """A rigid transform of the whole world leaves query-frame outputs unchanged."""
    r = Rng(seed)
    world_c = r.uniform(-20, 20, (5, 2))
    world_v = r.normal(size=(5, 2))
    e0 = Pose2(*r.uniform(-5, 5, 2), r.uniform(-1, 1))
    ej = Pose2(*r.uniform(-5, 5, 2), r.uniform(-1, 1))
    G = Pose2(gx, gy, gyaw)

    def run(g):
        E0, Ej = g @ e0, g @ ej
        c = apply_pose(g, world_c)
        v = rotate_vectors(g.yaw, world_v)
        ego_d = BoxSet(apply_pose(E0.inverse(), c), np.zeros(5), np.ones((5, 3)), rotate_vectors(-E0.yaw, v),
                       np.zeros(5, dtype=np.int64), np.ones(5))
        out = compensate(ego_d, None, 0.0, 0.4, CompensationStrategy("velocity_based"))
        return ego_reframe(out, E0, Ej)

    a, b = run(Pose2()), run(G)
    np.testing.assert_allclose(a.center, b.center, atol=1e-9)
    np.testing.assert_allclose(a.velocity, b.velocity, atol=1e-9)


class TestEgoReframe:
    def test_static(self):
        d = boxes()
        out = ego_reframe(d, Pose2(1, 2, 0.3), Pose2(1, 2, 0.3))
        np.testing.assert_array_equal(out.center, d.center)

    def test_forward_motion(self):
        d = BoxSet(np.array([[5.0, 0.0]]), np.zeros(1), np.ones((1, 3)), np.zeros((1, 2)), np.zeros(1, dtype=np.int64),
                   np.ones(1))
        np.testing.assert_allclose(ego_reframe(d, Pose2(), Pose2(1, 0, 0)).center, [[4.0, 0.0]])

    def test_yaw_quarter_turn(self):
        d = BoxSet(np.array([[1.0, 0.0]]), np.zeros(1), np.ones((1, 3)), np.array([[1.0, 0.0]]),
                   np.zeros(1, dtype=np.int64), np.ones(1))
        out = ego_reframe(d, Pose2(), Pose2(0, 0, math.pi / 2))
        H = Pose2(0, 0, math.pi / 2).matrix()
        np.testing.assert_allclose(out.center[0], (np.linalg.inv(H) @ [1, 0, 1])[:2], atol=1e-15)
        np.testing.assert_allclose(out.center, [[0.0, -1.0]], atol=1e-15)
        np.testing.assert_allclose(out.velocity, [[0.0, -1.0]], atol=1e-15)
        assert out.yaw[0] == pytest.approx(-math.pi / 2)
