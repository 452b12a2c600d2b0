import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradcheck import check_gradients
from streamlat.core import Pose2, Rng
from streamlat.nn import Mlp, TrainConfig, TrainingDivergence
from streamlat.propagation import (
    MOTION_DIM,
    LinearTeacher,
    MlnParams,
    MotionAttributes,
    PropagatorParams,
    QueryState,
    _exponent_forward,
    center_transform,
    center_transform_batch,
    hidden_step,
    householder_backward,
    householder_basis,
    load_propagator,
    make_teacher_dataset,
    matrix_exp_oracle,
    mln_loss_and_grads,
    mln_transform,
    propagate_embeddings,
    propagate_hidden,
    propagate_query,
    propagator_loss_and_grads,
    random_motion,
    select_history,
    train_mln,
    train_propagator,
    transition_exponent,
    transition_matrix,
    variant_mse,
)
from streamlat.stream import ConstantLatency


def motion(dt=0.4, yaw=0.1, d=(0.5, -0.2), v=(3.0, 1.0)):
    return MotionAttributes(Pose2(d[0], d[1], yaw), v, dt)


def constant_rate_params(M, d_values, n_basis=1):
    """Params whose eigenvalue network outputs ``d_values`` for any motion (alpha = 1)."""
    p = PropagatorParams.create(M, n_basis=n_basis, hidden=4, rng=Rng(0))
    for w in p.omega_d.weights:
        w[:] = 0.0
    p.omega_d.biases[0][:] = 0.0
    p.omega_d.biases[-1][:] = np.arctanh(np.asarray(d_values) / p.eig_bound)
    return p


def paired_identity_reflectors(M, rng):
    u = rng.normal(size=(M // 2, M))
    return np.repeat(u, 2, axis=0)


class TestSelectHistory:
    def test_examples(self):
        assert select_history([0, 0.5, 1.1], 1.0) == 0.5
        assert select_history([0], 0) is None
        assert select_history([0, 0.4, 0.9], 2.0) == 0.9


class TestCenterTransform:
    def test_examples(self):
        np.testing.assert_allclose(center_transform((2, 3), MotionAttributes(Pose2(), (1, 0), 0.5)), [2.5, 3])
        np.testing.assert_allclose(center_transform((1, 0), MotionAttributes(Pose2(0, 0, math.pi / 2), (0, 0), 1.0)),
                                   [0, 1], atol=1e-15)
        m = MotionAttributes(Pose2(-1, 0, 0), (2, 0), 0.25)
        np.testing.assert_allclose(center_transform((4, 0), m), [3.5, 0])
        H = m.ego_delta.matrix()
        np.testing.assert_allclose((H @ [4, 0, 1])[:2] + np.array([2, 0]) * 0.25, [3.5, 0])

    def test_batch_matches_single(self):
        rng = Rng(1)
        mot = random_motion(20, rng.uniform(0, 1, 20), rng)
        centers = rng.normal(size=(20, 2)) * 10
        batch = center_transform_batch(centers, mot)
        for i in range(20):
            c, s = mot[i, 0], mot[i, 1]
            m = MotionAttributes(Pose2(mot[i, 2], mot[i, 3], math.atan2(s, c)), tuple(mot[i, 4:6]), mot[i, 6])
            np.testing.assert_allclose(batch[i], center_transform(centers[i], m), atol=1e-12)

    def test_negative_dt_rejected(self):
        with pytest.raises(ValueError):
            MotionAttributes(Pose2(), (0, 0), -0.1)


class TestMatrixExpOracle:
    def test_zero(self):
        np.testing.assert_array_equal(matrix_exp_oracle(np.zeros((4, 4)), 2.0), np.eye(4))

    def test_diagonal(self):
        d = np.array([-2.0, 0.3, 1.5])
        np.testing.assert_allclose(matrix_exp_oracle(np.diag(d), 0.7), np.diag(np.exp(0.7 * d)), rtol=1e-12, atol=0)

    def test_rotation_generator(self):
        R = matrix_exp_oracle(np.array([[0.0, -1.0], [1.0, 0.0]]), math.pi / 2)
        c, s = math.cos(math.pi / 2), math.sin(math.pi / 2)
        np.testing.assert_allclose(R, [[c, -s], [s, c]], atol=1e-10)


class TestHouseholder:
    def test_orthogonal(self):
        for M in (4, 16, 64):
            E = householder_basis(Rng(M).normal(size=(M, M)))
            assert np.abs(E.T @ E - np.eye(M)).max() <= 1e-10

    def test_backward(self):
        rng = Rng(2)
        U = rng.normal(size=(5, 5))
        G = rng.normal(size=(5, 5))
        check_gradients([U], lambda: float(np.sum(householder_basis(U) * G)), [householder_backward(U, G)], rng)


class TestTransitionExponent:
    def test_zero_dt(self):
        p = PropagatorParams.create(8, rng=Rng(3))
        assert not transition_exponent(motion(dt=0.0), p).any()

    def test_forced_formula(self):
        p = constant_rate_params(6, -np.ones(6))
        np.testing.assert_allclose(transition_exponent(motion(dt=0.5), p), -0.5 * np.ones(6), atol=1e-15)

    def test_two_ways(self):
        p = PropagatorParams.create(8, n_basis=4, rng=Rng(4))
        m = motion()
        lam = transition_exponent(m, p)
        x = m.vector()
        logits = p.omega_alpha.forward(x)
        alpha = np.exp(logits - logits.max())
        alpha /= alpha.sum()
        d = p.eig_bound * np.tanh(p.omega_d.forward(x))
        # sum of per-basis vectors after reshaping ...
        a = m.dt * sum(alpha[k] * d.reshape(4, 8)[k] for k in range(4))
        # ... versus weighting the flat vector and folding it afterwards
        b = m.dt * (np.repeat(alpha, 8) * d).reshape(4, 8).sum(axis=0)
        np.testing.assert_allclose(lam, a, rtol=0, atol=1e-14)
        np.testing.assert_allclose(lam, b, rtol=0, atol=1e-14)

    def test_eigenvalue_bound(self):
        p = PropagatorParams.create(8, rng=Rng(5))
        for w in p.omega_d.weights:
            w *= 100
        rate = transition_exponent(motion(dt=1.0), p)
        assert np.all(np.abs(rate) <= p.eig_bound)


class TestPropagateHidden:
    def test_zero_dt_identity(self):
        p = PropagatorParams.create(8, rng=Rng(6))
        z = Rng(7).normal(size=8)
        np.testing.assert_array_equal(propagate_hidden(z, motion(dt=0.0), p), z)
        # the batched path multiplies by E E^T, exact only up to rounding
        np.testing.assert_allclose(propagate_embeddings(z[None], motion(dt=0.0).vector()[None], p)[0],
                                   p.phi_dec.forward(p.phi_enc.forward(z)), rtol=0, atol=1e-13)

    def test_identity_basis_halves_first(self):
        M = 4
        p = constant_rate_params(M, [-math.log(2), 0.0, 0.0, 0.0])
        p.reflectors = paired_identity_reflectors(M, Rng(8))
        p.invalidate()
        np.testing.assert_allclose(p.E, np.eye(M), atol=1e-14)
        out = propagate_hidden(np.array([1.0, 2.0, 3.0, 4.0]), motion(dt=1.0), p)
        np.testing.assert_allclose(out, [0.5, 2.0, 3.0, 4.0], atol=1e-13)

    @pytest.mark.parametrize("M", [4, 16, 64])
    def test_matches_matrix_exponential(self, M):
        rng = Rng(100 + M)
        for trial in range(5):
            p = PropagatorParams.create(M, rng=rng.child(trial))
            dt = float(rng.uniform(0.05, 1.5))
            m = MotionAttributes(Pose2(*rng.normal(size=2), rng.uniform(-1, 1)), tuple(rng.normal(size=2) * 3), dt)
            z = rng.normal(size=M)
            want = matrix_exp_oracle(transition_matrix(m, p), dt) @ z
            got = propagate_hidden(z, m, p)
            assert np.linalg.norm(got - want) <= 1e-8 * np.linalg.norm(want)

    def test_semigroup_frozen_rate(self):
        p = PropagatorParams.create(16, rng=Rng(9))
        from streamlat.propagation import transition_rate
        rate = transition_rate(motion(), p)
        z = Rng(10).normal(size=16)
        two = hidden_step(hidden_step(z, rate, 0.3, p.E), rate, 0.55, p.E)
        one = hidden_step(z, rate, 0.85, p.E)
        np.testing.assert_allclose(two, one, rtol=0, atol=1e-10)

    @given(st.floats(0.0, 2.0), st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_norm_bound(self, dt, seed):
        rng = Rng(seed)
        p = PropagatorParams.create(8, rng=rng)
        for w in p.omega_d.weights:
            w *= 20  # push eigenvalues towards the clamp
        z = rng.normal(size=8)
        out = propagate_hidden(z, motion(dt=dt, v=tuple(rng.normal(size=2))), p)
        assert np.linalg.norm(out) <= math.exp(p.eig_bound * dt) * np.linalg.norm(z) * (1 + 1e-12)

    def test_batch_partition_independent(self):
        rng = Rng(11)
        p = PropagatorParams.create(8, rng=rng)
        X = rng.normal(size=(30, 8))
        mot = random_motion(30, rng.uniform(0, 1, 30), rng)
        whole = propagate_embeddings(X, mot, p)
        parts = np.concatenate([propagate_embeddings(X[:7], mot[:7], p), propagate_embeddings(X[7:], mot[7:], p)])
        np.testing.assert_allclose(whole, parts, rtol=1e-13, atol=1e-14)


class TestPropagateQuery:
    def test_center_is_center_transform(self):
        p = PropagatorParams.create(8, rng=Rng(12))
        m = motion()
        q = QueryState(np.array([3.0, -4.0]), Rng(13).normal(size=8))
        np.testing.assert_array_equal(propagate_query(q, m, p).center, center_transform(q.center, m))
        mp = MlnParams.create(8, rng=Rng(14))
        np.testing.assert_array_equal(mln_transform(q, m, mp).center, center_transform(q.center, m))


class TestMln:
    def test_identity_affine_normalizes(self):
        p = MlnParams.create(8, rng=Rng(15))
        x = Rng(16).normal(size=8) * 3 + 1
        out = mln_transform(QueryState(np.zeros(2), x), motion(), p).embedding
        want = (x - x.mean()) / math.sqrt(x.var() + p.eps)
        np.testing.assert_allclose(out, want, atol=1e-12)

    def test_constant_input_gives_beta(self):
        p = MlnParams.create(8, rng=Rng(15))
        for w in p.beta.weights:
            w[:] = Rng(17).normal(size=w.shape)
        m = motion()
        out = mln_transform(QueryState(np.zeros(2), np.full(8, 2.5)), m, p).embedding
        np.testing.assert_allclose(out, p.beta.forward(m.vector()), atol=1e-12)

    def test_not_additive_in_dt(self):
        rng = Rng(18)
        p = MlnParams(Mlp.create([MOTION_DIM, 16, 8], ["tanh", "identity"], rng.child(1)),
                      Mlp.create([MOTION_DIM, 16, 8], ["tanh", "identity"], rng.child(2)))
        z = QueryState(np.zeros(2), rng.normal(size=8))
        step = lambda q, dt: mln_transform(q, motion(dt=dt), p)
        gap = np.abs(step(step(z, 0.3), 0.4).embedding - step(z, 0.7).embedding).max()
        assert gap > 1e-3

    def test_gradients(self):
        rng = Rng(19)
        p = MlnParams(Mlp.create([MOTION_DIM, 6, 5], ["tanh", "identity"], rng.child(1)),
                      Mlp.create([MOTION_DIM, 6, 5], ["tanh", "identity"], rng.child(2)))
        X, T = rng.normal(size=(10, 5)), rng.normal(size=(10, 5))
        mot = random_motion(10, rng.uniform(0, 1, 10), rng)
        _, grads = mln_loss_and_grads(p, X, mot, T)
        check_gradients(p.arrays(), lambda: mln_loss_and_grads(p, X, mot, T)[0], grads, rng)


class TestPropagatorGradients:
    @pytest.mark.parametrize("motion_eigs", [True, False])
    def test_every_path(self, motion_eigs):
        rng = Rng(20)
        p = PropagatorParams.create(6, n_basis=3, hidden=8, rng=rng, motion_eigenvalues=motion_eigs)
        # non-trivial residual branches so phi paths carry gradient
        for net in (p.phi_enc, p.phi_dec):
            net.weights[-1][:] = rng.normal(size=net.weights[-1].shape) * 0.3
        for b in p.omega_d.biases:
            b[:] = rng.normal(size=b.shape)
        X, T = rng.normal(size=(12, 6)), rng.normal(size=(12, 6))
        mot = random_motion(12, rng.uniform(0.05, 1.0, 12), rng)
        _, grads = propagator_loss_and_grads(p, X, mot, T)
        arrays = p.arrays()
        offset = 0
        for name, n in p.groups():
            check_gradients(arrays[offset:offset + n], lambda: propagator_loss_and_grads(p, X, mot, T)[0],
                            grads[offset:offset + n], rng, after=p.invalidate)
            assert any(np.abs(g).max() > 0 for g in grads[offset:offset + n]), name
            offset += n


def teacher_data(kind, seed, noise=0.0, n_seq=100):
    return make_teacher_dataset(kind, n_seq, 8, 16, ConstantLatency(0.45), Rng(seed), noise=noise)


class TestTraining:
    def test_identity_teacher(self):
        ds = teacher_data("identity", 1)
        p = PropagatorParams.create(16, hidden=32, rng=Rng(2))
        p, losses = train_propagator(ds, p, TrainConfig(steps=2000, lr=1.0, batch_size=128))
        assert min(losses) < 1e-4
        assert np.abs(p.E.T @ p.E - np.eye(16)).max() <= 1e-10

    def test_decay_teacher_near_noise_floor(self):
        sigma = 0.05
        p = PropagatorParams.create(16, hidden=32, rng=Rng(2))
        p, _ = train_propagator(teacher_data("decay", 1, sigma), p, TrainConfig(steps=2000, lr=0.1))
        held_out = variant_mse("ode", teacher_data("decay", 9, sigma, n_seq=50), p)
        assert held_out <= 2 * sigma**2

    def test_deterministic(self):
        ds = teacher_data("decay", 3, 0.05, n_seq=20)
        run = lambda: train_propagator(ds, PropagatorParams.create(8 * 2, rng=Rng(4)), TrainConfig(steps=30))[1]
        assert run() == run()

    def test_round_trip_error_reported(self, capsys):
        ds = teacher_data("identity", 5, n_seq=40)
        p, _ = train_propagator(ds, PropagatorParams.create(16, hidden=32, rng=Rng(6)), TrainConfig(steps=300, lr=1.0))
        X = Rng(7).normal(size=(200, 16))
        m0 = np.tile(MotionAttributes(Pose2(), (0.0, 0.0), 0.0).vector(), (200, 1))
        err = float(np.mean((propagate_embeddings(X, m0, p) - X) ** 2))
        with capsys.disabled():
            print(f"\n  dt=0 embedding round-trip MSE after training: {err:.3e}")
        assert math.isfinite(err)

    def test_divergence(self):
        ds = teacher_data("decay", 3, n_seq=10)
        p = PropagatorParams.create(16, rng=Rng(4))
        with pytest.raises(TrainingDivergence):
            with np.errstate(all="ignore"):
                train_propagator(ds, p, TrainConfig(steps=50, lr=1e150))

    def test_mln_learns_something(self):
        teacher = LinearTeacher.random(16, Rng(1))
        ds = make_teacher_dataset("linear", 60, 8, 16, ConstantLatency(0.45), Rng(2), teacher=teacher)
        p = MlnParams.create(16, rng=Rng(3))
        before = variant_mse("mln", ds, p)
        p, _ = train_mln(ds, p, TrainConfig(steps=300, lr=0.1))
        assert variant_mse("mln", ds, p) < before


def test_save_load(tmp_path):
    p = PropagatorParams.create(8, rng=Rng(21))
    p.save(tmp_path / "p.slpb")
    q = load_propagator(tmp_path / "p.slpb")
    X = Rng(22).normal(size=(4, 8))
    mot = random_motion(4, [0.1, 0.2, 0.3, 0.4], Rng(23))
    np.testing.assert_array_equal(propagate_embeddings(X, mot, p), propagate_embeddings(X, mot, q))
    m = MlnParams.create(8, rng=Rng(24))
    m.save(tmp_path / "m.slpb")
    assert isinstance(load_propagator(tmp_path / "m.slpb"), MlnParams)
    with pytest.raises(ValueError):
        PropagatorParams.load(tmp_path / "m.slpb")
