import numpy as np
import pytest

from jma.attack import (
    AttackConfig,
    jma_attack,
    jma_step,
    lots_attack,
    metrics,
    solve_displacement,
)
from jma.encoding import (
    decode,
    hadamard_codebook,
    materialize_multilabel,
    multilabel_codebook,
    onehot_codebook,
)
from jma.errors import AlreadyTarget, RankDeficient
from jma.linalg import gram
from jma.model import LayeredNet, forward_logits, linear_net, make_net, make_synthetic, train
from jma.oracle import min_euclidean_displacement, null_space_basis, qp_active_set_enumerate

from conftest import feasible_qp, full_rank_jacobian, linear_instance

EXACT = AttackConfig(overshoot=0.0)


def test_step_is_zero_at_target(rng):
    W = rng.standard_normal((3, 8))
    x = rng.random(8)
    t = decode(onehot_codebook(3), W @ x)
    step = jma_step(linear_net(W), onehot_codebook(3), t, x, EXACT)
    np.testing.assert_array_equal(step.lam, np.zeros(2))
    np.testing.assert_array_equal(step.delta_star, np.zeros(8))


def test_two_class_hyperplane_projection(rng):
    W = rng.standard_normal((2, 6))
    x = rng.random(6)
    z = W @ x
    t = int(np.argmin(z))
    step = jma_step(linear_net(W), onehot_codebook(2), t, x, EXACT)
    w = W[1 - t] - W[t]
    expected = -(w @ x) / (w @ w) * w
    np.testing.assert_allclose(step.delta_star, expected, atol=1e-12)
    assert np.linalg.norm(step.delta_star) == pytest.approx(abs(z[0] - z[1]) / np.linalg.norm(w), rel=1e-10)


def test_mahalanobis_beats_euclidean_displacement():
    rng = np.random.default_rng(8)
    strict = 0
    for _ in range(20):
        # anisotropic rows: very different gains per logit
        W = rng.standard_normal((4, 12)) * np.array([[0.2], [1.0], [3.0], [6.0]])
        x = rng.uniform(0.3, 0.7, 12)
        z = W @ x
        t = int(np.argmin(z))
        step = jma_step(linear_net(W), onehot_codebook(4), t, x, EXACT)
        G = gram(W)
        d_euc = min_euclidean_displacement(step.constraints.A, step.constraints.b).d
        delta_euc = W.T @ np.linalg.solve(G, d_euc)
        assert np.linalg.norm(step.delta_star) <= np.linalg.norm(delta_euc) + 1e-12
        strict += np.linalg.norm(step.delta_star) < np.linalg.norm(delta_euc) * (1 - 1e-6)
    assert strict >= 15


def test_step_identities(rng):
    net = make_net([10, 12, 4], seed=3)
    for _ in range(10):
        x = rng.random(10)
        t = int(rng.integers(4))
        step = jma_step(net, onehot_codebook(4), t, x)
        J = step.J
        A = step.constraints.A
        np.testing.assert_allclose(step.delta_star, -J.T @ (A.T @ step.lam), atol=1e-10)
        np.testing.assert_allclose(step.d_star, -gram(J) @ (A.T @ step.lam), atol=1e-10)
        scale = max(np.linalg.norm(step.d_star), 1e-300)
        assert np.linalg.norm(J @ step.delta_star - step.d_star) <= 1e-8 * scale + 1e-12
        maha = step.d_star @ np.linalg.solve(gram(J), step.d_star)
        assert step.delta_star @ step.delta_star == pytest.approx(maha, rel=1e-8, abs=1e-300)


def test_min_norm_certificate(rng):
    J = full_rank_jacobian(rng, 4, 15)
    d = rng.standard_normal(4)
    delta = J.T @ np.linalg.solve(gram(J), d)
    Z = null_space_basis(J)
    base = np.linalg.norm(delta)
    for _ in range(100):
        zeta = Z @ rng.standard_normal(Z.shape[1])
        assert base <= np.linalg.norm(delta + zeta)


def test_dual_route_matches_enumeration(rng):
    for _ in range(30):
        G, A, b = feasible_qp(rng, 4, 6)
        lam, d, sol = solve_displacement(G, A, b)
        ref = qp_active_set_enumerate(np.linalg.inv(G), A, b)
        assert 0.5 * d @ np.linalg.solve(G, d) == pytest.approx(ref.objective, abs=1e-8)
        np.testing.assert_allclose(d, ref.d, atol=1e-6)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_multilabel_fast_path_equals_full_codebook(n, rng):
    net = make_net([3 * n + 2, 10, n], seed=n)
    fast, full = multilabel_codebook(n), materialize_multilabel(n)
    for _ in range(10):
        x = rng.random(3 * n + 2)
        k = int(rng.integers(full.l))
        a = jma_step(net, fast, full.C[k], x, EXACT)
        b = jma_step(net, full, k, x, EXACT)
        np.testing.assert_allclose(a.delta_star, b.delta_star, atol=1e-8)


def test_rank_deficient_step():
    W = np.array([[1.0, 2.0, 0.0, 0.0], [2.0, 4.0, 0.0, 0.0]])
    with pytest.raises(RankDeficient):
        jma_step(linear_net(W), onehot_codebook(2), 1, np.full(4, 0.5))


def test_rank_deficient_attack_is_recorded():
    W = np.array([[1.0, 2.0, 0.0, 0.0], [2.0, 4.0, 0.0, 0.0]])
    res = jma_attack(linear_net(W), onehot_codebook(2), 0, np.full(4, 0.5))
    assert not res.success and res.failure == "RankDeficient"


def test_already_target_raises(rng):
    W = rng.standard_normal((3, 5))
    x = rng.random(5)
    with pytest.raises(AlreadyTarget):
        jma_attack(linear_net(W), onehot_codebook(3), decode(onehot_codebook(3), W @ x), x)


def test_linear_one_shot(rng):
    for _ in range(10):
        W, c, x0, t = linear_instance(rng)
        res = jma_attack(linear_net(W, c), onehot_codebook(W.shape[0]), t, x0)
        assert res.success
        assert res.v_loops == 1 and res.n_it == 6
        assert decode(onehot_codebook(W.shape[0]), W @ res.x_adv + c) == t


def test_linear_one_shot_matches_qp_oracle(rng):
    W, c, x0, t = linear_instance(rng, n=4, m=12)
    cb = onehot_codebook(4)
    res = jma_attack(linear_net(W, c), cb, t, x0)
    step = jma_step(linear_net(W, c), cb, t, x0)
    ref = qp_active_set_enumerate(np.linalg.inv(gram(W)), step.constraints.A, step.constraints.b)
    assert np.linalg.norm(res.delta) == pytest.approx(np.sqrt(2 * ref.objective), rel=1e-6)


# Seed-locked run: make_synthetic(0, 10, 4, 4), make_net([10, 16, 4], seed=1),
# 300 epochs at lr 0.1, attack sample 0 towards class (y + 1) % 4 with eps 0.5.
MLP_FIXTURE = {"n_it": 6, "v_loops": 1, "mse": 0.11668383415016993}


@pytest.fixture(scope="module")
def small_mlp():
    ds = make_synthetic(0, 10, 4, 4, "onehot", 30)
    net = train(make_net([10, 16, 4], seed=1), ds, onehot_codebook(4), 300, 0.1)
    return net, ds


def test_seeded_mlp_regression(small_mlp):
    net, ds = small_mlp
    cb = onehot_codebook(4)
    x0 = ds.X[0]
    t = (int(ds.y[0]) + 1) % 4
    res = jma_attack(net, cb, t, x0, AttackConfig(epsilon=0.5))
    assert res.success
    fresh = LayeredNet(tuple(w.copy() for w in net.weights), tuple(b.copy() for b in net.biases))
    assert decode(cb, forward_logits(fresh, res.x_adv)) == t
    mse, _ = metrics(res.delta, 10)
    assert res.n_it == MLP_FIXTURE["n_it"] and res.v_loops == MLP_FIXTURE["v_loops"]
    assert mse == pytest.approx(MLP_FIXTURE["mse"], rel=1e-6)


def test_result_invariants(small_mlp):
    net, ds = small_mlp
    cb = onehot_codebook(4)
    for anchor in ("step", "origin"):
        for i in range(15):
            x0 = ds.X[i]
            t = (int(ds.y[i]) + 1 + i % 3) % 4
            res = jma_attack(net, cb, t, x0, AttackConfig(bs_anchor=anchor))
            assert np.all(res.x_adv >= 0) and np.all(res.x_adv <= 1)
            assert res.success
            assert decode(cb, forward_logits(net, res.x_adv)) == t
            assert res.n_it == res.v_loops - 1 + 6
            assert np.linalg.norm(res.delta) <= np.linalg.norm(res.x_unrefined - x0)


def test_ecoc_attack_runs(rng):
    cb = hadamard_codebook(8, 6)
    ds = make_synthetic(1, 16, 8, 6, "ecoc", 30)
    net = train(make_net([16, 24, 8], seed=2), ds, cb, 300, 0.1)
    wins = 0
    for i in range(10):
        t = (int(ds.y[i]) + 1) % 6
        res = jma_attack(net, cb, t, ds.X[i])
        wins += res.success
        if res.success:
            assert decode(cb, forward_logits(net, res.x_adv)) == t
    assert wins >= 9


def test_lots_zero_iterations_when_at_target(rng):
    W = rng.standard_normal((3, 6))
    x = rng.random(6)
    t = decode(onehot_codebook(3), W @ x)
    res = lots_attack(linear_net(W), onehot_codebook(3), t, W @ x, x)
    assert res.success and res.n_it == 0


def test_lots_zero_gradient(rng):
    W = rng.standard_normal((3, 6))
    x = rng.random(6)
    z = W @ x
    t = (decode(onehot_codebook(3), z) + 1) % 3
    res = lots_attack(linear_net(W), onehot_codebook(3), t, z, x)
    assert not res.success and res.failure == "ZeroGradient"


def test_lots_linear_progress(rng):
    W, c, x0, t = linear_instance(rng, n=3, m=10)
    net = linear_net(W, c)
    goal = W @ x0 + c
    goal[t] = goal.max() + 1.0
    dists = []
    for k in range(0, 40, 5):
        res = lots_attack(net, onehot_codebook(3), t, goal, x0, n_it_max=k)
        dists.append(np.linalg.norm(forward_logits(net, res.x_adv) - goal))
        if res.success:
            break
    assert all(b <= a for a, b in zip(dists, dists[1:]))


def test_jma_needs_fewer_loops_than_lots(small_mlp):
    from jma.experiment import lots_target_logits

    net, ds = small_mlp
    cb = onehot_codebook(4)
    wins = 0
    for i in range(20):
        t = (int(ds.y[i]) + 1) % 4
        a = jma_attack(net, cb, t, ds.X[i])
        b = lots_attack(net, cb, t, lots_target_logits(net, cb, ds, t), ds.X[i])
        wins += a.success and a.v_loops < b.n_it
    assert wins >= 16


def test_metrics_examples():
    delta = np.zeros(300)
    delta[0] = 0.3
    mse, _ = metrics(delta, 300)
    assert mse == pytest.approx(0.3 / np.sqrt(300)) and mse == pytest.approx(0.017320, abs=1e-6)
    assert metrics(np.zeros(4), 4)[0] == 0.0
    original = np.ones(8)
    target = original.copy()
    target[:5] = -1
    achieved = target.copy()
    achieved[0] = 1
    assert metrics(np.zeros(8), 8, target, achieved, original)[1] == pytest.approx(0.8)
    assert metrics(np.zeros(2), 2, 3, 3)[1] == 1.0
    assert metrics(np.zeros(2), 2, 3, 1)[1] == 0.0


@pytest.mark.parametrize("kwargs", [{"epsilon": 0.0}, {"n_bs": 0}, {"n_it_max": 0}, {"bs_anchor": "x"}])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        AttackConfig(**kwargs)
