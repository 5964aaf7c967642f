import numpy as np
import pytest


def _random_causal_gains(rng, n, m, T, skip_first_column=False, scale=0.4):
    from regretobserver.tools import ro_sls
    blocks = {}
    for t in range(T + 1):
        for tau in range(t + 1):
            if skip_first_column and tau == 0:
                continue
            blocks[(tau, t)] = scale * rng.standard_normal((n, m))
    return ro_sls.ObserverGains.from_blocks(blocks, n, m, T)


def test_phi_w_toy():
    from regretobserver.regretobserver_selftest import toy_problem
    from regretobserver.tools import ro_sls
    prob = toy_problem()
    Phi_w = ro_sls.phi_w_from_phi_v([[0.0, 0.0], [0.0, 0.25]], prob.ops)
    assert np.allclose(Phi_w, [[1.0, 0.0], [0.25, 1.0]])
    assert np.allclose(ro_sls.phi_w_from_phi_v(np.zeros((2, 2)), prob.ops), [[1.0, 0.0], [0.5, 1.0]])


def test_maps_from_phi_v_is_achievable():
    from regretobserver.regretobserver_selftest import random_system
    from regretobserver.tools import ro_model, ro_sls
    rng = np.random.default_rng(10)
    sys = random_system(rng, 3, 2, 4)
    ops = ro_model.build_stacked_operators(sys)
    Phi_v = rng.standard_normal((ops.ne, ops.nv)) * ~ro_sls.upper_block_mask(3, 2, 5)
    maps = ro_sls.maps_from_phi_v(Phi_v, ops)
    assert maps.check(ops) <= 1e-10
    assert maps.T == 4
    assert ro_sls.upper_block_max(maps.Phi_w, 3, 3) == 0.0


def test_error_maps_validation():
    from regretobserver.tools import ro_errors, ro_sls
    with pytest.raises(ro_errors.CausalityViolation):
        ro_sls.ErrorMaps(Phi_v=[[0.0, 1.0], [0.0, 0.0]], Phi_w=np.eye(2), n=1, m=1)
    maps = ro_sls.ErrorMaps(Phi_v=[[0.0, 1.0], [0.0, 0.0]], Phi_w=np.eye(2), n=1, m=1, causal=False)
    assert not maps.causal
    with pytest.raises(ro_errors.DimensionMismatch):
        ro_sls.ErrorMaps(Phi_v=np.zeros((2, 3)), Phi_w=np.eye(2), n=1, m=1)


def test_achievability_violation():
    from regretobserver.regretobserver_selftest import toy_problem
    from regretobserver.tools import ro_errors, ro_sls
    prob = toy_problem()
    maps = ro_sls.ErrorMaps(Phi_v=np.zeros((2, 2)), Phi_w=np.eye(2), n=1, m=1)
    assert ro_sls.achievability_residual(maps, prob.ops) == pytest.approx(0.5)
    with pytest.raises(ro_errors.AchievabilityViolation):
        maps.check(prob.ops)


def test_recover_gains_toy():
    from regretobserver.tools import ro_sls
    maps = ro_sls.ErrorMaps(Phi_v=[[0.0, 0.0], [0.0, 0.25]], Phi_w=[[1.0, 0.0], [0.25, 1.0]], n=1, m=1)
    gains = ro_sls.recover_gains(maps)
    assert np.allclose(gains.L, [[0.0, 0.0], [0.0, 0.25]])
    assert gains.is_block_diagonal()
    assert gains.block(1, 1)[0, 0] == pytest.approx(0.25)


def test_gains_round_trip():
    from regretobserver.regretobserver_selftest import random_system
    from regretobserver.tools import ro_model, ro_sls
    rng = np.random.default_rng(11)
    for _ in range(50):
        n, m, T = int(rng.integers(1, 5)), int(rng.integers(1, 5)), int(rng.integers(1, 7))
        sys = random_system(rng, n, m, T)
        ops = ro_model.build_stacked_operators(sys)
        gains = _random_causal_gains(rng, n, m, T, scale=0.4 / m)
        maps = ro_sls.maps_from_gains(gains, ops)
        assert maps.check(ops) <= 1e-8
        back = ro_sls.recover_gains(maps)
        assert np.linalg.norm(back.L - gains.L) <= 1e-8 * max(1.0, np.linalg.norm(gains.L))


def test_gains_reject_future():
    from regretobserver.tools import ro_errors, ro_sls
    with pytest.raises(ro_errors.NotCausal):
        ro_sls.ObserverGains([[0.0, 1.0], [0.0, 0.0]], 1, 1)
    with pytest.raises(ro_errors.NotCausal):
        ro_sls.ObserverGains.from_blocks({(1, 0): np.ones((1, 1))}, 1, 1, 1)
    maps = ro_sls.ErrorMaps(Phi_v=[[0.0, 1.0], [0.0, 0.0]], Phi_w=np.eye(2), n=1, m=1, causal=False)
    with pytest.raises(ro_errors.NotCausal):
        ro_sls.recover_gains(maps)
    with pytest.raises(ro_errors.DimensionMismatch):
        ro_sls.ObserverGains(np.zeros((2, 2)), 1, 1).block(1, 0)


def test_recover_gains_detects_leak():
    from regretobserver.tools import ro_errors, ro_sls
    # plant the leak after construction so the causality check does not catch it first
    maps = ro_sls.ErrorMaps(Phi_v=[[0.0, 0.0], [0.0, 0.25]], Phi_w=[[1.0, 0.0], [0.25, 1.0]], n=1, m=1)
    object.__setattr__(maps, "Phi_v", np.array([[0.0, 1e-3], [0.0, 0.25]]))
    with pytest.raises(ro_errors.CausalityViolation):
        ro_sls.recover_gains(maps)


def test_simulation_matches_maps():
    from regretobserver.regretobserver_selftest import random_system
    from regretobserver.tools import ro_model, ro_sls
    rng = np.random.default_rng(12)
    for _ in range(100):
        n, m, T = int(rng.integers(1, 5)), int(rng.integers(1, 5)), int(rng.integers(1, 7))
        p = int(rng.integers(1, 3))
        sys = random_system(rng, n, m, T, p=p)
        ops = ro_model.build_stacked_operators(sys)
        gains = _random_causal_gains(rng, n, m, T, scale=0.4 / m)
        maps = ro_sls.maps_from_gains(gains, ops)
        x0 = rng.standard_normal(n)
        u = rng.standard_normal((T + 1, p))
        v = rng.standard_normal((T + 1, m))
        w = rng.standard_normal((T + 1, n))
        _, e = ro_sls.simulate_observer(sys, gains, x0, x0, u, v, w)
        v_stack, w_stack = ro_sls.stack_noise(sys, v, w, x0=x0, xhat0=x0)
        expected = ro_sls.error_trajectory(maps, v_stack, w_stack)
        assert np.allclose(e.reshape(-1), expected, atol=1e-9 * max(1.0, float(np.abs(expected).max())))


def test_simulation_with_initial_mismatch():
    from regretobserver.regretobserver_selftest import random_system
    from regretobserver.tools import ro_model, ro_sls
    rng = np.random.default_rng(13)
    n, m, T = 3, 2, 3
    sys = random_system(rng, n, m, T)
    ops = ro_model.build_stacked_operators(sys)
    gains = _random_causal_gains(rng, n, m, T, skip_first_column=True)
    maps = ro_sls.maps_from_gains(gains, ops)
    x0 = rng.standard_normal(n)
    xhat0 = rng.standard_normal(n)
    u = np.zeros((T + 1, 1))
    v = rng.standard_normal((T + 1, m))
    w = rng.standard_normal((T + 1, n))
    xhat, e = ro_sls.simulate_observer(sys, gains, x0, xhat0, u, v, w)
    v_stack, w_stack = ro_sls.stack_noise(sys, v, w, x0=x0, xhat0=xhat0)
    assert np.allclose(e.reshape(-1), ro_sls.error_trajectory(maps, v_stack, w_stack), atol=1e-10)
    assert xhat.shape == (T + 1, n)


def test_error_trajectory_columns():
    from regretobserver.regretobserver_selftest import toy_problem
    from regretobserver.tools import ro_errors, ro_sls
    prob = toy_problem()
    maps = ro_sls.maps_from_phi_v([[0.0, 0.0], [0.0, 0.25]], prob.ops)
    V = np.array([[1.0, 0.0], [2.0, -1.0]])
    W = np.array([[0.5, 1.0], [0.0, 3.0]])
    E = ro_sls.error_trajectory(maps, V, W)
    for j in range(2):
        assert np.allclose(E[:, j], ro_sls.error_trajectory(maps, V[:, j], W[:, j]))
    with pytest.raises(ro_errors.DimensionMismatch):
        ro_sls.error_trajectory(maps, V, W[:, :1])


def test_kalman_matches_h2():
    from regretobserver.regretobserver_selftest import random_system
    from regretobserver.tools import ro_model, ro_sls, ro_synthesis
    rng = np.random.default_rng(14)
    for _ in range(20):
        n, m, T = int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(1, 5))
        sys = random_system(rng, n, m, T)
        noise = ro_model.NoiseModel.scaled(n, m, T, sigma_v=0.5, sigma_w=2.0)
        prob = ro_synthesis.SynthesisProblem.build(sys, noise)
        h2 = ro_sls.recover_gains(ro_synthesis.synth_h2(prob))
        kalman = ro_sls.kalman_gains(sys, noise)
        assert h2.is_block_diagonal(rel_tol=1e-6)
        assert np.linalg.norm(h2.L - kalman.L) <= 1e-7 * max(1.0, np.linalg.norm(kalman.L))


def test_luenberger_gains():
    from regretobserver.tools import ro_sls
    gains = ro_sls.luenberger_gains([[0.3], [0.1]], 3)
    assert gains.L.shape == (8, 4)
    assert gains.is_block_diagonal()
    for t in range(4):
        assert np.allclose(gains.block(t, t), [[0.3], [0.1]])
    assert not np.any(gains.block(0, 2))
