import math

import numpy as np
import pytest


def _spec(kind, **kwargs):
    from regretobserver.tools import ro_disturbance
    return ro_disturbance.PatternSpec(kind=ro_disturbance.PatternKind(kind), **kwargs)


def test_constant_one():
    from regretobserver.tools import ro_disturbance
    r = ro_disturbance.generate(_spec("const"), n=2, m=1, T=1)
    assert np.array_equal(r.w_stack, np.ones(4))
    assert np.array_equal(r.v_stack, np.ones(2))


def test_deterministic_waveforms():
    from regretobserver.tools import ro_disturbance
    r = ro_disturbance.generate(_spec("sin"), n=1, m=1, T=2)
    assert np.allclose(r.w_stack, [0.0, 0.841471, 0.909297], atol=1e-6)
    r = ro_disturbance.generate(_spec("sawtooth"), n=1, m=1, T=4)
    assert np.allclose(r.w_stack, [-1.0, -0.5, 0.0, 0.5, -1.0])
    r = ro_disturbance.generate(_spec("step"), n=1, m=1, T=3)
    assert np.array_equal(r.w_stack, [0.0, 0.0, 1.0, 1.0])
    r = ro_disturbance.generate(_spec("step"), n=1, m=1, T=4)
    assert np.array_equal(r.w_stack, [0.0, 0.0, 0.0, 1.0, 1.0])
    r = ro_disturbance.generate(_spec("stairs"), n=1, m=1, T=5)
    assert np.allclose(r.w_stack, [0.0, 0.0, 0.25, 0.25, 0.5, 0.5])


def test_clocked_waveforms():
    from regretobserver.tools import ro_disturbance, ro_errors
    r = ro_disturbance.generate(_spec("sin", clock=0.005), n=1, m=1, T=2)
    assert np.allclose(r.w_stack, [0.0, math.sin(0.005), math.sin(0.01)], atol=1e-15)
    r = ro_disturbance.generate(_spec("sawtooth", clock=0.5), n=1, m=1, T=4)
    assert np.allclose(r.w_stack, [-1.0, -0.75, -0.5, -0.25, 0.0])
    # step and stairs stay on the sample index
    r = ro_disturbance.generate(_spec("stairs", clock=0.005), n=1, m=1, T=3)
    assert np.allclose(r.w_stack, [0.0, 0.0, 0.25, 0.25])
    with pytest.raises(ro_errors.BadConfig):
        _spec("sin", clock=0.0)


def test_waveform_is_shared_by_components():
    from regretobserver.tools import ro_disturbance
    r = ro_disturbance.generate(_spec("sin", amplitude=2.0), n=3, m=2, T=3)
    s = 2.0 * np.sin(np.arange(4.0))
    assert np.allclose(r.w_stack.reshape(4, 3), s[:, None])
    assert np.allclose(r.v_stack.reshape(4, 2), s[:, None])
    r = ro_disturbance.generate(_spec("step", onset=1), n=1, m=1, T=2)
    assert np.array_equal(r.v_stack, [0.0, 1.0, 1.0])


def test_stochastic_determinism():
    from regretobserver.tools import ro_disturbance
    spec = _spec("gaussian", seed=7)
    a = ro_disturbance.generate(spec, n=2, m=2, T=3, realization_index=4)
    b = ro_disturbance.generate(spec, n=2, m=2, T=3, realization_index=4)
    c = ro_disturbance.generate(spec, n=2, m=2, T=3, realization_index=5)
    d = ro_disturbance.generate(_spec("gaussian", seed=8), n=2, m=2, T=3, realization_index=4)
    assert np.array_equal(a.v_stack, b.v_stack) and np.array_equal(a.w_stack, b.w_stack)
    assert not np.array_equal(a.w_stack, c.w_stack)
    assert not np.array_equal(a.w_stack, d.w_stack)


def test_uniform_ranges():
    from regretobserver.tools import ro_disturbance
    V, W = ro_disturbance.generate_batch(_spec("uniform-half", seed=1), n=2, m=1, T=4, count=50)
    assert V.min() >= 0.5 and W.max() <= 1.0
    V, W = ro_disturbance.generate_batch(_spec("uniform-full", seed=1), n=2, m=1, T=4, count=50)
    assert V.min() >= 0.0 and W.max() <= 1.0
    assert W.min() < 0.5


def test_batch_columns_match_single_draws():
    from regretobserver.tools import ro_disturbance
    spec = _spec("gaussian", seed=3)
    V, W = ro_disturbance.generate_batch(spec, n=2, m=3, T=2, count=4, start=10)
    assert V.shape == (9, 4) and W.shape == (6, 4)
    for j in range(4):
        r = ro_disturbance.generate(spec, n=2, m=3, T=2, realization_index=10 + j)
        assert np.array_equal(V[:, j], r.v_stack)
        assert np.array_equal(W[:, j], r.w_stack)


def test_generate_errors():
    from regretobserver.tools import ro_disturbance, ro_errors
    with pytest.raises(ro_errors.WorstCaseNeedsObserver):
        ro_disturbance.generate(_spec("worst"), n=1, m=1, T=2)
    with pytest.raises(ro_errors.DimensionMismatch):
        ro_disturbance.generate(_spec("const"), n=1, m=1, T=0)
    with pytest.raises(ro_errors.BadConfig):
        ro_disturbance.generate_batch(_spec("const"), n=1, m=1, T=2, count=0)
    with pytest.raises(ro_errors.BadConfig):
        _spec("const", amplitude=0.0)
    with pytest.raises(ro_errors.BadConfig):
        _spec("sawtooth", period=0)
    with pytest.raises(ro_errors.BadConfig):
        _spec("gaussian", seed=-1)


def test_parse_pattern():
    from regretobserver.tools import ro_disturbance, ro_errors
    assert ro_disturbance.parse_pattern(" Sin ") == ro_disturbance.PatternKind.SINE
    assert ro_disturbance.parse_pattern("uniform-half") == ro_disturbance.PatternKind.UNIFORM_HALF
    with pytest.raises(ro_errors.UnknownPattern):
        ro_disturbance.parse_pattern("pink")
    assert ro_disturbance.ALL_PATTERNS[0] == ro_disturbance.PatternKind.GAUSSIAN
    assert ro_disturbance.ALL_PATTERNS[-1] == ro_disturbance.PatternKind.WORST_CASE


def test_worst_case_isotropic():
    from regretobserver.tools import ro_disturbance, ro_model, ro_sls, ro_synthesis
    sys = ro_model.LtvSystem.time_invariant(np.zeros((2, 2)), np.zeros((2, 1)), np.zeros((1, 2)), 2)
    prob = ro_synthesis.SynthesisProblem.build(sys, ro_model.NoiseModel.scaled(2, 1, 2))
    maps = ro_sls.ErrorMaps(Phi_v=np.zeros((6, 3)), Phi_w=np.eye(6), n=2, m=1)
    r = ro_disturbance.worst_case_noise(maps, prob)
    assert np.linalg.norm(np.concatenate([r.v_stack, r.w_stack])) == pytest.approx(1.0)
    e = ro_sls.error_trajectory(maps, r.v_stack, r.w_stack)
    assert ro_synthesis.quadratic_cost(e, prob) == pytest.approx(1.0)


def test_worst_case_attains_spectral_cost():
    from regretobserver.regretobserver_selftest import random_system, toy_problem
    from regretobserver.tools import ro_disturbance, ro_model, ro_sls, ro_synthesis
    rng = np.random.default_rng(40)
    problems = [toy_problem()]
    sys = random_system(rng, 2, 1, 3)
    problems.append(ro_synthesis.SynthesisProblem.build(sys, ro_model.NoiseModel.scaled(2, 1, 3, hv=2.0, hw=0.5)))
    for prob in problems:
        maps = ro_synthesis.synth_h2(prob)
        r = ro_disturbance.worst_case_noise(maps, prob)
        f = prob.factors
        assert np.linalg.norm(f.Hv_stack @ r.v_stack) ** 2 + np.linalg.norm(f.Hw_stack @ r.w_stack) ** 2 == pytest.approx(1.0)
        worst = ro_synthesis.quadratic_cost(ro_sls.error_trajectory(maps, r.v_stack, r.w_stack), prob)
        bound = ro_synthesis.hinf_cost(maps, prob)
        assert worst == pytest.approx(bound, rel=1e-8)
        Z = rng.standard_normal((prob.ops.nv + prob.ops.ne, 4000))
        Z /= np.linalg.norm(Z, axis=0)
        V = f.Hv_inv @ Z[:prob.ops.nv]
        W = f.Hw_inv @ Z[prob.ops.nv:]
        sampled = ro_synthesis.quadratic_cost(ro_sls.error_trajectory(maps, V, W), prob)
        assert float(np.max(sampled)) <= worst * (1.0 + 1e-10)
        assert np.all(np.isfinite(sampled)) and np.all(sampled >= 0.0)


def test_worst_case_sign_is_fixed():
    from regretobserver.regretobserver_selftest import toy_problem
    from regretobserver.tools import ro_disturbance, ro_synthesis
    prob = toy_problem()
    r = ro_disturbance.worst_case_noise(ro_synthesis.synth_h2(prob), prob)
    z = np.concatenate([r.v_stack, r.w_stack])
    assert z[int(np.argmax(np.abs(z)))] > 0.0
    assert r.pattern.kind.value == "worst"
    assert math.isclose(float(np.linalg.norm(z)), 1.0, rel_tol=1e-12)
