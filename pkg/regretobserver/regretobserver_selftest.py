import logging
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np

from regretobserver.tools import ro_errors
from regretobserver.tools import ro_model
from regretobserver.tools import ro_sdp
from regretobserver.tools import ro_sls
from regretobserver.tools import ro_synthesis

logger = logging.getLogger("ro_selftest")


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def toy_problem() -> ro_synthesis.SynthesisProblem:
    """a = 0.5, c = 1, T = 1, every weight and noise shape the identity."""
    sys = ro_model.LtvSystem.time_invariant([[0.5]], [[0.0]], [[1.0]], 1)
    noise = ro_model.NoiseModel.scaled(1, 1, 1)
    return ro_synthesis.SynthesisProblem.build(sys, noise)


def random_system(rng: np.random.Generator, n: int, m: int, T: int, p: int = 1) -> ro_model.LtvSystem:
    A = [0.6 * rng.standard_normal((n, n)) for _ in range(T + 1)]
    B = [rng.standard_normal((n, p)) for _ in range(T + 1)]
    C = [rng.standard_normal((m, n)) for _ in range(T + 1)]
    return ro_model.LtvSystem(tuple(A), tuple(B), tuple(C))


def _expect(ok: bool, what: str, *args) -> None:
    if not ok:
        raise ro_errors.CheckFailed(what % args)


def _check_toy_h2() -> str:
    prob = toy_problem()
    maps = ro_synthesis.synth_h2(prob)
    gains = ro_sls.recover_gains(maps)
    cost = ro_synthesis.h2_cost(maps, prob)
    _expect(np.allclose(maps.Phi_v, [[0.0, 0.0], [0.0, 0.25]], atol=1e-9), "Phi_v = %s", maps.Phi_v.tolist())
    _expect(np.allclose(maps.Phi_w, [[1.0, 0.0], [0.25, 1.0]], atol=1e-9), "Phi_w = %s", maps.Phi_w.tolist())
    _expect(abs(cost - 2.125) <= 1e-9, "cost %.12g, expected 2.125", cost)
    _expect(np.allclose(gains.L, [[0.0, 0.0], [0.0, 0.25]], atol=1e-9), "gains %s", gains.L.tolist())
    return "cost %.12g" % cost


def _check_toy_clairvoyant() -> str:
    prob = toy_problem()
    maps = ro_synthesis.synth_clairvoyant(prob)
    cost = ro_synthesis.h2_cost(maps, prob)
    _expect(abs(cost - 1.625) <= 1e-9, "cost %.12g, expected 1.625", cost)
    _expect(abs(maps.Phi_v[0, 1] - 0.5) <= 1e-9, "Phi_v = %s", maps.Phi_v.tolist())
    return "cost %.12g" % cost


def _check_sdp_oracles() -> str:
    sol = ro_sdp.solve_min_cost_lmi(ro_sdp.LmiProblem(cost=[1.0], F0=[[0.0, 1.0], [1.0, 0.0]], F=(np.eye(2),)))
    sol.raise_for_status()
    _expect(abs(sol.objective - 1.0) <= 1e-6, "scalar LMI optimum %.9g, expected 1", sol.objective)
    _, lam, _ = ro_sdp.min_max_eigenvalue(ro_sdp.LmiProblem(cost=np.zeros(0), F0=np.diag([1.0, 2.0, 3.0])))
    _expect(abs(lam - 3.0) <= 1e-6, "lambda_max %.9g, expected 3", lam)
    return "x*=%.9f, lambda_max=%.9f" % (sol.objective, lam)


def _check_random_instances() -> str:
    rng = np.random.default_rng(20240601)
    worst_res = worst_round = worst_sim = 0.0
    for _ in range(10):
        n, m, T = int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(1, 5))
        sys = random_system(rng, n, m, T)
        prob = ro_synthesis.SynthesisProblem.build(sys, ro_model.NoiseModel.scaled(n, m, T))
        maps = ro_synthesis.synth_h2(prob)
        worst_res = max(worst_res, ro_sls.achievability_residual(maps, prob.ops))
        gains = ro_sls.recover_gains(maps)
        back = ro_sls.maps_from_gains(gains, prob.ops)
        worst_round = max(worst_round, float(np.linalg.norm(back.Phi_v - maps.Phi_v)) / max(1.0, float(np.linalg.norm(maps.Phi_v))))
        x0 = rng.standard_normal(n)
        u = rng.standard_normal((T + 1, sys.p))
        v = rng.standard_normal((T + 1, m))
        w = rng.standard_normal((T + 1, n))
        _, e_sim = ro_sls.simulate_observer(sys, gains, x0, x0, u, v, w)
        v_stack, w_stack = ro_sls.stack_noise(sys, v, w, x0, x0)
        e_stack = ro_sls.error_trajectory(maps, v_stack, w_stack).reshape(T + 1, n)
        worst_sim = max(worst_sim, float(np.linalg.norm(e_sim - e_stack)) / max(1.0, float(np.linalg.norm(e_sim))))
    _expect(worst_res <= 1e-8, "achievability residual %.1e", worst_res)
    _expect(worst_round <= 1e-8, "gain round trip error %.1e", worst_round)
    _expect(worst_sim <= 1e-9, "simulation mismatch %.1e", worst_sim)
    return "residual %.1e, round trip %.1e, simulation %.1e" % (worst_res, worst_round, worst_sim)


def _check_kalman_structure() -> str:
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(5):
        n, m, T = int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(2, 5))
        sys = random_system(rng, n, m, T)
        noise = ro_model.NoiseModel.scaled(n, m, T, sigma_v=0.5, sigma_w=2.0)
        prob = ro_synthesis.SynthesisProblem.build(sys, noise)
        gains = ro_sls.recover_gains(ro_synthesis.synth_h2(prob))
        _expect(gains.is_block_diagonal(1e-6), "H2 gains are not block diagonal")
        kalman = ro_sls.kalman_gains(sys, noise)
        worst = max(worst, float(np.max(np.abs(gains.L - kalman.L))))
    _expect(worst <= 1e-8, "max |L_h2 - L_kalman| = %.1e", worst)
    return "max |L_h2 - L_kalman| = %.1e" % worst


CHECKS: List[Tuple[str, Callable[[], str]]] = [
    ("toy scalar H2 observer", _check_toy_h2),
    ("toy scalar clairvoyant observer", _check_toy_clairvoyant),
    ("SDP oracles", _check_sdp_oracles),
    ("achievability, round trip, simulation", _check_random_instances),
    ("Kalman structure of H2 gains", _check_kalman_structure),
]


def run_selftest() -> List[CheckResult]:
    results = []
    for name, fn in CHECKS:
        try:
            detail = fn()
            results.append(CheckResult(name, True, detail))
        except ro_errors.RegretObserverError as e:
            results.append(CheckResult(name, False, "%s: %s" % (type(e).__name__, e)))
        logger.info("selftest %-40s %s", name, "ok" if results[-1].passed else "FAILED")
    return results
