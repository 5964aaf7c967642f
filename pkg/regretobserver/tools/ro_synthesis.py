import enum
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from regretobserver.tools import ro_errors
from regretobserver.tools import ro_linalg
from regretobserver.tools import ro_model
from regretobserver.tools import ro_sdp
from regretobserver.tools import ro_sls

logger = logging.getLogger("ro_synthesis")

CERTIFICATE_TOL = 1e-5


class SynthesisMethod(str, enum.Enum):
    H2 = "h2"
    HINF = "hinf"
    CLAIRVOYANT = "clairvoyant"
    REGRET = "regret"


class NoiseWeighting(str, enum.Enum):
    """Which noise normalization a Frobenius problem uses: covariances or ellipsoids."""
    COVARIANCE = "covariance"
    ELLIPSOID = "ellipsoid"


@dataclass(frozen=True)
class SynthesisProblem:
    """
    Stacked problem data with Φ_w eliminated.

    For a noise normalization N = blkdiag(N_v, N_w) the weighted map is
    G(Φ_v) = [Φ_v N_v, Φ_w N_w] = Φ_v·R + P, where R = [N_v, −Cstack·Z·K·N_w]
    and P = [0, K·N_w]. N = Σ^{1/2} gives the H2 data, N = 𝓗⁻¹ the H∞/regret data.
    """
    sys: ro_model.LtvSystem
    noise: ro_model.NoiseModel
    weights: ro_model.CostWeights
    ops: ro_model.StackedOperators
    factors: ro_model.StackedNoiseFactors
    Qhalf: np.ndarray
    R_cov: np.ndarray = field(repr=False)
    P_cov: np.ndarray = field(repr=False)
    R_ell: np.ndarray = field(repr=False)
    P_ell: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.ops.n

    @property
    def m(self) -> int:
        return self.ops.m

    @property
    def T(self) -> int:
        return self.ops.T

    def data(self, weighting: NoiseWeighting) -> Tuple[np.ndarray, np.ndarray]:
        if weighting == NoiseWeighting.COVARIANCE:
            return self.R_cov, self.P_cov
        return self.R_ell, self.P_ell

    @classmethod
    def build(cls, sys: ro_model.LtvSystem, noise: ro_model.NoiseModel,
              weights: Optional[ro_model.CostWeights] = None) -> "SynthesisProblem":
        if weights is None:
            weights = ro_model.CostWeights.scaled(sys.n, sys.T)
        if noise.T != sys.T or len(weights.Q_blocks) != sys.T + 1:
            raise ro_errors.DimensionMismatch("horizons differ: system %d, noise %d, weights %d" % (
                sys.T, noise.T, len(weights.Q_blocks) - 1))
        if noise.Hv_blocks[0].shape[0] != sys.m or noise.Hw_blocks[0].shape[0] != sys.n:
            raise ro_errors.DimensionMismatch("noise model is for m=%d, n=%d but the system has m=%d, n=%d" % (
                noise.Hv_blocks[0].shape[0], noise.Hw_blocks[0].shape[0], sys.m, sys.n))
        if weights.Q_blocks[0].shape[0] != sys.n:
            raise ro_errors.DimensionMismatch("Q blocks are %s, expected %dx%d" % (weights.Q_blocks[0].shape, sys.n, sys.n))
        ops = ro_model.build_stacked_operators(sys)
        factors = ro_model.stacked_noise_factors(noise)
        R_cov, P_cov = _affine_data(ops, factors.Sv_half, factors.Sw_half)
        R_ell, P_ell = _affine_data(ops, factors.Hv_inv, factors.Hw_inv)
        return cls(
            sys=sys, noise=noise, weights=weights, ops=ops, factors=factors,
            Qhalf=ro_linalg.readonly(weights.stacked_half()),
            R_cov=ro_linalg.readonly(R_cov), P_cov=ro_linalg.readonly(P_cov),
            R_ell=ro_linalg.readonly(R_ell), P_ell=ro_linalg.readonly(P_ell),
        )


def _affine_data(ops: ro_model.StackedOperators, Nv: np.ndarray, Nw: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    KNw = ops.K @ Nw
    R = np.hstack([Nv, -ops.CZ @ KNw])
    P = np.hstack([np.zeros((ops.ne, ops.nv)), KNw])
    return R, P


@dataclass(frozen=True)
class WorstNoise:
    v_stack: np.ndarray
    w_stack: np.ndarray
    value: float


@dataclass(frozen=True)
class RegretCertificate:
    lambda_star: float
    M_eigs: np.ndarray
    worst_noise: WorstNoise


def free_mask(prob: SynthesisProblem, causal: bool = True) -> np.ndarray:
    if not causal:
        return np.ones((prob.ops.ne, prob.ops.nv), dtype=bool)
    return ~ro_sls.upper_block_mask(prob.n, prob.m, prob.T + 1)


def weighted_map(maps: ro_sls.ErrorMaps, prob: SynthesisProblem, weighting: NoiseWeighting) -> np.ndarray:
    """𝒬·[Φ_v N_v, Φ_w N_w]."""
    if maps.Phi_v.shape != (prob.ops.ne, prob.ops.nv):
        raise ro_errors.DimensionMismatch("maps %s do not belong to a problem with stacked dims %s" % (
            maps.Phi_v.shape, (prob.ops.ne, prob.ops.nv)))
    f = prob.factors
    if weighting == NoiseWeighting.COVARIANCE:
        Nv, Nw = f.Sv_half, f.Sw_half
    else:
        Nv, Nw = f.Hv_inv, f.Hw_inv
    return prob.Qhalf @ np.hstack([maps.Phi_v @ Nv, maps.Phi_w @ Nw])


def h2_cost(maps: ro_sls.ErrorMaps, prob: SynthesisProblem) -> float:
    G = weighted_map(maps, prob, NoiseWeighting.COVARIANCE)
    return float(np.sum(G * G))


def hinf_cost(maps: ro_sls.ErrorMaps, prob: SynthesisProblem) -> float:
    return ro_linalg.spectral_norm(weighted_map(maps, prob, NoiseWeighting.ELLIPSOID)) ** 2


def quadratic_cost(e, prob: SynthesisProblem) -> Union[float, np.ndarray]:
    """‖𝒬e‖²; one value per column when e holds several trajectories."""
    e = np.asarray(e, dtype=np.float64)
    if e.shape[0] != prob.ops.ne:
        raise ro_errors.DimensionMismatch("error stack has %d rows, expected %d" % (e.shape[0], prob.ops.ne))
    qe = prob.Qhalf @ e
    if qe.ndim == 1:
        return float(qe @ qe)
    return np.sum(qe * qe, axis=0)


def regret_matrix(maps: ro_sls.ErrorMaps, nc: ro_sls.ErrorMaps, prob: SynthesisProblem) -> np.ndarray:
    """ℳ = (𝒬G)ᵀ(𝒬G) − (𝒬G_nc)ᵀ(𝒬G_nc) in normalized noise coordinates."""
    G = weighted_map(maps, prob, NoiseWeighting.ELLIPSOID)
    Gnc = weighted_map(nc, prob, NoiseWeighting.ELLIPSOID)
    M = G.T @ G - Gnc.T @ Gnc
    return 0.5 * (M + M.T)


def _to_noise(z: np.ndarray, prob: SynthesisProblem, value: float) -> WorstNoise:
    nv = prob.ops.nv
    return WorstNoise(
        v_stack=ro_linalg.readonly(prob.factors.Hv_inv @ z[:nv]),
        w_stack=ro_linalg.readonly(prob.factors.Hw_inv @ z[nv:]),
        value=value,
    )


def regret_value(maps: ro_sls.ErrorMaps, nc: ro_sls.ErrorMaps, prob: SynthesisProblem) -> Tuple[float, WorstNoise]:
    eig = ro_linalg.sym_eig(regret_matrix(maps, nc, prob))
    return eig.max, _to_noise(eig.top_vector(), prob, eig.max)


def _least_squares_phi_v(prob: SynthesisProblem, weighting: NoiseWeighting, causal: bool) -> np.ndarray:
    # 𝒬 is block diagonal and invertible, so it drops out of each block row
    R, P = prob.data(weighting)
    n, m, T = prob.n, prob.m, prob.T
    Phi_v = np.zeros((prob.ops.ne, prob.ops.nv))
    if not causal:
        return ro_linalg.solve_least_squares(R.T, -P.T).T
    for k in range(T + 1):
        rows = slice(k * n, (k + 1) * n)
        cols = m * (k + 1)
        X = ro_linalg.solve_least_squares(R[:cols, :].T, -P[rows, :].T)
        Phi_v[rows, :cols] = X.T
    return Phi_v


def synth_h2(prob: SynthesisProblem) -> ro_sls.ErrorMaps:
    maps = ro_sls.maps_from_phi_v(_least_squares_phi_v(prob, NoiseWeighting.COVARIANCE, causal=True), prob.ops)
    maps.check(prob.ops)
    logger.info("h2 observer: cost %.10g", h2_cost(maps, prob))
    return maps


def synth_clairvoyant(prob: SynthesisProblem, weighting: NoiseWeighting = NoiseWeighting.COVARIANCE) -> ro_sls.ErrorMaps:
    """Unconstrained Frobenius minimizer; it also minimizes the spectral cost under the same weighting."""
    maps = ro_sls.maps_from_phi_v(_least_squares_phi_v(prob, weighting, causal=False), prob.ops, causal=False)
    maps.check(prob.ops)
    logger.info("clairvoyant observer (%s weighting): cost %.10g", weighting.value, h2_cost(maps, prob))
    return maps


def _schur_lmi(prob: SynthesisProblem, lam_top: bool, J: Optional[np.ndarray] = None) -> Tuple[ro_sdp.LmiProblem, np.ndarray, np.ndarray]:
    """
    Variables: the free entries of Φ_v (rank-two coefficients), then λ.

    lam_top: [[λI, 𝒬G],[(𝒬G)ᵀ, I]] (spectral bound);
    otherwise [[I, 𝒬G],[(𝒬G)ᵀ, λI + J]] (regret bound).
    """
    R, P = prob.data(NoiseWeighting.ELLIPSOID)
    ne, nw = prob.ops.ne, R.shape[1]
    d = ne + nw
    rows, cols = np.nonzero(free_mask(prob, causal=True))
    QP = prob.Qhalf @ P
    U = np.zeros((d, rows.size))
    W = np.zeros((d, rows.size))
    U[:ne, :] = prob.Qhalf[:, rows]
    W[ne:, :] = R[cols, :].T
    F0 = np.zeros((d, d))
    F0[:ne, ne:] = QP
    F0[ne:, :ne] = QP.T
    D = np.zeros((d, d))
    if lam_top:
        F0[ne:, ne:] = np.eye(nw)
        D[:ne, :ne] = np.eye(ne)
    else:
        F0[:ne, :ne] = np.eye(ne)
        F0[ne:, ne:] = J
        D[ne:, ne:] = np.eye(nw)
    cost = np.zeros(rows.size + 1)
    cost[-1] = 1.0
    return ro_sdp.LmiProblem(cost=cost, F0=F0, F=(D,), U=U, W=W), rows, cols


def _phi_v_from_solution(prob: SynthesisProblem, sol: ro_sdp.SdpSolution, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    Phi_v = np.zeros((prob.ops.ne, prob.ops.nv))
    Phi_v[rows, cols] = sol.x[:rows.size]
    return Phi_v


def _start_point(prob: SynthesisProblem, num_free: int) -> np.ndarray:
    QP = prob.Qhalf @ prob.P_ell
    x0 = np.zeros(num_free + 1)
    x0[-1] = float(np.sum(QP * QP)) + 1.0
    return x0


def solve_hinf(prob: SynthesisProblem, opts: Optional[ro_sdp.SolverOptions] = None) -> Tuple[ro_sls.ErrorMaps, ro_sdp.SdpSolution]:
    lmi, rows, cols = _schur_lmi(prob, lam_top=True)
    sol = ro_sdp.solve_min_cost_lmi(lmi, opts, x0=_start_point(prob, rows.size)).raise_for_status()
    maps = ro_sls.maps_from_phi_v(_phi_v_from_solution(prob, sol, rows, cols), prob.ops)
    maps.check(prob.ops)
    logger.info("hinf observer: lambda*=%.10g after %d Newton steps", sol.objective, sol.iterations)
    return maps, sol


def synth_hinf(prob: SynthesisProblem, opts: Optional[ro_sdp.SolverOptions] = None) -> ro_sls.ErrorMaps:
    return solve_hinf(prob, opts)[0]


def synth_regret(prob: SynthesisProblem, nc: ro_sls.ErrorMaps,
                 opts: Optional[ro_sdp.SolverOptions] = None) -> Tuple[ro_sls.ErrorMaps, RegretCertificate]:
    if nc.causal:
        raise ro_errors.NotClairvoyant("regret synthesis needs clairvoyant maps (causal=False)")
    Gnc = weighted_map(nc, prob, NoiseWeighting.ELLIPSOID)
    J = Gnc.T @ Gnc
    lmi, rows, cols = _schur_lmi(prob, lam_top=False, J=0.5 * (J + J.T))
    sol = ro_sdp.solve_min_cost_lmi(lmi, opts, x0=_start_point(prob, rows.size)).raise_for_status()
    maps = ro_sls.maps_from_phi_v(_phi_v_from_solution(prob, sol, rows, cols), prob.ops)
    maps.check(prob.ops)
    eig = ro_linalg.sym_eig(regret_matrix(maps, nc, prob))
    worst = _to_noise(eig.top_vector(), prob, eig.max)
    if abs(sol.objective - eig.max) > CERTIFICATE_TOL * max(1.0, abs(eig.max)):
        logger.warning("regret certificate slack: lambda*=%.10g but lambda_max(M)=%.10g", sol.objective, eig.max)
    logger.info("regret observer: lambda*=%.10g after %d Newton steps", sol.objective, sol.iterations)
    cert = RegretCertificate(lambda_star=float(sol.objective), M_eigs=eig.eigenvalues, worst_noise=worst)
    return maps, cert


@dataclass
class SynthesisResult:
    method: SynthesisMethod
    maps: ro_sls.ErrorMaps
    gains: np.ndarray
    objective: float
    certificate: Optional[RegretCertificate] = None
    settings: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            "method": self.method.value,
            "n": self.maps.n,
            "m": self.maps.m,
            "T": self.maps.T,
            "causal": self.maps.causal,
            "objective": self.objective,
            "Phi_v": np.asarray(self.maps.Phi_v).tolist(),
            "Phi_w": np.asarray(self.maps.Phi_w).tolist(),
            "L": np.asarray(self.gains).tolist(),
            "settings": dict(self.settings),
        }
        if self.certificate is not None:
            out["lambda_star"] = self.certificate.lambda_star
        return out

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "SynthesisResult":
        try:
            method = SynthesisMethod(d["method"])
            maps = ro_sls.ErrorMaps(
                Phi_v=np.array(d["Phi_v"], dtype=np.float64),
                Phi_w=np.array(d["Phi_w"], dtype=np.float64),
                n=int(d["n"]),
                m=int(d["m"]),
                causal=bool(d["causal"]),
            )
            return cls(
                method=method,
                maps=maps,
                gains=np.array(d["L"], dtype=np.float64),
                objective=float(d["objective"]),
                settings=dict(d.get("settings", {})),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ro_errors.BadConfig("maps file is malformed: %s" % e)


def synthesize(method: Union[SynthesisMethod, str], prob: SynthesisProblem,
               opts: Optional[ro_sdp.SolverOptions] = None, nc: Optional[ro_sls.ErrorMaps] = None) -> SynthesisResult:
    method = SynthesisMethod(method)
    cert = None
    if method == SynthesisMethod.H2:
        maps = synth_h2(prob)
        objective = h2_cost(maps, prob)
    elif method == SynthesisMethod.HINF:
        maps, sol = solve_hinf(prob, opts)
        objective = float(sol.objective)
    elif method == SynthesisMethod.CLAIRVOYANT:
        maps = synth_clairvoyant(prob)
        objective = h2_cost(maps, prob)
    else:
        if nc is None:
            nc = synth_clairvoyant(prob, NoiseWeighting.ELLIPSOID)
        maps, cert = synth_regret(prob, nc, opts)
        objective = cert.lambda_star
    if maps.causal:
        gains = np.array(ro_sls.recover_gains(maps).L)
    else:
        gains = ro_sls.clairvoyant_gains(maps)
    return SynthesisResult(method=method, maps=maps, gains=gains, objective=objective, certificate=cert)
