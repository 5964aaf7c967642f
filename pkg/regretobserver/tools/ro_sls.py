import logging
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from regretobserver.tools import ro_errors
from regretobserver.tools import ro_linalg
from regretobserver.tools import ro_model

logger = logging.getLogger("ro_sls")

CAUSAL_TOL = 1e-10
ACHIEVABILITY_TOL = 1e-8
TRUNCATE_TOL = 1e-8
VIOLATION_TOL = 1e-6


def upper_block_mask(row_block: int, col_block: int, blocks: int) -> np.ndarray:
    """True on the strictly upper blocks of a blocks×blocks grid of row_block×col_block tiles."""
    upper = np.triu(np.ones((blocks, blocks), dtype=bool), k=1)
    return np.kron(upper, np.ones((row_block, col_block), dtype=bool))


def upper_block_max(M: np.ndarray, row_block: int, col_block: int) -> float:
    blocks = M.shape[0] // row_block
    mask = upper_block_mask(row_block, col_block, blocks)
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(M[mask])))


@dataclass(frozen=True)
class ErrorMaps:
    """Prediction-error maps: e = Φ_w·w̃ + Φ_v·v."""
    Phi_v: np.ndarray
    Phi_w: np.ndarray
    n: int
    m: int
    causal: bool = True

    def __post_init__(self):
        object.__setattr__(self, "Phi_v", ro_linalg.readonly(ro_linalg.as_matrix(self.Phi_v, "Phi_v")))
        object.__setattr__(self, "Phi_w", ro_linalg.readonly(ro_linalg.as_matrix(self.Phi_w, "Phi_w")))
        ne = self.Phi_w.shape[0]
        if ne % self.n or self.Phi_w.shape != (ne, ne):
            raise ro_errors.DimensionMismatch("Phi_w is %s, not a square stack of %d-blocks" % (self.Phi_w.shape, self.n))
        blocks = ne // self.n
        if self.Phi_v.shape != (ne, self.m * blocks):
            raise ro_errors.DimensionMismatch("Phi_v is %s, expected %s" % (self.Phi_v.shape, (ne, self.m * blocks)))
        if self.causal:
            worst = max(upper_block_max(self.Phi_v, self.n, self.m), upper_block_max(self.Phi_w, self.n, self.n))
            if worst > CAUSAL_TOL:
                raise ro_errors.CausalityViolation("maps flagged causal have an upper block entry of %.3e" % worst)

    @property
    def T(self) -> int:
        return self.Phi_w.shape[0] // self.n - 1

    def check(self, ops: ro_model.StackedOperators, tol: float = ACHIEVABILITY_TOL) -> float:
        residual = achievability_residual(self, ops)
        if residual > tol:
            raise ro_errors.AchievabilityViolation("achievability residual %.3e exceeds %.0e" % (residual, tol))
        return residual


@dataclass(frozen=True)
class ObserverGains:
    """Lower block-triangular ℒ; block row t, block column τ holds L_{τ|t}."""
    L: np.ndarray
    n: int
    m: int

    def __post_init__(self):
        L = ro_linalg.as_matrix(self.L, "L")
        if L.shape[0] % self.n or L.shape[1] % self.m or L.shape[0] // self.n != L.shape[1] // self.m:
            raise ro_errors.DimensionMismatch("L is %s, not a square grid of %dx%d blocks" % (L.shape, self.n, self.m))
        if upper_block_max(L, self.n, self.m) != 0.0:
            raise ro_errors.NotCausal("L has nonzero blocks above the block diagonal")
        object.__setattr__(self, "L", ro_linalg.readonly(L))

    @property
    def T(self) -> int:
        return self.L.shape[0] // self.n - 1

    def block(self, tau: int, t: int) -> np.ndarray:
        if not 0 <= tau <= t <= self.T:
            raise ro_errors.DimensionMismatch("need 0 <= tau <= t <= %d, got tau=%d t=%d" % (self.T, tau, t))
        n, m = self.n, self.m
        return self.L[t * n:(t + 1) * n, tau * m:(tau + 1) * m]

    @property
    def L_blocks(self) -> Dict[Tuple[int, int], np.ndarray]:
        return {(tau, t): self.block(tau, t) for t in range(self.T + 1) for tau in range(t + 1)}

    @classmethod
    def from_blocks(cls, blocks: Dict[Tuple[int, int], np.ndarray], n: int, m: int, T: int) -> "ObserverGains":
        L = np.zeros((n * (T + 1), m * (T + 1)))
        for (tau, t), Lb in blocks.items():
            if tau > t:
                raise ro_errors.NotCausal("gain L_{%d|%d} looks into the future" % (tau, t))
            L[t * n:(t + 1) * n, tau * m:(tau + 1) * m] = Lb
        return cls(L, n, m)

    def is_block_diagonal(self, rel_tol: float = 1e-6) -> bool:
        diag = max(float(np.linalg.norm(self.block(t, t))) for t in range(self.T + 1))
        off = max([float(np.linalg.norm(b)) for (tau, t), b in self.L_blocks.items() if tau < t] or [0.0])
        return off <= rel_tol * max(diag, 1e-300)


def _require_stacked(Phi_v: np.ndarray, ops: ro_model.StackedOperators) -> None:
    if Phi_v.shape != (ops.ne, ops.nv):
        raise ro_errors.DimensionMismatch("Phi_v is %s, expected %s" % (Phi_v.shape, (ops.ne, ops.nv)))


def phi_w_from_phi_v(Phi_v, ops: ro_model.StackedOperators) -> np.ndarray:
    """The unique Φ_w with Φ_w(I − Z·Astack) + Φ_v·Cstack·Z = I."""
    Phi_v = ro_linalg.as_matrix(Phi_v, "Phi_v")
    _require_stacked(Phi_v, ops)
    return (np.eye(ops.ne) - Phi_v @ ops.CZ) @ ops.K


def achievability_residual(maps: ErrorMaps, ops: ro_model.StackedOperators) -> float:
    _require_stacked(maps.Phi_v, ops)
    if maps.Phi_w.shape != (ops.ne, ops.ne):
        raise ro_errors.DimensionMismatch("Phi_w is %s, expected %s" % (maps.Phi_w.shape, (ops.ne, ops.ne)))
    I = np.eye(ops.ne)
    return float(np.linalg.norm(maps.Phi_w @ (I - ops.ZA) + maps.Phi_v @ ops.CZ - I))


def maps_from_phi_v(Phi_v, ops: ro_model.StackedOperators, causal: bool = True) -> ErrorMaps:
    return ErrorMaps(Phi_v=Phi_v, Phi_w=phi_w_from_phi_v(Phi_v, ops), n=ops.n, m=ops.m, causal=causal)


def recover_gains(maps: ErrorMaps) -> ObserverGains:
    """
    ℒ = Φ_w⁻¹Φ_v by forward block substitution.

    Entries above the block diagonal up to 1e-6 are rounding and get zeroed;
    anything larger means the maps were not produced by a causal observer.
    """
    if not maps.causal:
        raise ro_errors.NotCausal("maps are flagged non-causal, use clairvoyant_gains")
    n, m, blocks = maps.n, maps.m, maps.T + 1
    L = np.zeros(maps.Phi_v.shape)
    for k in range(blocks):
        rows = slice(k * n, (k + 1) * n)
        rhs = maps.Phi_v[rows, :] - maps.Phi_w[rows, :k * n] @ L[:k * n, :]
        L[rows, :] = ro_linalg.solve(maps.Phi_w[rows, rows], rhs)
    mask = upper_block_mask(n, m, blocks)
    leak = float(np.max(np.abs(L[mask]))) if mask.any() else 0.0
    if leak > VIOLATION_TOL:
        raise ro_errors.CausalityViolation("recovered gains reach %.3e above the block diagonal" % leak)
    if leak > TRUNCATE_TOL:
        logger.warning("truncating upper-block gain residue of %.3e", leak)
    L[mask] = 0.0
    return ObserverGains(L, n, m)


def clairvoyant_gains(maps: ErrorMaps) -> np.ndarray:
    """Dense ℒ_nc = Φ_w⁻¹Φ_v for maps that may look ahead."""
    return ro_linalg.solve(maps.Phi_w, maps.Phi_v)


def maps_from_gains(gains: ObserverGains, ops: ro_model.StackedOperators) -> ErrorMaps:
    """Φ_w = (I − Z·Astack + ℒ·Cstack·Z)⁻¹, Φ_v = Φ_w ℒ."""
    if gains.L.shape != (ops.ne, ops.nv):
        raise ro_errors.DimensionMismatch("L is %s, expected %s" % (gains.L.shape, (ops.ne, ops.nv)))
    I = np.eye(ops.ne)
    M = I - ops.ZA + gains.L @ ops.CZ
    Phi_w = ro_linalg.solve_triangular(M, I, lower=True)
    return ErrorMaps(Phi_v=Phi_w @ gains.L, Phi_w=Phi_w, n=ops.n, m=ops.m, causal=True)


def error_trajectory(maps: ErrorMaps, v_stack, w_stack) -> np.ndarray:
    """e = Φ_w·w̃ + Φ_v·v; columns of 2-D inputs are independent realizations."""
    v = np.asarray(v_stack, dtype=np.float64)
    w = np.asarray(w_stack, dtype=np.float64)
    if v.shape[0] != maps.Phi_v.shape[1] or w.shape[0] != maps.Phi_w.shape[1] or v.ndim != w.ndim:
        raise ro_errors.DimensionMismatch("noise stacks %s and %s do not fit maps %s and %s" % (
            v.shape, w.shape, maps.Phi_v.shape, maps.Phi_w.shape))
    if v.ndim == 2 and v.shape[1] != w.shape[1]:
        raise ro_errors.DimensionMismatch("%d v realizations but %d w realizations" % (v.shape[1], w.shape[1]))
    return maps.Phi_w @ w + maps.Phi_v @ v


def _as_sequence(seq, length: int, dim: int, name: str) -> np.ndarray:
    arr = np.asarray(seq, dtype=np.float64)
    if arr.shape != (length, dim):
        raise ro_errors.DimensionMismatch("%s has shape %s, expected %s" % (name, arr.shape, (length, dim)))
    return arr


def stack_noise(sys: ro_model.LtvSystem, v_seq, w_seq, x0=None, xhat0=None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Physical noise sequences to the stacked convention.

    v-block k is v_{k−1}; w̃-block 1 is A_0(x̂_0 − x_0) − w_0 and w̃-block k is
    −w_{k−1}. The initial mismatch enters through A_0 only: the stacked model
    holds e_0 = 0, so C_0(x̂_0 − x_0) never reaches the innovations.
    """
    T, n, m = sys.T, sys.n, sys.m
    v = _as_sequence(v_seq, T + 1, m, "v_seq")
    w = _as_sequence(w_seq, T + 1, n, "w_seq")
    w_tilde = -w.copy()
    if x0 is not None or xhat0 is not None:
        delta = ro_linalg.as_vector(xhat0 if xhat0 is not None else np.zeros(n), n, "xhat0") \
            - ro_linalg.as_vector(x0 if x0 is not None else np.zeros(n), n, "x0")
        w_tilde[0] += sys.A_seq[0] @ delta
    return v.reshape(-1), w_tilde.reshape(-1)


def simulate_observer(sys: ro_model.LtvSystem, gains: ObserverGains, x0, xhat0, u_seq, v_seq, w_seq) -> Tuple[np.ndarray, np.ndarray]:
    """
    Runs the plant and the Luenberger-type observer side by side.

    Returns (xhat, e), each (T+1)×n: rows hold x̂_1..x̂_{T+1} and e_t = x̂_t − x_t.
    """
    T, n, m, p = sys.T, sys.n, sys.m, sys.p
    if gains.T != T or gains.n != n or gains.m != m:
        raise ro_errors.DimensionMismatch("gains for (n=%d, m=%d, T=%d) do not fit the system (n=%d, m=%d, T=%d)" % (
            gains.n, gains.m, gains.T, n, m, T))
    x = ro_linalg.as_vector(x0, n, "x0")
    xh = ro_linalg.as_vector(xhat0, n, "xhat0")
    u = _as_sequence(u_seq, T + 1, p, "u_seq")
    v = _as_sequence(v_seq, T + 1, m, "v_seq")
    w = _as_sequence(w_seq, T + 1, n, "w_seq")
    innovations = np.zeros(m * (T + 1))
    xhat_traj = np.zeros((T + 1, n))
    e_traj = np.zeros((T + 1, n))
    for t in range(T + 1):
        A, B, C = sys.A_seq[t], sys.B_seq[t], sys.C_seq[t]
        y = C @ x + v[t]
        innovations[t * m:(t + 1) * m] = C @ xh - y
        correction = gains.L[t * n:(t + 1) * n, :(t + 1) * m] @ innovations[:(t + 1) * m]
        x = A @ x + B @ u[t] + w[t]
        xh = A @ xh + B @ u[t] - correction
        xhat_traj[t] = xh
        e_traj[t] = xh - x
    return xhat_traj, e_traj


def kalman_gains(sys: ro_model.LtvSystem, noise: ro_model.NoiseModel) -> ObserverGains:
    """
    Time-varying Kalman one-step predictor as a block-diagonal ℒ.

    L_{0|0} = 0 because the stacked model gives y_0 no information on e_0 = 0;
    P_1 = Σ_{w,0}, then the usual predictor Riccati recursion.
    """
    T, n, m = sys.T, sys.n, sys.m
    if noise.T != T:
        raise ro_errors.DimensionMismatch("noise model horizon %d differs from system horizon %d" % (noise.T, T))
    blocks = {(0, 0): np.zeros((n, m))}
    P = np.array(noise.Sigma_w_blocks[0])
    for k in range(1, T + 1):
        A, C = sys.A_seq[k], sys.C_seq[k]
        S = C @ P @ C.T + noise.Sigma_v_blocks[k]
        S = 0.5 * (S + S.T)
        Lk = ro_linalg.cho_solve(ro_linalg.cholesky(S), C @ P @ A.T).T
        F = A - Lk @ C
        P = F @ P @ F.T + Lk @ noise.Sigma_v_blocks[k] @ Lk.T + noise.Sigma_w_blocks[k]
        P = 0.5 * (P + P.T)
        blocks[(k, k)] = Lk
    return ObserverGains.from_blocks(blocks, n, m, T)


def luenberger_gains(L, T: int) -> ObserverGains:
    """Classic Luenberger observer: the same gain on every diagonal block."""
    L = ro_linalg.as_matrix(L, "L")
    n, m = L.shape
    return ObserverGains.from_blocks({(t, t): L for t in range(T + 1)}, n, m, T)
