import csv
import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from regretobserver.tools import ro_errors
from regretobserver.tools import ro_linalg

logger = logging.getLogger("ro_sdp")


class SdpStatus(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITERATIONS = "MaxIterations"


@dataclass(frozen=True)
class SolverOptions:
    mu0: float = 1.0
    mu_factor: float = 10.0
    alpha: float = 0.3
    beta: float = 0.5
    max_newton: int = 500
    gap_tol: float = 1e-8
    infeasible_tol: float = 1e-8
    centering_tol: float = 1e-7     # half the squared Newton decrement
    min_step: float = 1e-14
    trace_path: Optional[str] = None


@dataclass(frozen=True)
class LmiProblem:
    """
    minimize cᵀx  s.t.  F(x) = F0 + Σ x_i F_i ⪰ 0.

    The first U.shape[1] variables have rank-two coefficients
    F_i = u_i w_iᵀ + w_i u_iᵀ (columns of U and W); the remaining ones carry
    the dense symmetric matrices in F, in order.
    """
    cost: np.ndarray
    F0: np.ndarray
    F: Tuple[np.ndarray, ...] = ()
    U: Optional[np.ndarray] = None
    W: Optional[np.ndarray] = None

    def __post_init__(self):
        F0 = ro_linalg.as_matrix(self.F0, "F0")
        ro_linalg.require_symmetric(F0, "F0")
        d = F0.shape[0]
        dense = []
        for i, Fi in enumerate(self.F):
            Fi = ro_linalg.as_matrix(Fi, "F[%d]" % i)
            if Fi.shape != (d, d):
                raise ro_errors.DimensionMismatch("F[%d] is %s, expected %s" % (i, Fi.shape, (d, d)))
            ro_linalg.require_symmetric(Fi, "F[%d]" % i)
            dense.append(ro_linalg.readonly(Fi))
        U, W = self.U, self.W
        if (U is None) != (W is None):
            raise ro_errors.DimensionMismatch("U and W must be given together")
        if U is None:
            U = np.zeros((d, 0))
            W = np.zeros((d, 0))
        U = np.asarray(U, dtype=np.float64)
        W = np.asarray(W, dtype=np.float64)
        if U.ndim != 2 or U.shape != W.shape or U.shape[0] != d:
            raise ro_errors.DimensionMismatch("rank-two factors %s and %s do not fit dimension %d" % (U.shape, W.shape, d))
        if not (np.all(np.isfinite(U)) and np.all(np.isfinite(W))):
            raise ro_errors.NonFiniteEntries("rank-two factors contain NaN or Inf")
        k = U.shape[1] + len(dense)
        cost = ro_linalg.as_vector(self.cost, k, "cost")
        object.__setattr__(self, "F0", ro_linalg.readonly(F0))
        object.__setattr__(self, "F", tuple(dense))
        object.__setattr__(self, "U", ro_linalg.readonly(U))
        object.__setattr__(self, "W", ro_linalg.readonly(W))
        object.__setattr__(self, "cost", ro_linalg.readonly(cost))

    @property
    def num_vars(self) -> int:
        return self.U.shape[1] + len(self.F)

    @property
    def num_rank_two(self) -> int:
        return self.U.shape[1]

    @property
    def dim(self) -> int:
        return self.F0.shape[0]

    def coefficient(self, i: int) -> np.ndarray:
        kr = self.num_rank_two
        if i < kr:
            M = np.outer(self.U[:, i], self.W[:, i])
            return M + M.T
        return np.array(self.F[i - kr])

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        kr = self.num_rank_two
        out = np.array(self.F0)
        if kr:
            M = (self.U * x[:kr]) @ self.W.T
            out += M + M.T
        for j, Fj in enumerate(self.F):
            out += x[kr + j] * Fj
        return out

    def barrier_derivatives(self, S: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """g_i = tr(S F_i) and H_ij = tr(S F_i S F_j) for S = F(x)⁻¹."""
        kr = self.num_rank_two
        k = self.num_vars
        g = np.zeros(k)
        H = np.zeros((k, k))
        if kr:
            SU = S @ self.U
            SW = S @ self.W
            g[:kr] = 2.0 * np.sum(self.U * SW, axis=0)
            USU = self.U.T @ SU
            WSW = self.W.T @ SW
            USW = self.U.T @ SW
            H[:kr, :kr] = 2.0 * (USU * WSW + USW * USW.T)
        for j, Fj in enumerate(self.F):
            Mj = S @ Fj @ S
            g[kr + j] = float(np.sum(S * Fj))
            if kr:
                col = 2.0 * np.sum(self.U * (Mj @ self.W), axis=0)
                H[:kr, kr + j] = col
                H[kr + j, :kr] = col
            for i in range(j + 1):
                H[kr + i, kr + j] = H[kr + j, kr + i] = float(np.sum(Mj * self.F[i]))
        return g, 0.5 * (H + H.T)

    def with_extra_dense(self, extra: Sequence[np.ndarray], cost: np.ndarray) -> "LmiProblem":
        return LmiProblem(cost=cost, F0=self.F0, F=tuple(self.F) + tuple(extra), U=self.U, W=self.W)


@dataclass(frozen=True)
class SdpSolution:
    x: np.ndarray
    objective: float
    status: SdpStatus
    min_eig: float
    iterations: int
    gap: float = math.inf
    history: Tuple[Tuple[int, float, float], ...] = field(default=(), repr=False)

    def raise_for_status(self) -> "SdpSolution":
        if self.status == SdpStatus.INFEASIBLE:
            raise ro_errors.SdpInfeasible("LMI has no strictly feasible point")
        if self.status == SdpStatus.MAX_ITERATIONS:
            raise ro_errors.SdpMaxIterations("barrier method stopped after %d Newton steps (gap %.3e)" % (self.iterations, self.gap))
        return self


def gershgorin_upper(S: np.ndarray) -> float:
    d = np.diag(S)
    return float(np.max(d + np.sum(np.abs(S), axis=1) - np.abs(d)))


def gershgorin_lower(S: np.ndarray) -> float:
    d = np.diag(S)
    return float(np.min(d - (np.sum(np.abs(S), axis=1) - np.abs(d))))


def _try_cholesky(F: np.ndarray) -> Optional[np.ndarray]:
    try:
        return ro_linalg.cholesky(F)
    except ro_errors.NotPositiveDefinite:
        return None


def _newton_direction(H: np.ndarray, grad: np.ndarray) -> np.ndarray:
    # diagonal scaling before the factorization
    scale = 1.0 / np.sqrt(np.maximum(np.diag(H), 1e-300))
    Hs = H * scale[:, None] * scale[None, :]
    gs = grad * scale
    reg = 0.0
    for attempt in range(8):
        try:
            L = ro_linalg.cholesky(Hs + reg * np.eye(Hs.shape[0]) if reg else Hs)
            if reg:
                logger.warning("Newton system regularized with %.1e", reg)
            return -scale * ro_linalg.cho_solve(L, gs)
        except ro_errors.NotPositiveDefinite:
            reg = 1e-12 if reg == 0.0 else reg * 100.0
    raise ro_errors.NotPositiveDefinite("barrier Hessian is singular even after regularization")


class _Budget:
    def __init__(self, limit: int):
        self.limit = limit
        self.used = 0

    @property
    def exhausted(self) -> bool:
        return self.used >= self.limit


class _Tracer:
    def __init__(self, path: Optional[str]):
        self.path = path
        self.fh = None
        self.writer = None
        if path:
            self.fh = open(path, "w", newline="", encoding="utf-8")
            self.writer = csv.writer(self.fh)
            self.writer.writerow(["iteration", "mu", "objective", "lambda_min"])

    def row(self, iteration: int, mu: float, objective: float, F: np.ndarray) -> None:
        if self.writer is None:
            return
        self.writer.writerow([iteration, repr(mu), repr(objective), repr(ro_linalg.sym_eig(F).min)])

    def close(self) -> None:
        if self.fh is not None:
            self.fh.close()


def _center(prob: LmiProblem, x: np.ndarray, mu: float, opts: SolverOptions, budget: _Budget, tracer: _Tracer,
            stop: Optional[Callable[[np.ndarray], bool]] = None) -> Tuple[np.ndarray, bool]:
    """Damped Newton on cᵀx/μ − log det F(x), starting from a strictly feasible x."""
    c = prob.cost
    while True:
        if stop is not None and stop(x):
            return x, True
        if budget.exhausted:
            return x, False
        F = prob.evaluate(x)
        L = _try_cholesky(F)
        if L is None:
            raise ro_errors.NotPositiveDefinite("iterate left the interior of the LMI")
        Linv = ro_linalg.solve_triangular(L, np.eye(L.shape[0]), lower=True)
        S = Linv.T @ Linv
        g_bar, H = prob.barrier_derivatives(0.5 * (S + S.T))
        grad = c / mu - g_bar
        dx = _newton_direction(H, grad)
        slope = float(grad @ dx)
        if -slope / 2.0 <= opts.centering_tol:
            return x, True
        f0 = float(c @ x) / mu - ro_linalg.logdet_from_cholesky(L)
        t = 1.0
        while True:
            xn = x + t * dx
            Ln = _try_cholesky(prob.evaluate(xn))
            if Ln is not None:
                fn = float(c @ xn) / mu - ro_linalg.logdet_from_cholesky(Ln)
                if fn <= f0 + opts.alpha * t * slope:
                    break
            t *= opts.beta
            if t < opts.min_step:
                logger.warning("line search stalled at mu=%.3e, treating the point as centered", mu)
                return x, True
        x = xn
        budget.used += 1
        tracer.row(budget.used, mu, float(c @ x), prob.evaluate(x))


def _phase_one(prob: LmiProblem, x: np.ndarray, opts: SolverOptions, budget: _Budget, tracer: _Tracer) -> Tuple[Optional[np.ndarray], float]:
    """minimize s s.t. F(x) + sI ⪰ 0; returns a strictly feasible x, or None and s*."""
    d, k = prob.dim, prob.num_vars
    aug = prob.with_extra_dense([np.eye(d)], np.concatenate([np.zeros(k), [1.0]]))
    s0 = max(0.0, -gershgorin_lower(prob.evaluate(x))) + 1.0
    z = np.concatenate([x, [s0]])

    def found(zz: np.ndarray) -> bool:
        return zz[-1] < 0.0 and _try_cholesky(prob.evaluate(zz[:-1])) is not None

    mu = opts.mu0
    while True:
        z, _ = _center(aug, z, mu, opts, budget, tracer, stop=found)
        if found(z):
            logger.debug("phase 1 found a strictly feasible point after %d Newton steps", budget.used)
            return z[:-1], float(z[-1])
        if budget.exhausted:
            return None, float(z[-1])
        if (d * mu) <= opts.gap_tol * (1.0 + abs(z[-1])):
            return None, float(z[-1])
        mu /= opts.mu_factor


def solve_min_cost_lmi(prob: LmiProblem, opts: Optional[SolverOptions] = None, x0=None) -> SdpSolution:
    """
    Log-det barrier path following.

    Phase 1 is skipped when x0 is strictly feasible. Phase 2 centers for
    μ = mu0, mu0/10, ... and stops once dim·μ ≤ gap_tol·(1 + |cᵀx|).
    """
    opts = opts or SolverOptions()
    budget = _Budget(opts.max_newton)
    tracer = _Tracer(opts.trace_path)
    d = prob.dim
    try:
        x = np.zeros(prob.num_vars) if x0 is None else ro_linalg.as_vector(x0, prob.num_vars, "x0")
        if _try_cholesky(prob.evaluate(x)) is None:
            x, s_star = _phase_one(prob, x, opts, budget, tracer)
            if x is None:
                status = SdpStatus.MAX_ITERATIONS if budget.exhausted else SdpStatus.INFEASIBLE
                if status == SdpStatus.INFEASIBLE and s_star <= opts.infeasible_tol:
                    logger.warning("LMI is only marginally feasible (s*=%.3e), no interior to follow", s_star)
                logger.info("phase 1 ended with s*=%.3e, status %s", s_star, status.value)
                return SdpSolution(x=np.zeros(prob.num_vars), objective=math.nan, status=status,
                                   min_eig=-s_star, iterations=budget.used)
        history: List[Tuple[int, float, float]] = []
        mu = opts.mu0
        status = SdpStatus.MAX_ITERATIONS
        while True:
            x, centered = _center(prob, x, mu, opts, budget, tracer)
            objective = float(prob.cost @ x)
            history.append((budget.used, mu, objective))
            if d * mu <= opts.gap_tol * (1.0 + abs(objective)):
                status = SdpStatus.OPTIMAL
                break
            if budget.exhausted:
                break
            mu /= opts.mu_factor
    finally:
        tracer.close()
    min_eig = ro_linalg.sym_eig(prob.evaluate(x)).min
    logger.info("sdp dim=%d vars=%d: %s after %d Newton steps, objective %.10g, min eig %.3e",
                d, prob.num_vars, status.value, budget.used, objective, min_eig)
    return SdpSolution(
        x=ro_linalg.readonly(x),
        objective=objective,
        status=status,
        min_eig=min_eig,
        iterations=budget.used,
        gap=d * mu,
        history=tuple(history),
    )


def min_max_eigenvalue(S_map: LmiProblem, opts: Optional[SolverOptions] = None) -> Tuple[np.ndarray, float, SdpSolution]:
    """
    min over x of λmax(S(x)) for the affine S(x) = F0 + Σ x_i F_i held in S_map
    (its cost is ignored). Solved as min λ s.t. λI − S(x) ⪰ 0.
    """
    d, k = S_map.dim, S_map.num_vars
    prob = LmiProblem(
        cost=np.concatenate([np.zeros(k), [1.0]]),
        F0=-np.asarray(S_map.F0),
        F=tuple(-np.asarray(Fi) for Fi in S_map.F) + (np.eye(d),),
        U=-np.asarray(S_map.U),
        W=S_map.W,
    )
    x0 = np.concatenate([np.zeros(k), [gershgorin_upper(np.asarray(S_map.F0)) + 1.0]])
    sol = solve_min_cost_lmi(prob, opts, x0=x0).raise_for_status()
    return np.array(sol.x[:k]), float(sol.x[k]), sol
