import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from regretobserver.tools import ro_errors

logger = logging.getLogger("ro_linalg")

SYM_TOL = 1e-12
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
QR_RANK_TOL = 1e-12
PADE_ORDER = 6
EXPM_SCALE_TARGET = 0.5


@dataclass(frozen=True)
class SymEig:
    eigenvalues: np.ndarray   # ascending
    eigenvectors: np.ndarray  # orthonormal columns, paired with eigenvalues

    @property
    def max(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def min(self) -> float:
        return float(self.eigenvalues[0])

    def top_vector(self) -> np.ndarray:
        return self.eigenvectors[:, -1].copy()


def readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    m = np.array(a, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
        raise ro_errors.DimensionMismatch("%s must be a non-empty 2-D matrix, got shape %s" % (name, m.shape))
    if not np.all(np.isfinite(m)):
        raise ro_errors.NonFiniteEntries("%s contains NaN or Inf" % name)
    return m


def as_vector(a, size: Optional[int] = None, name: str = "vector") -> np.ndarray:
    v = np.array(a, dtype=np.float64).reshape(-1)
    if size is not None and v.shape[0] != size:
        raise ro_errors.DimensionMismatch("%s must have length %d, got %d" % (name, size, v.shape[0]))
    if not np.all(np.isfinite(v)):
        raise ro_errors.NonFiniteEntries("%s contains NaN or Inf" % name)
    return v


def require_square(S: np.ndarray, name: str) -> None:
    if S.shape[0] != S.shape[1]:
        raise ro_errors.DimensionMismatch("%s must be square, got %dx%d" % (name, S.shape[0], S.shape[1]))


def is_symmetric(S: np.ndarray, tol: float = SYM_TOL) -> bool:
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        return False
    scale = np.linalg.norm(S)
    return bool(np.linalg.norm(S - S.T) <= tol * max(scale, 1e-300))


def require_symmetric(S: np.ndarray, name: str) -> None:
    require_square(S, name)
    if not is_symmetric(S):
        raise ro_errors.NotSymmetric("%s is not symmetric within %.0e relative" % (name, SYM_TOL))


def block_diag(blocks: Sequence[np.ndarray]) -> np.ndarray:
    blocks = [np.atleast_2d(np.asarray(b, dtype=np.float64)) for b in blocks]
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols))
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def cholesky(S) -> np.ndarray:
    """
    Lower-triangular L with L Lᵀ = S, column by column.

    Raises NotPositiveDefinite as soon as a pivot drops to d·eps·max|S_ii| or
    below, which is how callers test strict feasibility of an LMI.
    """
    S = as_matrix(S, "S")
    require_symmetric(S, "cholesky input")
    d = S.shape[0]
    L = np.zeros_like(S)
    scale = max(float(np.max(np.abs(np.diag(S)))), 1e-300)
    tol = d * np.finfo(np.float64).eps * scale
    for j in range(d):
        row = L[j, :j]
        pivot = S[j, j] - row @ row
        if not pivot > tol:
            raise ro_errors.NotPositiveDefinite("pivot %d is %.3e (tolerance %.3e)" % (j, pivot, tol))
        L[j, j] = math.sqrt(pivot)
        if j + 1 < d:
            L[j + 1:, j] = (S[j + 1:, j] - L[j + 1:, :j] @ row) / L[j, j]
    return L


def solve_triangular(T: np.ndarray, B, lower: bool = True, trans: bool = False, unit_diagonal: bool = False) -> np.ndarray:
    """Solve op(T) X = B by substitution, op(T) = Tᵀ when trans."""
    T = np.asarray(T, dtype=np.float64)
    B = np.asarray(B, dtype=np.float64)
    vec = B.ndim == 1
    X = np.array(B.reshape(-1, 1) if vec else B, dtype=np.float64)
    M = T.T if trans else T
    d = M.shape[0]
    if M.shape[1] != d or X.shape[0] != d:
        raise ro_errors.DimensionMismatch("triangular system %s with right-hand side %s" % (M.shape, B.shape))
    low = lower != trans
    order = range(d) if low else range(d - 1, -1, -1)
    for i in order:
        if low:
            acc = X[i] - M[i, :i] @ X[:i]
        else:
            acc = X[i] - M[i, i + 1:] @ X[i + 1:]
        if unit_diagonal:
            X[i] = acc
        else:
            if M[i, i] == 0.0:
                raise ro_errors.SingularBlock("zero on the diagonal of a triangular factor at %d" % i)
            X[i] = acc / M[i, i]
    return X.reshape(-1) if vec else X


def cho_solve(L: np.ndarray, B) -> np.ndarray:
    Y = solve_triangular(L, B, lower=True)
    return solve_triangular(L, Y, lower=True, trans=True)


def spd_inverse(S) -> np.ndarray:
    L = cholesky(S)
    Linv = solve_triangular(L, np.eye(L.shape[0]), lower=True)
    out = Linv.T @ Linv
    return 0.5 * (out + out.T)


def logdet_from_cholesky(L: np.ndarray) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def _householder_qr(A: np.ndarray, B: np.ndarray):
    R = A.copy()
    QtB = B.copy()
    cols = A.shape[1]
    for j in range(cols):
        x = R[j:, j]
        normx = float(np.linalg.norm(x))
        if normx == 0.0:
            continue
        v = x.copy()
        v[0] += math.copysign(normx, x[0])
        v /= np.linalg.norm(v)
        R[j:, j:] -= 2.0 * np.outer(v, v @ R[j:, j:])
        QtB[j:] -= 2.0 * np.outer(v, v @ QtB[j:])
    return np.triu(R[:cols, :cols]), QtB[:cols]


def solve_least_squares(A, B) -> np.ndarray:
    """
    X minimizing ‖AX − B‖_F through Householder QR of A.

    A must have full column rank: a diagonal entry of R below 1e-12 × max|R_ii|
    raises RankDeficient. B may be a vector, the result then is a vector too.
    """
    A = as_matrix(A, "A")
    B_arr = np.asarray(B, dtype=np.float64)
    vec = B_arr.ndim == 1
    B = as_matrix(B_arr.reshape(-1, 1) if vec else B_arr, "B")
    rows, cols = A.shape
    if rows != B.shape[0]:
        raise ro_errors.DimensionMismatch("A has %d rows but B has %d" % (rows, B.shape[0]))
    if rows < cols:
        raise ro_errors.RankDeficient("%dx%d system cannot have full column rank" % (rows, cols))
    R, QtB = _householder_qr(A, B)
    diag = np.abs(np.diag(R))
    top = float(diag.max())
    if top == 0.0 or float(diag.min()) < QR_RANK_TOL * top:
        raise ro_errors.RankDeficient("R diagonal spans [%.3e, %.3e]" % (float(diag.min()), top))
    X = solve_triangular(R, QtB, lower=False)
    return X.reshape(-1) if vec else X


def solve(A, B) -> np.ndarray:
    """Square nonsingular solve, QR based."""
    A = as_matrix(A, "A")
    require_square(A, "A")
    return solve_least_squares(A, B)


def _off_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a - np.diag(np.diag(a))))


def sym_eig(S, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> SymEig:
    """
    Cyclic-by-row Jacobi eigensolver.

    Converged when the off-diagonal Frobenius norm is at most tol·‖S‖_F;
    more than max_sweeps sweeps raise NoConvergence.
    """
    S = as_matrix(S, "S")
    require_symmetric(S, "sym_eig input")
    a = 0.5 * (S + S.T)
    d = a.shape[0]
    V = np.eye(d)
    fro = float(np.linalg.norm(a))
    if d == 1 or fro == 0.0:
        return SymEig(readonly(np.diag(a)), readonly(V))
    target = tol * fro
    skip = target / (2.0 * d)
    sweeps = 0
    while True:
        off = _off_norm(a)
        if off <= target:
            break
        if sweeps == max_sweeps:
            raise ro_errors.NoConvergence("Jacobi stalled after %d sweeps, off-diagonal norm %.3e" % (sweeps, off))
        sweeps += 1
        for p in range(d - 1):
            for q in range(p + 1, d):
                apq = a[p, q]
                if abs(apq) <= skip:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = 0.0
                a[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    lam = np.diag(a).copy()
    order = np.argsort(lam, kind="stable")
    logger.debug("jacobi dim=%d converged in %d sweeps", d, sweeps)
    return SymEig(readonly(lam[order]), readonly(V[:, order]))


def psd_sqrt(S, name: str = "S") -> np.ndarray:
    """V diag(√λ) Vᵀ; S must be positive semidefinite up to rounding."""
    eig = sym_eig(S)
    lam = np.array(eig.eigenvalues)
    top = max(abs(float(lam[-1])), 1e-300)
    if float(lam[0]) < -1e-10 * top:
        raise ro_errors.NotPositiveDefinite("%s has eigenvalue %.3e" % (name, float(lam[0])))
    V = np.array(eig.eigenvectors)
    root = (V * np.sqrt(np.clip(lam, 0.0, None))) @ V.T
    return 0.5 * (root + root.T)


def _pade_coefficients(q: int) -> np.ndarray:
    f = math.factorial
    return np.array([f(2 * q - k) * f(q) / (f(2 * q) * f(k) * f(q - k)) for k in range(q + 1)])


def expm(M) -> np.ndarray:
    """Scaling and squaring with a diagonal Padé approximant of order 6."""
    M = as_matrix(M, "M")
    require_square(M, "expm input")
    d = M.shape[0]
    norm1 = float(np.max(np.sum(np.abs(M), axis=0)))
    s = 0
    if norm1 > EXPM_SCALE_TARGET:
        s = int(math.ceil(math.log2(norm1 / EXPM_SCALE_TARGET)))
    X = M / (2.0 ** s)
    coeffs = _pade_coefficients(PADE_ORDER)
    eye = np.eye(d)
    num = coeffs[0] * eye
    den = coeffs[0] * eye
    power = eye
    for k in range(1, PADE_ORDER + 1):
        power = power @ X
        num = num + coeffs[k] * power
        den = den + ((-1.0) ** k) * coeffs[k] * power
    F = solve(den, num)
    for _ in range(s):
        F = F @ F
    return F


def spectral_norm(G) -> float:
    """Largest singular value, from the smaller Gram matrix of G."""
    G = as_matrix(G, "G")
    gram = G.T @ G if G.shape[1] <= G.shape[0] else G @ G.T
    gram = 0.5 * (gram + gram.T)
    return math.sqrt(max(sym_eig(gram).max, 0.0))
