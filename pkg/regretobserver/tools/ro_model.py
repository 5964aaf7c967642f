import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from regretobserver.tools import ro_errors
from regretobserver.tools import ro_linalg

logger = logging.getLogger("ro_model")


def _freeze_seq(seq, name: str) -> Tuple[np.ndarray, ...]:
    return tuple(ro_linalg.readonly(ro_linalg.as_matrix(a, "%s[%d]" % (name, t))) for t, a in enumerate(seq))


@dataclass(frozen=True)
class LtvSystem:
    """
    x_{t+1} = A_t x_t + B_t u_t + w_t,  y_t = C_t x_t + v_t,  t = 0..T.

    n states, p inputs, m outputs; every sequence holds T+1 matrices.
    """
    A_seq: Tuple[np.ndarray, ...]
    B_seq: Tuple[np.ndarray, ...]
    C_seq: Tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "A_seq", _freeze_seq(self.A_seq, "A"))
        object.__setattr__(self, "B_seq", _freeze_seq(self.B_seq, "B"))
        object.__setattr__(self, "C_seq", _freeze_seq(self.C_seq, "C"))
        if not self.A_seq:
            raise ro_errors.DimensionMismatch("empty system")
        if not (len(self.A_seq) == len(self.B_seq) == len(self.C_seq)):
            raise ro_errors.DimensionMismatch("sequence lengths differ: A %d, B %d, C %d" % (
                len(self.A_seq), len(self.B_seq), len(self.C_seq)))
        n, p, m = self.n, self.p, self.m
        for t in range(self.T + 1):
            if self.A_seq[t].shape != (n, n):
                raise ro_errors.DimensionMismatch("A_%d is %s, expected %s" % (t, self.A_seq[t].shape, (n, n)))
            if self.B_seq[t].shape != (n, p):
                raise ro_errors.DimensionMismatch("B_%d is %s, expected %s" % (t, self.B_seq[t].shape, (n, p)))
            if self.C_seq[t].shape != (m, n):
                raise ro_errors.DimensionMismatch("C_%d is %s, expected %s" % (t, self.C_seq[t].shape, (m, n)))

    @property
    def n(self) -> int:
        return self.A_seq[0].shape[0]

    @property
    def p(self) -> int:
        return self.B_seq[0].shape[1]

    @property
    def m(self) -> int:
        return self.C_seq[0].shape[0]

    @property
    def T(self) -> int:
        return len(self.A_seq) - 1

    @classmethod
    def time_invariant(cls, A, B, C, T: int) -> "LtvSystem":
        if T < 1:
            raise ro_errors.DimensionMismatch("horizon must be at least 1, got %d" % T)
        return cls(tuple([A] * (T + 1)), tuple([B] * (T + 1)), tuple([C] * (T + 1)))


@dataclass(frozen=True)
class NoiseModel:
    """Per-step ellipsoid shapes (‖H v‖ ≤ 1) and Gaussian covariances."""
    Hv_blocks: Tuple[np.ndarray, ...]
    Hw_blocks: Tuple[np.ndarray, ...]
    Sigma_v_blocks: Tuple[np.ndarray, ...]
    Sigma_w_blocks: Tuple[np.ndarray, ...]

    def __post_init__(self):
        for name in ("Hv_blocks", "Hw_blocks", "Sigma_v_blocks", "Sigma_w_blocks"):
            object.__setattr__(self, name, _freeze_seq(getattr(self, name), name))
        lengths = {len(self.Hv_blocks), len(self.Hw_blocks), len(self.Sigma_v_blocks), len(self.Sigma_w_blocks)}
        if len(lengths) != 1:
            raise ro_errors.DimensionMismatch("noise block sequences have different lengths")
        for name in ("Hv_blocks", "Hw_blocks"):
            for t, H in enumerate(getattr(self, name)):
                ro_linalg.require_square(H, "%s[%d]" % (name, t))
                try:
                    ro_linalg.cholesky(H.T @ H)
                except ro_errors.NotPositiveDefinite as e:
                    raise ro_errors.SingularBlock("%s[%d] is not invertible: %s" % (name, t, e))
        for name in ("Sigma_v_blocks", "Sigma_w_blocks"):
            for t, S in enumerate(getattr(self, name)):
                try:
                    ro_linalg.cholesky(S)
                except ro_errors.NotPositiveDefinite as e:
                    raise ro_errors.NotPositiveDefinite("%s[%d] is not SPD: %s" % (name, t, e))
        m = self.Hv_blocks[0].shape[0]
        n = self.Hw_blocks[0].shape[0]
        for t in range(len(self.Hv_blocks)):
            if self.Hv_blocks[t].shape != (m, m) or self.Sigma_v_blocks[t].shape != (m, m):
                raise ro_errors.DimensionMismatch("measurement-noise block %d is not %dx%d" % (t, m, m))
            if self.Hw_blocks[t].shape != (n, n) or self.Sigma_w_blocks[t].shape != (n, n):
                raise ro_errors.DimensionMismatch("disturbance block %d is not %dx%d" % (t, n, n))

    @property
    def T(self) -> int:
        return len(self.Hv_blocks) - 1

    @classmethod
    def scaled(cls, n: int, m: int, T: int, hv: float = 1.0, hw: float = 1.0,
               sigma_v: float = 1.0, sigma_w: float = 1.0) -> "NoiseModel":
        """Isotropic model: H = h·I, Σ = σ·I at every step."""
        k = T + 1
        return cls(
            tuple([hv * np.eye(m)] * k),
            tuple([hw * np.eye(n)] * k),
            tuple([sigma_v * np.eye(m)] * k),
            tuple([sigma_w * np.eye(n)] * k),
        )


@dataclass(frozen=True)
class CostWeights:
    """Q_1..Q_{T+1}; the loss of step t is e_tᵀ Q_t e_t."""
    Q_blocks: Tuple[np.ndarray, ...]

    def __post_init__(self):
        object.__setattr__(self, "Q_blocks", _freeze_seq(self.Q_blocks, "Q"))
        for t, Q in enumerate(self.Q_blocks):
            try:
                ro_linalg.cholesky(Q)
            except ro_errors.NotPositiveDefinite as e:
                raise ro_errors.NotPositiveDefinite("Q[%d] is not SPD: %s" % (t, e))

    @classmethod
    def scaled(cls, n: int, T: int, q: float = 1.0) -> "CostWeights":
        return cls(tuple([q * np.eye(n)] * (T + 1)))

    def stacked_half(self) -> np.ndarray:
        """𝒬 = blkdiag(Q_t^{1/2})."""
        return ro_linalg.block_diag([ro_linalg.psd_sqrt(Q, "Q") for Q in self.Q_blocks])


@dataclass(frozen=True)
class StackedOperators:
    n: int
    m: int
    T: int
    Z: np.ndarray
    Astack: np.ndarray
    Cstack: np.ndarray
    ZA: np.ndarray = field(repr=False)
    CZ: np.ndarray = field(repr=False)
    K: np.ndarray = field(repr=False)   # (I − Z·Astack)⁻¹

    @property
    def ne(self) -> int:
        return self.n * (self.T + 1)

    @property
    def nv(self) -> int:
        return self.m * (self.T + 1)


def downshift(n: int, blocks: int) -> np.ndarray:
    Z = np.zeros((n * blocks, n * blocks))
    for k in range(1, blocks):
        Z[k * n:(k + 1) * n, (k - 1) * n:k * n] = np.eye(n)
    return Z


def build_stacked_operators(sys: LtvSystem) -> StackedOperators:
    """
    Stacked space has T+1 blocks: e-block k is e_k, v-block k is v_{k−1}.

    Astack = blkdiag(A_1..A_T, 0) and Cstack = blkdiag(0, C_1..C_T) so that
    Z·Astack puts A_k on e_k → e_{k+1} and Cstack·Z feeds C_k e_k to block k+1.
    """
    if not isinstance(sys, LtvSystem):
        raise ro_errors.DimensionMismatch("expected an LtvSystem, got %r" % type(sys).__name__)
    n, m, T = sys.n, sys.m, sys.T
    blocks = T + 1
    Z = downshift(n, blocks)
    Astack = ro_linalg.block_diag(list(sys.A_seq[1:]) + [np.zeros((n, n))])
    Cstack = ro_linalg.block_diag([np.zeros((m, n))] + list(sys.C_seq[1:]))
    ZA = Z @ Astack
    CZ = Cstack @ Z
    I = np.eye(n * blocks)
    K = ro_linalg.solve_triangular(I - ZA, I, lower=True, unit_diagonal=True)
    return StackedOperators(
        n=n, m=m, T=T,
        Z=ro_linalg.readonly(Z),
        Astack=ro_linalg.readonly(Astack),
        Cstack=ro_linalg.readonly(Cstack),
        ZA=ro_linalg.readonly(ZA),
        CZ=ro_linalg.readonly(CZ),
        K=ro_linalg.readonly(K),
    )


@dataclass(frozen=True)
class StackedNoiseFactors:
    Hv_stack: np.ndarray
    Hw_stack: np.ndarray
    Sv_half: np.ndarray
    Sw_half: np.ndarray
    Hv_inv: np.ndarray
    Hw_inv: np.ndarray


def _block_inverse(H: np.ndarray, name: str) -> np.ndarray:
    try:
        return ro_linalg.solve(H, np.eye(H.shape[0]))
    except (ro_errors.RankDeficient, ro_errors.SingularBlock) as e:
        raise ro_errors.SingularBlock("%s cannot be inverted: %s" % (name, e))


def stacked_noise_factors(noise: NoiseModel) -> StackedNoiseFactors:
    Hv_inv = [_block_inverse(H, "Hv[%d]" % t) for t, H in enumerate(noise.Hv_blocks)]
    Hw_inv = [_block_inverse(H, "Hw[%d]" % t) for t, H in enumerate(noise.Hw_blocks)]
    return StackedNoiseFactors(
        Hv_stack=ro_linalg.readonly(ro_linalg.block_diag(noise.Hv_blocks)),
        Hw_stack=ro_linalg.readonly(ro_linalg.block_diag(noise.Hw_blocks)),
        Sv_half=ro_linalg.readonly(ro_linalg.block_diag([ro_linalg.psd_sqrt(S, "Sigma_v") for S in noise.Sigma_v_blocks])),
        Sw_half=ro_linalg.readonly(ro_linalg.block_diag([ro_linalg.psd_sqrt(S, "Sigma_w") for S in noise.Sigma_w_blocks])),
        Hv_inv=ro_linalg.readonly(ro_linalg.block_diag(Hv_inv)),
        Hw_inv=ro_linalg.readonly(ro_linalg.block_diag(Hw_inv)),
    )


# System files
#
#   # comment lines, "# key: value" lines are kept as metadata
#   n m p T
#   A 0            <- n rows follow; "A *" repeats one block over the horizon
#   ...
#   B *            <- n rows of p reals
#   C *            <- m rows of n reals

_BLOCK_RE = re.compile(r"^([ABC])\s+(\*|\d+)$")
_META_RE = re.compile(r"^#\s*([A-Za-z_][\w-]*)\s*:\s*(.*)$")


@dataclass
class SystemFile:
    n: int
    m: int
    p: int
    T: int
    blocks: Dict[Tuple[str, str], np.ndarray]
    meta: Dict[str, str]

    def block(self, label: str, t: int) -> np.ndarray:
        key = (label, str(t))
        if key in self.blocks:
            return self.blocks[key]
        if (label, "*") in self.blocks:
            return self.blocks[(label, "*")]
        raise ro_errors.MissingBlock("block %s %d is missing" % (label, t))


def _parse_reals(line: str, want: int, where: str) -> List[float]:
    parts = line.split()
    if len(parts) != want:
        raise ro_errors.SystemFileError("%s: expected %d numbers, got %d" % (where, want, len(parts)))
    try:
        return [float(x) for x in parts]
    except ValueError:
        raise ro_errors.SystemFileError("%s: not a number in %r" % (where, line))


def parse_system_file(text: str) -> SystemFile:
    meta: Dict[str, str] = {}
    lines: List[Tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        if not s:
            continue
        if s.startswith("#"):
            mm = _META_RE.match(s)
            if mm:
                meta[mm.group(1).lower()] = mm.group(2).strip()
            continue
        lines.append((lineno, s))
    if not lines:
        raise ro_errors.SystemFileError("system file is empty")
    lineno, header = lines[0]
    try:
        n, m, p, T = [int(x) for x in header.split()]
    except ValueError:
        raise ro_errors.SystemFileError("line %d: header must be 'n m p T', got %r" % (lineno, header))
    if n < 1 or m < 1 or p < 1 or T < 0:
        raise ro_errors.SystemFileError("line %d: dimensions must be positive" % lineno)
    shapes = {"A": (n, n), "B": (n, p), "C": (m, n)}
    blocks: Dict[Tuple[str, str], np.ndarray] = {}
    i = 1
    while i < len(lines):
        lineno, s = lines[i]
        mm = _BLOCK_RE.match(s)
        if not mm:
            raise ro_errors.SystemFileError("line %d: expected a block label like 'A 0' or 'C *', got %r" % (lineno, s))
        label, key = mm.group(1), mm.group(2)
        if key != "*" and int(key) > T:
            raise ro_errors.SystemFileError("line %d: time index %s beyond horizon %d" % (lineno, key, T))
        rows, cols = shapes[label]
        data = []
        for r in range(rows):
            if i + 1 + r >= len(lines):
                raise ro_errors.SystemFileError("line %d: block %s %s is truncated" % (lineno, label, key))
            ln, row = lines[i + 1 + r]
            data.append(_parse_reals(row, cols, "line %d" % ln))
        blocks[(label, key)] = ro_linalg.as_matrix(data, "%s %s" % (label, key))
        i += 1 + rows
    return SystemFile(n=n, m=m, p=p, T=T, blocks=blocks, meta=meta)


def system_from_file(sf: SystemFile, T: Optional[int] = None) -> LtvSystem:
    horizon = sf.T if T is None else T
    if horizon < 1:
        raise ro_errors.SystemFileError("horizon must be at least 1, got %d" % horizon)
    A = [sf.block("A", t) for t in range(horizon + 1)]
    B = [sf.block("B", t) for t in range(horizon + 1)]
    C = [sf.block("C", t) for t in range(horizon + 1)]
    return LtvSystem(tuple(A), tuple(B), tuple(C))


def load_system(path, T: Optional[int] = None) -> LtvSystem:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ro_errors.SystemFileError("cannot read %s: %s" % (path, e))
    return system_from_file(parse_system_file(text), T)


def _format_block(label: str, key: str, M: np.ndarray) -> List[str]:
    out = ["%s %s" % (label, key)]
    for row in M:
        out.append(" ".join(repr(float(x)) for x in row))
    return out


def dump_system_text(sys: LtvSystem, meta: Optional[Dict[str, str]] = None) -> str:
    lines: List[str] = ["# %s: %s" % (k, v) for k, v in (meta or {}).items()]
    lines.append("%d %d %d %d" % (sys.n, sys.m, sys.p, sys.T))
    for label, seq in (("A", sys.A_seq), ("B", sys.B_seq), ("C", sys.C_seq)):
        if all(np.array_equal(seq[0], M) for M in seq):
            lines += _format_block(label, "*", seq[0])
        else:
            for t, M in enumerate(seq):
                lines += _format_block(label, str(t), M)
    return "\n".join(lines) + "\n"
