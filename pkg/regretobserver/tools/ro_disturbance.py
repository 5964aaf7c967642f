import enum
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from regretobserver.tools import ro_errors
from regretobserver.tools import ro_linalg
from regretobserver.tools import ro_sls
from regretobserver.tools import ro_synthesis

logger = logging.getLogger("ro_disturbance")


class PatternKind(str, enum.Enum):
    GAUSSIAN = "gaussian"
    UNIFORM_HALF = "uniform-half"
    UNIFORM_FULL = "uniform-full"
    CONSTANT_ONE = "const"
    SINE = "sin"
    SAWTOOTH = "sawtooth"
    STEP = "step"
    STAIRS = "stairs"
    WORST_CASE = "worst"


# Table row order; the position also enters the random substream seed
ALL_PATTERNS: List[PatternKind] = list(PatternKind)
STOCHASTIC = {PatternKind.GAUSSIAN, PatternKind.UNIFORM_HALF, PatternKind.UNIFORM_FULL}


def parse_pattern(name: str) -> PatternKind:
    try:
        return PatternKind(name.strip().lower())
    except ValueError:
        raise ro_errors.UnknownPattern("unknown pattern %r, expected one of: %s" % (
            name, ", ".join(k.value for k in PatternKind)))


@dataclass(frozen=True)
class PatternSpec:
    kind: PatternKind
    seed: int = 0
    amplitude: float = 1.0
    period: float = 4.0           # sawtooth, in units of the waveform clock
    clock: float = 1.0            # time per sample seen by sin and sawtooth; 1 means the sample index
    onset: Optional[int] = None   # step; None means ⌈(T+1)/2⌉
    stair_width: int = 2
    stair_height: float = 0.25

    def __post_init__(self):
        object.__setattr__(self, "kind", PatternKind(self.kind))
        if not self.amplitude > 0.0:
            raise ro_errors.BadConfig("amplitude must be positive, got %r" % self.amplitude)
        if not self.period > 0.0 or self.stair_width < 1:
            raise ro_errors.BadConfig("period and stair width must be positive")
        if not self.clock > 0.0:
            raise ro_errors.BadConfig("waveform clock must be positive, got %r" % self.clock)
        if not self.stair_height > 0.0:
            raise ro_errors.BadConfig("stair height must be positive, got %r" % self.stair_height)
        if self.onset is not None and self.onset < 0:
            raise ro_errors.BadConfig("step onset must be nonnegative, got %d" % self.onset)
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ro_errors.BadConfig("seed must fit in 64 bits unsigned, got %d" % self.seed)

    @property
    def stochastic(self) -> bool:
        return self.kind in STOCHASTIC


@dataclass(frozen=True)
class NoiseRealization:
    v_stack: np.ndarray
    w_stack: np.ndarray
    pattern: PatternSpec
    realization_index: int = 0


def _signal(spec: PatternSpec, T: int) -> np.ndarray:
    t = np.arange(T + 1, dtype=np.float64)
    clocked = t * spec.clock
    kind = spec.kind
    if kind == PatternKind.CONSTANT_ONE:
        s = np.ones(T + 1)
    elif kind == PatternKind.SINE:
        s = np.sin(clocked)
    elif kind == PatternKind.SAWTOOTH:
        P = float(spec.period)
        s = 2.0 * (clocked / P - np.floor(clocked / P)) - 1.0
    elif kind == PatternKind.STEP:
        onset = int(math.ceil((T + 1) / 2.0)) if spec.onset is None else spec.onset
        s = (t >= onset).astype(np.float64)
    elif kind == PatternKind.STAIRS:
        s = np.floor(t / spec.stair_width) * spec.stair_height
    else:
        raise ro_errors.UnknownPattern("%s is not a deterministic pattern" % kind.value)
    return spec.amplitude * s


def _rng(spec: PatternSpec, realization_index: int) -> np.random.Generator:
    pattern_id = ALL_PATTERNS.index(spec.kind)
    return np.random.default_rng(np.random.SeedSequence([spec.seed, pattern_id, realization_index]))


_DRAWS: Dict[PatternKind, Callable[[np.random.Generator, int], np.ndarray]] = {
    PatternKind.GAUSSIAN: lambda rng, size: rng.standard_normal(size),
    PatternKind.UNIFORM_HALF: lambda rng, size: rng.uniform(0.5, 1.0, size),
    PatternKind.UNIFORM_FULL: lambda rng, size: rng.uniform(0.0, 1.0, size),
}


def generate(pattern: PatternSpec, n: int, m: int, T: int, realization_index: int = 0) -> NoiseRealization:
    """
    Stacked (v, w̃) for one realization, w̃ already in the stacked sign convention.

    Deterministic kinds put s(t)·𝟙 in block t; stochastic kinds draw every
    scalar i.i.d. from a substream of (seed, pattern, realization_index), v first.
    """
    if pattern.kind == PatternKind.WORST_CASE:
        raise ro_errors.WorstCaseNeedsObserver("the worst-case pattern depends on the observer, use worst_case_noise")
    if n < 1 or m < 1 or T < 1:
        raise ro_errors.DimensionMismatch("need n, m >= 1 and T >= 1, got n=%d m=%d T=%d" % (n, m, T))
    if realization_index < 0:
        raise ro_errors.BadConfig("realization index must be nonnegative")
    if pattern.stochastic:
        rng = _rng(pattern, realization_index)
        draw = _DRAWS[pattern.kind]
        v = pattern.amplitude * draw(rng, m * (T + 1))
        w = pattern.amplitude * draw(rng, n * (T + 1))
    else:
        s = _signal(pattern, T)
        v = np.repeat(s, m)
        w = np.repeat(s, n)
    return NoiseRealization(
        v_stack=ro_linalg.readonly(v),
        w_stack=ro_linalg.readonly(w),
        pattern=pattern,
        realization_index=realization_index,
    )


def generate_batch(pattern: PatternSpec, n: int, m: int, T: int, count: int, start: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Column j is generate(..., realization_index=start + j)."""
    if count < 1:
        raise ro_errors.BadConfig("count must be at least 1, got %d" % count)
    V = np.zeros((m * (T + 1), count))
    W = np.zeros((n * (T + 1), count))
    for j in range(count):
        r = generate(pattern, n, m, T, start + j)
        V[:, j] = r.v_stack
        W[:, j] = r.w_stack
    return V, W


def worst_case_noise(maps: ro_sls.ErrorMaps, prob: ro_synthesis.SynthesisProblem) -> NoiseRealization:
    """
    Top right singular direction of 𝒬·[Φ_v 𝓗v⁻¹, Φ_w 𝓗w⁻¹] mapped back
    through 𝓗⁻¹, so ‖𝓗v v‖² + ‖𝓗w w‖² = 1 and the cost equals hinf_cost.
    """
    G = ro_synthesis.weighted_map(maps, prob, ro_synthesis.NoiseWeighting.ELLIPSOID)
    if G.shape[1] <= G.shape[0]:
        z = ro_linalg.sym_eig(0.5 * (G.T @ G + (G.T @ G).T)).top_vector()
    else:
        GGt = G @ G.T
        u = ro_linalg.sym_eig(0.5 * (GGt + GGt.T)).top_vector()
        z = G.T @ u
        norm = float(np.linalg.norm(z))
        if norm == 0.0:
            z = np.zeros(G.shape[1])
            z[0] = 1.0
        else:
            z /= norm
    pivot = int(np.argmax(np.abs(z)))
    if z[pivot] < 0.0:
        z = -z
    nv = prob.ops.nv
    v = prob.factors.Hv_inv @ z[:nv]
    w = prob.factors.Hw_inv @ z[nv:]
    logger.debug("worst-case noise for a %s observer", "causal" if maps.causal else "clairvoyant")
    return NoiseRealization(
        v_stack=ro_linalg.readonly(v),
        w_stack=ro_linalg.readonly(w),
        pattern=PatternSpec(kind=PatternKind.WORST_CASE),
    )
