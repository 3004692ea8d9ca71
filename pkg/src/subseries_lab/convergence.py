"""The truncation-scale Cauchy-style verdict engine.

A series with coefficients is convergent-at-scale under an ideal when, for
every epsilon of the grid, some restart point m in the grid makes the
epsilon-exceedance set {j in (m, N]: |D_j - D_m| > eps} score small; it is
divergent-at-scale when some epsilon scores large at every m; anything else
stays undecided.  Partial-sum paths are step functions, so sparse series
with astronomically long flat stretches cost only their support.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidParamsError
from .ideals import (
    IdealSpec,
    Smallness,
    SmallnessVerdict,
    VerdictParams,
    density_verdict,
    fin_verdict,
    score_prefix,
    _checkpoints,
)
from .series import Selector, SeriesSpec, kahan_cumsum, partial_sums, s_subseries_partial_sums
from .sets import ArithRule, SetPrefix

_MAX_DENSE = 50_000_000


class Overall(str, enum.Enum):
    CONVERGENT = "ConvergentAtScale"
    DIVERGENT = "DivergentAtScale"
    UNDECIDED = "Undecided"


class AbsoluteVerdict(str, enum.Enum):
    ABSOLUTELY_CONVERGENT = "AbsolutelyConvergentAtScale"
    NOT_ABSOLUTELY_CONVERGENT = "NotAbsolutelyConvergentAtScale"


@dataclass(frozen=True)
class EngineParams:
    """Horizon, epsilon grid, restart grid, and scorer thresholds."""

    horizon: int
    epsilon_grid: tuple[float, ...]
    m_grid: tuple[int, ...]
    verdict_params: VerdictParams

    def __post_init__(self):
        n = self.horizon
        if n < 2:
            raise InvalidParamsError("horizon must be >= 2")
        eps = self.epsilon_grid
        if not eps or any(e <= 0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
            raise InvalidParamsError("epsilon grid must be strictly decreasing and positive")
        ms = self.m_grid
        if not ms or ms[0] != 0 or any(b <= a for a, b in zip(ms, ms[1:])):
            raise InvalidParamsError("m grid must start at 0 and increase strictly")
        if ms[-1] > (n + 1) // 2:
            raise InvalidParamsError("m grid must stay within the first half of the horizon")

    @classmethod
    def default(cls, horizon: int = 100_000, verdict_params: Optional[VerdictParams] = None) -> "EngineParams":
        ms = sorted({0} | {-(-horizon // (1 << j)) for j in range(1, 11)})
        return cls(
            horizon=horizon,
            epsilon_grid=(0.2, 0.1, 0.05),
            m_grid=tuple(ms),
            verdict_params=verdict_params or VerdictParams(),
        )


# ---------------------------------------------------------------------------
# Step-function partial-sum paths
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StepPath:
    """D as a right-continuous step function: D_j = val[i] for
    idx[i] <= j < idx[i+1]; D_j = 0 before idx[0]; D_0 = 0."""

    horizon: int
    idx: np.ndarray  # int64, strictly increasing, >= 1
    val: np.ndarray  # float64

    @classmethod
    def from_dense(cls, d: np.ndarray, horizon: Optional[int] = None) -> "StepPath":
        n = d.size if horizon is None else horizon
        return cls(n, np.arange(1, d.size + 1, dtype=np.int64), np.asarray(d, dtype=np.float64))

    @classmethod
    def from_support(cls, coords: np.ndarray, contribs: np.ndarray, horizon: int) -> "StepPath":
        """Path of a series supported on ``coords`` with given contributions."""
        keep = contribs != 0.0
        return cls(horizon, coords[keep], kahan_cumsum(contribs[keep]))

    def value_at(self, j: int) -> float:
        if j <= 0:
            return 0.0
        i = int(np.searchsorted(self.idx, j, side="right")) - 1
        return float(self.val[i]) if i >= 0 else 0.0

    def segments(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(starts, ends, values) of maximal constant stretches covering [1, N]."""
        if self.idx.size == 0 or self.idx[0] > 1:
            starts = np.concatenate(([1], self.idx))
            vals = np.concatenate(([0.0], self.val))
        else:
            starts, vals = self.idx, self.val
        ends = np.concatenate((starts[1:] - 1, [self.horizon]))
        keep = starts <= self.horizon
        return starts[keep], ends[keep], vals[keep]


def build_path(series: SeriesSpec, selector, n: int) -> StepPath:
    """Partial-sum path of coeff * x up to n, dense or support-based."""
    if series.is_sparse and n > _MAX_DENSE:
        coords = series.support_coords()
        coords = coords[coords <= n]
        terms = series.terms_at(coords)
        if isinstance(selector, Selector):
            coeff = selector.values_at(coords).astype(np.float64)
        else:
            raise InvalidParamsError("support-based paths need a Selector")
        return StepPath.from_support(coords, coeff * terms, n)
    return StepPath.from_dense(partial_sums(series, selector, n), n)


# ---------------------------------------------------------------------------
# Exceedance sets
# ---------------------------------------------------------------------------


def _exceedance_runs(path: StepPath, m: int, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """Runs of {j in (m, N]: |D_j - D_m| > eps} (strict)."""
    if m >= path.horizon:
        raise InvalidParamsError("m must be below the horizon")
    ref = path.value_at(m)
    starts, ends, vals = path.segments()
    keep = ends > m
    starts, ends, vals = starts[keep], ends[keep], vals[keep]
    starts = np.maximum(starts, m + 1)
    flag = np.abs(vals - ref) > eps
    if not flag.any():
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    rise = flag & ~np.concatenate(([False], flag[:-1]))
    fall = flag & ~np.concatenate((flag[1:], [False]))
    rs = starts[np.flatnonzero(rise)]
    re = ends[np.flatnonzero(fall)]
    return rs, re - rs + 1


def exceedance_set(series: SeriesSpec, selector, m: int, eps: float, n: int) -> SetPrefix:
    """The strict epsilon-exceedance index set of D_j - D_m over (m, n]."""
    if eps <= 0:
        raise InvalidParamsError("epsilon must be positive")
    path = build_path(series, selector, n)
    rs, rl = _exceedance_runs(path, m, eps)
    return SetPrefix.from_runs(rs, rl, n)


# ---------------------------------------------------------------------------
# Fast smallness scoring straight off path segments
# ---------------------------------------------------------------------------


class _PathScorer:
    """Per-path precomputation for scoring exceedance sets at many (m, eps)."""

    def __init__(self, path: StepPath, ideal: IdealSpec, params: EngineParams):
        self.path = path
        self.ideal = ideal
        self.params = params
        self.n = params.horizon
        self.starts, self.ends, self.vals = path.segments()
        vp = params.verdict_params
        self.cps = np.asarray(_checkpoints(self.n, vp), dtype=np.int64)
        kind = ideal.kind
        self.fast = kind in ("Fin", "Density") or (
            kind == "RestrictedTo"
            and ideal.base.rule is not None
            and isinstance(ideal.base.rule, ArithRule)
            and ideal.base.rule.length <= ideal.base.rule.step
        )
        if kind in ("Fin", "RestrictedTo"):
            self.tail_cut = int(math.floor(vp.tail_fraction * self.n))
            self.suff_max = np.maximum.accumulate(self.vals[::-1])[::-1]
            self.suff_min = np.minimum.accumulate(self.vals[::-1])[::-1]

    def score(self, m: int, eps: float) -> Smallness:
        if self.fast:
            if self.ideal.kind == "Fin":
                return self._score_fin(m, eps)
            if self.ideal.kind == "Density":
                return self._score_density(m, eps)
            return self._score_restricted_arith(m, eps)
        rs, rl = _exceedance_runs(self.path, m, eps)
        prefix = SetPrefix.from_runs(rs, rl, self.n)
        return score_prefix(self.ideal, prefix, self.params.verdict_params).verdict

    def detail(self, m: int, eps: float) -> SmallnessVerdict:
        """Full scorer record (runs materialized); used for reported evidence."""
        rs, rl = _exceedance_runs(self.path, m, eps)
        prefix = SetPrefix.from_runs(rs, rl, self.n)
        return score_prefix(self.ideal, prefix, self.params.verdict_params)

    def _score_fin(self, m: int, eps: float) -> Smallness:
        ref = self.path.value_at(m)
        bound = max(m, self.tail_cut)
        i = int(np.searchsorted(self.ends, bound, side="right"))
        small = i >= self.vals.size or (
            self.suff_max[i] <= ref + eps and self.suff_min[i] >= ref - eps
        )
        # max element <= tail cut exactly when no exceedance survives past it
        return Smallness.SMALL if small else Smallness.LARGE

    def _score_density(self, m: int, eps: float) -> Smallness:
        ref = self.path.value_at(m)
        keep = self.ends > m
        s = np.maximum(self.starts[keep], m + 1)
        e = self.ends[keep]
        flagged = np.abs(self.vals[keep] - ref) > eps
        s, e = s[flagged], e[flagged]
        counts = np.empty(self.cps.size, dtype=np.float64)
        for i, cp in enumerate(self.cps.tolist()):
            hi = np.minimum(e, cp)
            counts[i] = np.clip(hi - s + 1, 0, None).sum()
        scores = counts / self.cps.astype(np.float64)
        return density_verdict(scores, self.params.verdict_params.density_threshold)

    def _score_restricted_arith(self, m: int, eps: float) -> Smallness:
        rule = self.ideal.base.rule
        first, step, length = rule.first, rule.step, rule.length
        ref = self.path.value_at(m)
        bound = max(m, self.tail_cut)
        keep = self.ends > bound
        s = np.maximum(self.starts[keep], bound + 1)
        e = self.ends[keep]
        flagged = np.abs(self.vals[keep] - ref) > eps
        s, e = s[flagged], e[flagged]
        if s.size == 0:
            return Smallness.SMALL
        # largest base block start at or below each segment end
        q = (e - first) // step
        ok = e >= first
        top = first + q * step + (length - 1)
        hits = ok & (np.minimum(top, e) >= s)
        return Smallness.LARGE if bool(hits.any()) else Smallness.SMALL


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EpsilonEvidence:
    epsilon: float
    best_m: Optional[int]
    verdict: SmallnessVerdict
    all_large: bool


@dataclass(frozen=True)
class ConvergenceVerdict:
    overall: Overall
    per_epsilon: tuple[EpsilonEvidence, ...]


def verdict_from_path(path: StepPath, ideal: IdealSpec, params: EngineParams,
                      with_evidence: bool = True) -> ConvergenceVerdict:
    scorer = _PathScorer(path, ideal, params)
    evidence: list[EpsilonEvidence] = []
    n_small_eps = 0
    any_all_large = False
    for eps in params.epsilon_grid:
        best_m = None
        all_large = True
        last_m = params.m_grid[-1]
        for m in params.m_grid:
            v = scorer.score(m, eps)
            if v is Smallness.SMALL:
                best_m = m
                break
            if v is not Smallness.LARGE:
                all_large = False
        if best_m is not None:
            n_small_eps += 1
            all_large = False
        else:
            any_all_large = any_all_large or all_large
        if with_evidence:
            at = best_m if best_m is not None else last_m
            evidence.append(EpsilonEvidence(eps, best_m, scorer.detail(at, eps), all_large))
    if n_small_eps == len(params.epsilon_grid):
        overall = Overall.CONVERGENT
    elif any_all_large:
        overall = Overall.DIVERGENT
    else:
        overall = Overall.UNDECIDED
    return ConvergenceVerdict(overall, tuple(evidence))


def overall_from_path(path: StepPath, ideal: IdealSpec, params: EngineParams) -> Overall:
    """Verdict only, skipping the per-epsilon evidence records."""
    return verdict_from_path(path, ideal, params, with_evidence=False).overall


def ideal_cauchy_verdict(series: SeriesSpec, selector, ideal: IdealSpec, params: EngineParams) -> ConvergenceVerdict:
    """Convergence-at-scale verdict of the coefficient-modified series."""
    path = build_path(series, selector, params.horizon)
    return verdict_from_path(path, ideal, params)


def s_subseries_verdict(series: SeriesSpec, s, ideal: IdealSpec, params: EngineParams) -> ConvergenceVerdict:
    """Engine verdict over the partial sums of n -> x_(s(n))."""
    s = np.asarray(s, dtype=np.int64)
    if params.horizon > s.size:
        raise InvalidParamsError(f"index prefix defined only up to {s.size} < horizon {params.horizon}")
    d = s_subseries_partial_sums(series, s[: params.horizon])
    return verdict_from_path(StepPath.from_dense(d), ideal, params)


def absolute_convergence_probe(series: SeriesSpec, n: int, tail_threshold: float = 0.01) -> AbsoluteVerdict:
    """Scalar stand-in for unconditional convergence: decaying |x| half-tails."""
    if n < 1_000:
        raise InvalidParamsError("probe needs a horizon of at least 1000")
    absx = np.abs(series.terms(n))
    q2, q4 = n // 2, n // 4
    curr = float(absx[q2:].sum())
    prev = float(absx[q4:q2].sum())
    ok = curr <= tail_threshold and prev >= 1.5 * curr
    return AbsoluteVerdict.ABSOLUTELY_CONVERGENT if ok else AbsoluteVerdict.NOT_ABSOLUTELY_CONVERGENT
