"""The ideal catalog and its prefix-scale smallness scorers.

Exact ideal membership is not decidable from a finite prefix, so each
catalog ideal gets a three-valued scorer: ``SMALL`` / ``LARGE`` when the
prefix evidence is one-sided at the configured thresholds, ``UNDECIDED``
otherwise.  The verdict is a pure function of (ideal, set prefix, params).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParamsError, UnsupportedIdealError
from .sequences import (
    GreedyWeightSeq,
    IdentitySeq,
    LinearSeq,
    Pow2Seq,
    SequenceRule,
    ExplicitSeq,
)
from .sets import ArithRule, IntervalFamily, SetPrefix


class Smallness(str, enum.Enum):
    SMALL = "Small"
    LARGE = "Large"
    UNDECIDED = "Undecided"


# -- weight rules for summable ideals ---------------------------------------

def _harmonic_weights(ns: np.ndarray) -> np.ndarray:
    return 1.0 / ns.astype(np.float64)


def _unit_weights(ns: np.ndarray) -> np.ndarray:
    return np.ones(ns.shape, dtype=np.float64)


WEIGHT_RULES: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "harmonic": _harmonic_weights,
    "unit": _unit_weights,
}


@dataclass(frozen=True)
class VerdictParams:
    """Thresholds for the prefix-scale scorers.

    tail_fraction: position fraction for the Fin-type rule (max element test).
    density_threshold: density bound for the density scorer.
    summable_tail_threshold: weight-mass bound for summable scorers.
    checkpoint_fractions: prefix fractions at which scores are sampled.
    stabilization_window: trailing checkpoints that must agree for the
        power-of-two neighborhood scorer to call a set small.
    """

    tail_fraction: float = 0.5
    density_threshold: float = 0.02
    summable_tail_threshold: float = 0.05
    checkpoint_fractions: tuple[float, ...] = (0.25, 0.5, 1.0)
    stabilization_window: int = 2

    def __post_init__(self):
        if not (0.0 < self.tail_fraction < 1.0):
            raise InvalidParamsError("tail_fraction must lie in (0,1)")
        if self.density_threshold <= 0 or self.summable_tail_threshold <= 0:
            raise InvalidParamsError("thresholds must be strictly positive")
        fr = self.checkpoint_fractions
        if len(fr) == 0 or any(f <= 0 or f > 1 for f in fr) or any(b <= a for a, b in zip(fr, fr[1:])):
            raise InvalidParamsError("checkpoint fractions must be strictly increasing in (0,1]")
        if self.stabilization_window < 2:
            raise InvalidParamsError("stabilization_window must be >= 2")


@dataclass(frozen=True)
class SmallnessVerdict:
    verdict: Smallness
    score: float
    checkpoints: tuple[tuple[int, float], ...]


@dataclass(frozen=True)
class IdealSpec:
    """A catalog ideal: Fin, Density, Summable, RestrictedTo, PowerTwoNbhd, Lacunary."""

    kind: str
    weight_rule: Optional[str] = None
    base: Optional[IntervalFamily] = None
    generators: tuple[SequenceRule, ...] = field(default_factory=tuple)

    KINDS = ("Fin", "Density", "Summable", "RestrictedTo", "PowerTwoNbhd", "Lacunary")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidParamsError(f"unknown ideal kind {self.kind!r}")
        if self.kind == "Summable":
            self._validate_weights()
        if self.kind == "RestrictedTo" and self.base is None:
            raise InvalidParamsError("RestrictedTo needs a base family")
        if self.kind == "Lacunary":
            if not self.generators:
                raise InvalidParamsError("Lacunary needs at least one generator")
            for g in self.generators:
                _validate_lacunary_generator(g)

    def _validate_weights(self):
        if self.weight_rule not in WEIGHT_RULES:
            raise InvalidParamsError(f"unknown weight rule {self.weight_rule!r}")
        w = WEIGHT_RULES[self.weight_rule]
        ns = np.arange(1, 10_001, dtype=np.int64)
        ws = w(ns)
        if np.any(ws <= 0):
            raise InvalidParamsError("summable weights must be positive")
        if ws[5000:].sum() < 0.05:
            raise InvalidParamsError("summable weights must have divergent full sum on tested prefixes")

    @property
    def weights(self) -> Callable[[np.ndarray], np.ndarray]:
        return WEIGHT_RULES[self.weight_rule]

    # -- constructors --------------------------------------------------------

    @classmethod
    def fin(cls) -> "IdealSpec":
        return cls("Fin")

    @classmethod
    def density(cls) -> "IdealSpec":
        return cls("Density")

    @classmethod
    def summable(cls, weight_rule: str = "harmonic") -> "IdealSpec":
        return cls("Summable", weight_rule=weight_rule)

    @classmethod
    def restricted_to(cls, base: IntervalFamily) -> "IdealSpec":
        return cls("RestrictedTo", base=base)

    @classmethod
    def power_two_nbhd(cls) -> "IdealSpec":
        return cls("PowerTwoNbhd")

    @classmethod
    def lacunary(cls, generators) -> "IdealSpec":
        return cls("Lacunary", generators=tuple(generators))

    def label(self) -> str:
        if self.kind == "Summable":
            return f"Summable({self.weight_rule})"
        if self.kind == "Lacunary":
            return f"Lacunary(x{len(self.generators)})"
        return self.kind


def _validate_lacunary_generator(gen: SequenceRule, probe: int = 512) -> None:
    vals = gen.prefix(probe)
    gaps = np.diff(vals)
    if np.any(gaps <= 0):
        raise InvalidParamsError("lacunary generator must be strictly increasing")
    half = probe // 2
    if gaps[half:].min() < gaps[:half].max():
        raise InvalidParamsError("lacunary generator gaps must be eventually increasing on the tested prefix")


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------


def _checkpoints(horizon: int, params: VerdictParams) -> list[int]:
    cps = [int(math.floor(f * horizon)) for f in params.checkpoint_fractions]
    if cps[0] < 1:
        raise InvalidParamsError("horizon below first checkpoint")
    out: list[int] = []
    for c in cps:
        if not out or c > out[-1]:
            out.append(c)
    return out


def _max_upto(s: SetPrefix, n: int) -> int:
    """Largest member of the set that is <= n (0 if none)."""
    i = int(np.searchsorted(s.starts, n, side="right")) - 1
    if i < 0:
        return 0
    return int(min(s.run_ends[i], n))


def _dist_to_pow2_max(s: SetPrefix, upto: int) -> int:
    """Max over members <= upto of the distance to the nearest power of 2."""
    best = 0
    ends = s.run_ends
    for a, b in zip(s.starts.tolist(), ends.tolist()):
        if a > upto:
            break
        b = min(b, upto)
        for x in (a, b):
            best = max(best, _dist_to_pow2(x))
        # interior maxima sit at midpoints 3*2^(j-1)
        j = 1
        while 3 * (1 << (j - 1)) <= b:
            mid = 3 * (1 << (j - 1))
            if a <= mid <= b:
                best = max(best, _dist_to_pow2(mid))
            j += 1
    return best


def _dist_to_pow2(x: int) -> int:
    if x <= 1:
        return abs(x - 1)
    j = x.bit_length() - 1
    return min(x - (1 << j), (1 << (j + 1)) - x)


def _summable_tail(ideal: IdealSpec, s: SetPrefix, lo_exclusive: int, hi: int) -> float:
    """Sum of weights over members in (lo_exclusive, hi]."""
    total = 0.0
    wfn = ideal.weights
    for a, b in zip(s.starts.tolist(), s.run_ends.tolist()):
        a2, b2 = max(a, lo_exclusive + 1), min(b, hi)
        if a2 > b2:
            continue
        total += float(wfn(np.arange(a2, b2 + 1, dtype=np.int64)).sum())
    return total


def _restricted_max(base: IntervalFamily, s: SetPrefix, upto: int) -> int:
    """Largest member of (E ∩ base) that is <= upto (0 if none)."""
    ends = s.run_ends
    for i in range(len(s.starts) - 1, -1, -1):
        a, b = int(s.starts[i]), int(min(ends[i], upto))
        if a > upto:
            continue
        hit = base.max_element_in(a, b)
        if hit is not None:
            return hit
    return 0


def fin_verdict(max_element: int, horizon: int, tail_fraction: float) -> Smallness:
    """The finite-set rule: small iff nothing survives past the tail cut."""
    return Smallness.SMALL if max_element <= tail_fraction * horizon else Smallness.LARGE


def density_verdict(scores: np.ndarray, delta: float) -> Smallness:
    """Small iff every checkpoint density is within delta; large iff the
    final density exceeds 2*delta and densities never decreased."""
    if float(scores.max()) <= delta:
        return Smallness.SMALL
    if scores[-1] > 2 * delta and np.all(np.diff(scores) >= 0):
        return Smallness.LARGE
    return Smallness.UNDECIDED


def score_prefix(ideal: IdealSpec, prefix: SetPrefix, params: VerdictParams) -> SmallnessVerdict:
    """Three-valued smallness verdict of a set prefix under a catalog ideal."""
    n = prefix.horizon
    cps = _checkpoints(n, params)

    if ideal.kind == "Fin":
        checkpoint_scores = [(c, _max_upto(prefix, c) / c) for c in cps]
        maxe = prefix.max_element()
        verdict = fin_verdict(maxe, n, params.tail_fraction)
        return SmallnessVerdict(verdict, maxe / n, tuple(checkpoint_scores))

    if ideal.kind == "Density":
        counts = prefix.counts_upto(np.asarray(cps, dtype=np.int64)).astype(np.float64)
        scores = counts / np.asarray(cps, dtype=np.float64)
        verdict = density_verdict(scores, params.density_threshold)
        return SmallnessVerdict(verdict, float(scores.max()), tuple((c, float(v)) for c, v in zip(cps, scores)))

    if ideal.kind == "Summable":
        thr = params.summable_tail_threshold
        checkpoint_scores = [(c, _summable_tail(ideal, prefix, c // 2, c)) for c in cps]
        tail = checkpoint_scores[-1][1]
        if tail <= thr:
            verdict = Smallness.SMALL
        elif tail > 2 * thr:
            verdict = Smallness.LARGE
        else:
            verdict = Smallness.UNDECIDED
        return SmallnessVerdict(verdict, tail, tuple(checkpoint_scores))

    if ideal.kind == "RestrictedTo":
        checkpoint_scores = [(c, _restricted_max(ideal.base, prefix, c) / c) for c in cps]
        maxr = _restricted_max(ideal.base, prefix, n)
        verdict = Smallness.SMALL if maxr <= params.tail_fraction * n else Smallness.LARGE
        return SmallnessVerdict(verdict, maxr / n, tuple(checkpoint_scores))

    if ideal.kind == "PowerTwoNbhd":
        scores = [float(_dist_to_pow2_max(prefix, c)) for c in cps]
        w = min(params.stabilization_window, len(scores))
        stabilized = len(set(scores[-w:])) == 1
        doubled = len(scores) >= 2 and scores[-1] >= 2 * scores[-2] and scores[-1] > 0
        if stabilized:
            verdict = Smallness.SMALL
        elif doubled:
            verdict = Smallness.LARGE
        else:
            verdict = Smallness.UNDECIDED
        return SmallnessVerdict(verdict, scores[-1], tuple(zip(cps, scores)))

    if ideal.kind == "Lacunary":
        # membership in the lacunary ideal is a covering property, not
        # recoverable from a raw prefix; see the refutation operation instead
        return SmallnessVerdict(Smallness.UNDECIDED, 0.0, tuple((c, 0.0) for c in cps))

    raise UnsupportedIdealError(f"no scorer for ideal kind {ideal.kind!r}")


# ---------------------------------------------------------------------------
# Interval schemes witnessing the Baire property
# ---------------------------------------------------------------------------


def baire_intervals(ideal: IdealSpec) -> SequenceRule:
    """An interval scheme (n_k) such that no small set should contain
    infinitely many of the windows [n_k, n_(k+1)).

    Fin -> k; Density -> 2^k; RestrictedTo -> cut points through the base;
    Summable -> unit-mass windows.
    """
    if ideal.kind == "Fin":
        return IdentitySeq()
    if ideal.kind == "Density":
        return Pow2Seq()
    if ideal.kind == "RestrictedTo":
        base = ideal.base
        if base.rule is not None and isinstance(base.rule, ArithRule):
            r = base.rule
            return LinearSeq(r.step, r.first - r.step)
        if base.rule is None and base.explicit_starts.size > 0:
            return ExplicitSeq(base.explicit_starts)
        raise UnsupportedIdealError("RestrictedTo base must be arithmetic or explicit for interval schemes")
    if ideal.kind == "Summable":
        return GreedyWeightSeq(ideal.weights)
    raise UnsupportedIdealError(f"no Baire interval scheme for ideal kind {ideal.kind!r}")
