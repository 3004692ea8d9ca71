"""Series term rules, 0-1 / ±1 selectors, codings, and partial sums.

Partial sums are always taken left-to-right with Kahan-compensated
summation, so every documented exact identity is reproducible bit for bit.
Terms of the dyadic block construction (`Slovak`) are powers of two, hence
its partial sums over integer selectors are exact outright.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng
from .errors import InsufficientHorizonError, InvalidParamsError, UnsupportedIdealError
from .ideals import IdealSpec, Smallness, VerdictParams, score_prefix
from .sequences import Pow2Seq
from .sets import IntervalFamily
from .witnesses import ffact_normalize, pli_witness_for_density

try:  # pragma: no cover - exercised implicitly
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

_MAX_DENSE = 50_000_000

ZERO_ONE = "zero_one"
PLUS_MINUS = "plus_minus"


def _kahan_cumsum_py(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    s = 0.0
    c = 0.0
    for i in range(x.size):
        y = x[i] - c
        t = s + y
        c = (t - s) - y
        s = t
        out[i] = s
    return out


if _HAVE_NUMBA:
    _kahan_cumsum_jit = njit(cache=True)(_kahan_cumsum_py)
else:  # pragma: no cover
    _kahan_cumsum_jit = _kahan_cumsum_py


def kahan_cumsum(values: np.ndarray) -> np.ndarray:
    """Left-to-right compensated running sums of a float64 vector."""
    x = np.ascontiguousarray(values, dtype=np.float64)
    return _kahan_cumsum_jit(x)


# ---------------------------------------------------------------------------
# Series specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeriesSpec:
    """A deterministic real term rule n -> x_n, n >= 1."""

    kind: str
    p: float = 0.0
    r: float = 0.0
    values: Optional[np.ndarray] = None
    witness: Optional[IntervalFamily] = None

    KINDS = ("Table", "AlternatingPower", "Power", "Geometric", "E1Periodic", "PlusMinusOne", "Slovak")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidParamsError(f"unknown series kind {self.kind!r}")
        if self.kind in ("AlternatingPower", "Power") and self.p <= 0:
            raise InvalidParamsError("exponent p must be positive")
        if self.kind == "Geometric" and not (0.0 < self.r < 1.0):
            raise InvalidParamsError("geometric ratio must lie in (0,1)")
        if self.kind == "Table":
            if self.values is None:
                raise InvalidParamsError("table series needs values")
            v = np.ascontiguousarray(self.values, dtype=np.float64)
            v.flags.writeable = False
            object.__setattr__(self, "values", v)
        if self.kind == "Slovak":
            self._init_slovak()

    def _init_slovak(self):
        w = self.witness
        if w is None or w.rule is not None:
            raise InvalidParamsError("dyadic block series needs an explicit witness family")
        starts = w.explicit_starts.astype(np.int64)
        lengths = w.explicit_lengths.astype(np.int64)
        if starts.size == 0:
            raise InvalidParamsError("witness family is empty")
        for i, l in enumerate(lengths.tolist()):
            if l != 1 << (i + 2):
                raise InvalidParamsError("witness block k must have length 2^(k+1), k = 1, 2, ...")
        ends = starts + lengths - 1
        if np.any(starts[1:] <= ends[:-1]):
            raise InvalidParamsError("witness blocks must be disjoint and ordered")
        object.__setattr__(self, "_block_starts", starts)
        object.__setattr__(self, "_block_ks", np.arange(1, starts.size + 1, dtype=np.int64))

    # -- constructors --------------------------------------------------------

    @classmethod
    def table(cls, values) -> "SeriesSpec":
        return cls("Table", values=np.asarray(values, dtype=np.float64))

    @classmethod
    def alternating_power(cls, p: float) -> "SeriesSpec":
        return cls("AlternatingPower", p=p)

    @classmethod
    def power(cls, p: float) -> "SeriesSpec":
        return cls("Power", p=p)

    @classmethod
    def geometric(cls, r: float) -> "SeriesSpec":
        return cls("Geometric", r=r)

    @classmethod
    def e1_periodic(cls) -> "SeriesSpec":
        return cls("E1Periodic")

    @classmethod
    def plus_minus_one(cls) -> "SeriesSpec":
        return cls("PlusMinusOne")

    @classmethod
    def slovak(cls, witness: IntervalFamily) -> "SeriesSpec":
        return cls("Slovak", witness=witness)

    # -- term evaluation -----------------------------------------------------

    def term(self, n: int) -> float:
        if n < 1:
            raise InvalidParamsError("term index must be >= 1")
        return float(self.terms_at(np.asarray([n], dtype=np.int64))[0])

    def terms_at(self, idx: np.ndarray) -> np.ndarray:
        """Vectorized x_n over an arbitrary array of indices."""
        idx = np.asarray(idx, dtype=np.int64)
        if self.kind == "Table":
            out = np.zeros(idx.shape, dtype=np.float64)
            ok = idx <= self.values.size
            out[ok] = self.values[idx[ok] - 1]
            return out
        if self.kind == "AlternatingPower":
            sign = np.where(idx % 2 == 1, 1.0, -1.0)
            return sign * np.power(idx.astype(np.float64), -self.p)
        if self.kind == "Power":
            return np.power(idx.astype(np.float64), -self.p)
        if self.kind == "Geometric":
            return np.power(self.r, idx.astype(np.float64))
        if self.kind == "E1Periodic":
            lut = np.asarray([1.0, 0.0, -1.0])
            return lut[(idx - 1) % 3]
        if self.kind == "PlusMinusOne":
            return np.where(idx % 2 == 1, 1.0, -1.0)
        if self.kind == "Slovak":
            starts = self._block_starts
            i = np.searchsorted(starts, idx, side="right") - 1
            out = np.zeros(idx.shape, dtype=np.float64)
            valid = i >= 0
            iv = i[valid]
            k = iv + 1
            off = idx[valid] - starts[iv]
            half = np.int64(1) << k
            mag = np.ldexp(1.0, (-k).astype(np.int64))
            val = np.where(off < half, mag, np.where(off < 2 * half, -mag, 0.0))
            out[valid] = val
            return out
        raise InvalidParamsError(f"unknown series kind {self.kind!r}")

    def terms(self, n: int) -> np.ndarray:
        """x_1..x_n as a dense vector."""
        if n > _MAX_DENSE:
            raise InvalidParamsError("horizon too large to materialize terms densely")
        return self.terms_at(np.arange(1, n + 1, dtype=np.int64))

    @property
    def is_sparse(self) -> bool:
        """True when x vanishes off a known finite support (dyadic blocks)."""
        return self.kind == "Slovak"

    def support_coords(self) -> np.ndarray:
        """Indices of the (possibly) nonzero terms, for sparse kinds."""
        if self.kind == "Slovak":
            parts = [
                np.arange(s, s + (1 << (k + 1)), dtype=np.int64)
                for s, k in zip(self._block_starts.tolist(), self._block_ks.tolist())
            ]
            return np.concatenate(parts)
        if self.kind == "Table":
            return np.arange(1, self.values.size + 1, dtype=np.int64)
        raise InvalidParamsError(f"series kind {self.kind!r} has no finite support")

    def label(self) -> str:
        if self.kind in ("AlternatingPower", "Power"):
            return f"{self.kind}(p={self.p:g})"
        if self.kind == "Geometric":
            return f"Geometric(r={self.r:g})"
        if self.kind == "Table":
            return f"Table(len={self.values.size})"
        if self.kind == "Slovak":
            return f"Slovak(blocks={self._block_starts.size})"
        return self.kind


# ---------------------------------------------------------------------------
# Selectors
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Selector:
    """A 0-1 or ±1 coefficient sequence, explicit, rule-based, or sampled."""

    alphabet: str
    source: str  # "explicit" | "ones" | "family" | "periodic" | "sampled"
    explicit: Optional[np.ndarray] = None
    family: Optional[IntervalFamily] = None
    pattern: tuple[int, ...] = field(default_factory=tuple)
    seed: int = 0
    trial: int = 0
    negated: bool = False

    def __post_init__(self):
        if self.alphabet not in (ZERO_ONE, PLUS_MINUS):
            raise InvalidParamsError(f"unknown alphabet {self.alphabet!r}")
        if self.source == "explicit":
            v = np.ascontiguousarray(self.explicit, dtype=np.int8)
            allowed = (0, 1) if self.alphabet == ZERO_ONE else (-1, 1)
            if not np.isin(v, allowed).all():
                raise InvalidParamsError("selector values outside the declared alphabet")
            v.flags.writeable = False
            object.__setattr__(self, "explicit", v)
        if self.source == "periodic":
            allowed = (0, 1) if self.alphabet == ZERO_ONE else (-1, 1)
            if not self.pattern or any(b not in allowed for b in self.pattern):
                raise InvalidParamsError("periodic selector pattern outside the alphabet")

    # -- constructors --------------------------------------------------------

    @classmethod
    def ones(cls, alphabet: str = ZERO_ONE) -> "Selector":
        return cls(alphabet, "ones")

    @classmethod
    def from_bits(cls, bits, alphabet: str = ZERO_ONE) -> "Selector":
        return cls(alphabet, "explicit", explicit=np.asarray(bits, dtype=np.int8))

    @classmethod
    def char_of(cls, family: IntervalFamily, alphabet: str = ZERO_ONE) -> "Selector":
        return cls(alphabet, "family", family=family)

    @classmethod
    def periodic(cls, pattern, alphabet: str = ZERO_ONE) -> "Selector":
        return cls(alphabet, "periodic", pattern=tuple(int(b) for b in pattern))

    @classmethod
    def sampled(cls, seed: int, trial: int, alphabet: str = ZERO_ONE) -> "Selector":
        return cls(alphabet, "sampled", seed=seed, trial=trial)

    # -- evaluation ----------------------------------------------------------

    def values(self, n: int) -> np.ndarray:
        """Coefficients for indices 1..n (int8)."""
        if self.source == "explicit":
            if self.explicit.size < n:
                raise InvalidParamsError(f"selector defined only up to {self.explicit.size} < {n}")
            v = self.explicit[:n].copy()
        elif self.source == "ones":
            v = np.ones(n, dtype=np.int8)
        elif self.source == "family":
            bits = self.family.prefix(n).bits().astype(np.int8)
            v = bits if self.alphabet == ZERO_ONE else (2 * bits - 1).astype(np.int8)
        elif self.source == "periodic":
            reps = -(-n // len(self.pattern))
            v = np.tile(np.asarray(self.pattern, dtype=np.int8), reps)[:n]
        elif self.source == "sampled":
            bits = rng.selector_bits(self.seed, self.trial, 1, n).astype(np.int8)
            v = bits if self.alphabet == ZERO_ONE else (2 * bits - 1).astype(np.int8)
        else:
            raise InvalidParamsError(f"unknown selector source {self.source!r}")
        if self.negated:
            v = (1 - v).astype(np.int8) if self.alphabet == ZERO_ONE else (-v).astype(np.int8)
        return v

    def values_at(self, coords: np.ndarray) -> np.ndarray:
        """Coefficients at arbitrary 1-based coordinates (int8)."""
        coords = np.asarray(coords, dtype=np.int64)
        if self.source == "explicit":
            if coords.size and coords.max() > self.explicit.size:
                raise InvalidParamsError("selector defined below a requested coordinate")
            v = self.explicit[coords - 1].copy()
        elif self.source == "ones":
            v = np.ones(coords.shape, dtype=np.int8)
        elif self.source == "family":
            bits = np.asarray([1 if self.family.max_element_in(int(c), int(c)) else 0 for c in coords], dtype=np.int8)
            v = bits if self.alphabet == ZERO_ONE else (2 * bits - 1).astype(np.int8)
        elif self.source == "periodic":
            pat = np.asarray(self.pattern, dtype=np.int8)
            v = pat[(coords - 1) % len(pat)]
        elif self.source == "sampled":
            bits = rng.selector_bits_at(self.seed, self.trial, coords).astype(np.int8)
            v = bits if self.alphabet == ZERO_ONE else (2 * bits - 1).astype(np.int8)
        else:
            raise InvalidParamsError(f"unknown selector source {self.source!r}")
        if self.negated:
            v = (1 - v).astype(np.int8) if self.alphabet == ZERO_ONE else (-v).astype(np.int8)
        return v

    def label(self) -> str:
        if self.source == "sampled":
            return f"sampled(seed={self.seed},trial={self.trial})"
        if self.source == "periodic":
            return "periodic(" + "".join(str(b) for b in self.pattern) + ")"
        neg = "~" if self.negated else ""
        return neg + self.source


def complement_selector(t: Selector) -> Selector:
    """The 0-1 complement 1-t (involutive)."""
    if t.alphabet != ZERO_ONE:
        raise InvalidParamsError("complement is defined for 0-1 selectors")
    return Selector(
        t.alphabet, t.source, explicit=t.explicit, family=t.family,
        pattern=t.pattern, seed=t.seed, trial=t.trial, negated=not t.negated,
    )


def sign_shift(w: Selector, t: Selector, n: int) -> np.ndarray:
    """z = t + w coordinatewise for ±1 selectors; values in {-2, 0, 2}."""
    if w.alphabet != PLUS_MINUS or t.alphabet != PLUS_MINUS:
        raise InvalidParamsError("sign shift needs two ±1 selectors")
    return (t.values(n).astype(np.int16) + w.values(n).astype(np.int16)).astype(np.int8)


# ---------------------------------------------------------------------------
# Partial sums and codings
# ---------------------------------------------------------------------------


def _coeffs(selector, n: int) -> np.ndarray:
    if isinstance(selector, Selector):
        return selector.values(n)
    arr = np.asarray(selector)
    if arr.size < n:
        raise InvalidParamsError(f"coefficient array defined only up to {arr.size} < {n}")
    return arr[:n]


def partial_sums(series: SeriesSpec, selector, n: int) -> np.ndarray:
    """D_1..D_n with D_j the compensated running sum of coeff(i) * x_i."""
    coeff = _coeffs(selector, n).astype(np.float64)
    return kahan_cumsum(coeff * series.terms(n))


def s_to_zero_one(s) -> Selector:
    """Characteristic-function coding of a strictly increasing index prefix."""
    s = np.asarray(s, dtype=np.int64)
    if s.size == 0 or s[0] < 1 or np.any(np.diff(s) <= 0):
        raise InvalidParamsError("index prefix must be nonempty, positive, strictly increasing")
    bits = np.zeros(int(s[-1]), dtype=np.int8)
    bits[s - 1] = 1
    return Selector.from_bits(bits)


def zero_one_to_s(t: Selector, n: Optional[int] = None) -> np.ndarray:
    """Positions of the ones of a 0-1 selector, in increasing order."""
    if t.alphabet != ZERO_ONE:
        raise InvalidParamsError("coding expects a 0-1 selector")
    if n is None:
        if t.source != "explicit":
            raise InvalidParamsError("horizon required for non-explicit selectors")
        n = t.explicit.size
    return np.flatnonzero(t.values(n)).astype(np.int64) + 1


def s_subseries_partial_sums(series: SeriesSpec, s) -> np.ndarray:
    """Partial sums of n -> x_(s(n)).

    This is generally a different sequence from the partial sums of the 0-1
    coded selector over the same index set.
    """
    s = np.asarray(s, dtype=np.int64)
    if s.size and (s[0] < 1 or np.any(np.diff(s) <= 0)):
        raise InvalidParamsError("index prefix must be positive and strictly increasing")
    return kahan_cumsum(series.terms_at(s))


# ---------------------------------------------------------------------------
# The dyadic block construction over a long-interval witness
# ---------------------------------------------------------------------------


PLI_WITNESS_GENERATORS = {
    "Density": pli_witness_for_density,
}


@dataclass(frozen=True)
class SlovakBundle:
    """A dyadic block series together with its witness and gap families."""

    series: SeriesSpec
    witness: IntervalFamily
    complement: IntervalFamily
    horizon: int
    k_max: int


def slovak_build(
    ideal: IdealSpec, k_max: int = 14, params: VerdictParams | None = None
) -> SlovakBundle:
    """Build the divergent dyadic block series whose blocks form a small set.

    Block k carries 2^k terms of +2^-k then 2^k terms of -2^-k inside a
    length-2^(k+1) interval of the ideal's long-interval witness; all other
    terms are zero.  The witness block set is checked to score small.
    """
    if k_max < 1:
        raise InvalidParamsError("k_max must be >= 1")
    gen = PLI_WITNESS_GENERATORS.get(ideal.kind)
    if gen is None:
        raise UnsupportedIdealError(f"no long-interval witness generator for ideal {ideal.kind!r}")
    raw = gen()
    lengths = Pow2Seq(shift=1)  # block k has length 2^(k+1)
    longest = 1 << (k_max + 1)
    search_horizon = longest**3 + 2 * longest
    blocks = ffact_normalize(lengths, raw, count=k_max, search_horizon=search_horizon)
    horizon = int(blocks.explicit_starts[-1] + blocks.explicit_lengths[-1] - 1)

    verdict = score_prefix(ideal, blocks.prefix(horizon), params or VerdictParams())
    if verdict.verdict is not Smallness.SMALL:
        raise InsufficientHorizonError("witness block set does not score small at the built horizon")

    starts = blocks.explicit_starts
    ends = starts + blocks.explicit_lengths - 1
    gap_starts = ends[:-1] + 1
    gap_lengths = starts[1:] - gap_starts
    keep = gap_lengths > 0
    complement = IntervalFamily.from_intervals(
        list(zip(gap_starts[keep].tolist(), gap_lengths[keep].tolist())), normalized=True
    )
    return SlovakBundle(SeriesSpec.slovak(blocks), blocks, complement, horizon, k_max)


# ---------------------------------------------------------------------------
# ±1 reduction to the shifted coefficient space
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SignReduction:
    """Outcome of the divergence probe over a partition of the index set."""

    chosen: str  # "M1" or "M2"
    v: np.ndarray  # coefficients in {-2,0} (M1 chosen) or {0,2} (M2 chosen)
    oscillation_m1: float
    oscillation_m2: float
    tie: bool


def _min_tail_oscillation(d: np.ndarray, m_max: int) -> float:
    """min over m <= m_max of (max - min) of D over (m, N]."""
    n = d.size
    if m_max >= n:
        raise InvalidParamsError("m_max must be below the horizon")
    suff_max = np.maximum.accumulate(d[::-1])[::-1]
    suff_min = np.minimum.accumulate(d[::-1])[::-1]
    oscs = suff_max[: m_max + 1] - suff_min[: m_max + 1]
    return float(oscs.min())


def sign_reduction_setup(
    series: SeriesSpec,
    u: Selector,
    partition_m1: IntervalFamily,
    horizon: int,
    m_max: int = 50,
    osc_threshold: float = 1.0,
) -> SignReduction:
    """Pick the half of a partition on which the u-subseries keeps diverging.

    The divergence probe requires the partial-sum oscillation over (m, N] to
    exceed the threshold for every m <= m_max; the half with the larger
    worst-case oscillation wins (ties go to M1 and are flagged).
    """
    if u.alphabet != ZERO_ONE:
        raise InvalidParamsError("the divergent-subseries witness must be a 0-1 selector")
    bits_u = u.values(horizon).astype(np.float64)
    mask1 = partition_m1.prefix(horizon).bits().astype(np.float64)
    x = series.terms(horizon)
    d1 = kahan_cumsum(bits_u * mask1 * x)
    d2 = kahan_cumsum(bits_u * (1.0 - mask1) * x)
    osc1 = _min_tail_oscillation(d1, m_max)
    osc2 = _min_tail_oscillation(d2, m_max)
    if osc1 <= osc_threshold and osc2 <= osc_threshold:
        raise InsufficientHorizonError(
            f"both partition halves oscillate below {osc_threshold} within the horizon"
        )
    tie = osc1 == osc2
    if osc1 >= osc2:
        v = (-2.0 * bits_u * mask1).astype(np.int8)
        return SignReduction("M1", v, osc1, osc2, tie)
    v = (2.0 * bits_u * (1.0 - mask1)).astype(np.int8)
    return SignReduction("M2", v, osc1, osc2, tie)
