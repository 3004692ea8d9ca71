"""Finite representations of subsets of the positive integers.

Two representations are used throughout:

* ``SetPrefix`` -- a subset of ``{1..horizon}`` stored as maximal runs of
  consecutive members.  Runs keep prefix operations cheap even when the
  horizon is astronomically large (e.g. exceedance sets of sparse series).
* ``IntervalFamily`` -- a finite or rule-generated family of integer
  intervals ``[start, start+length)``; ``prefix(N)`` clips it to a
  ``SetPrefix``.

All values are immutable after construction; indices are 1-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .errors import InvalidParamsError

_MAX_MATERIALIZE = 50_000_000  # refuse to expand bits/elements beyond this


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


# ---------------------------------------------------------------------------
# SetPrefix
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SetPrefix:
    """A subset of {1..horizon} as sorted, disjoint, non-adjacent runs.

    ``starts[i]`` .. ``starts[i] + lengths[i] - 1`` are the members of run i.
    """

    horizon: int
    starts: np.ndarray
    lengths: np.ndarray

    def __post_init__(self):
        if self.horizon < 1:
            raise InvalidParamsError("horizon must be a positive integer")

    # -- constructors -------------------------------------------------------

    @classmethod
    def empty(cls, horizon: int) -> "SetPrefix":
        z = _frozen(np.zeros(0, dtype=np.int64))
        return cls(horizon, z, z)

    @classmethod
    def from_runs(cls, starts, lengths, horizon: int) -> "SetPrefix":
        """Build from (possibly overlapping/unsorted) runs, clipping to [1, horizon]."""
        s = np.asarray(starts, dtype=np.int64)
        ln = np.asarray(lengths, dtype=np.int64)
        if s.shape != ln.shape:
            raise InvalidParamsError("starts and lengths must have equal shape")
        if np.any(ln < 0):
            raise InvalidParamsError("run lengths must be nonnegative")
        keep = ln > 0
        s, ln = s[keep], ln[keep]
        ends = s + ln - 1
        keep = (ends >= 1) & (s <= horizon)
        s, ends = s[keep], ends[keep]
        s = np.maximum(s, 1)
        ends = np.minimum(ends, horizon)
        if s.size == 0:
            return cls.empty(horizon)
        order = np.argsort(s, kind="stable")
        s, ends = s[order], ends[order]
        # merge runs that overlap or touch: a run opens a new group iff its
        # start exceeds the running max end of everything before it, plus 1
        cummax_end = np.maximum.accumulate(ends)
        new_group = np.empty(s.size, dtype=bool)
        new_group[0] = True
        new_group[1:] = s[1:] > cummax_end[:-1] + 1
        firsts = np.flatnonzero(new_group)
        starts_arr = s[firsts]
        ends_arr = np.maximum.reduceat(ends, firsts)
        lens_arr = ends_arr - starts_arr + 1
        return cls(horizon, _frozen(starts_arr), _frozen(lens_arr))

    @classmethod
    def from_elements(cls, elements, horizon: int) -> "SetPrefix":
        e = np.unique(np.asarray(elements, dtype=np.int64))
        e = e[(e >= 1) & (e <= horizon)]
        return cls.from_runs(e, np.ones_like(e), horizon)

    @classmethod
    def from_bits(cls, bits, horizon: Optional[int] = None) -> "SetPrefix":
        """``bits[i]`` is membership of i+1; horizon defaults to len(bits)."""
        b = np.asarray(bits).astype(bool)
        n = len(b) if horizon is None else horizon
        if len(b) != n:
            raise InvalidParamsError("membership must have exactly horizon entries")
        padded = np.concatenate(([False], b, [False]))
        edges = np.flatnonzero(padded[1:] != padded[:-1])
        starts = edges[0::2] + 1
        ends = edges[1::2]
        return cls(n, _frozen(starts.astype(np.int64)), _frozen((ends - starts + 1).astype(np.int64)))

    # -- queries ------------------------------------------------------------

    @property
    def run_ends(self) -> np.ndarray:
        return self.starts + self.lengths - 1

    def cardinality(self) -> int:
        return int(self.lengths.sum())

    def is_empty(self) -> bool:
        return self.starts.size == 0

    def max_element(self) -> int:
        """Largest member, or 0 for the empty set."""
        if self.starts.size == 0:
            return 0
        return int(self.starts[-1] + self.lengths[-1] - 1)

    def count_upto(self, n: int) -> int:
        """|E ∩ [1, n]|."""
        return int(self.counts_upto(np.asarray([n], dtype=np.int64))[0])

    def counts_upto(self, ns: np.ndarray) -> np.ndarray:
        """Vectorized |E ∩ [1, n]| for each n."""
        ns = np.asarray(ns, dtype=np.int64)
        if self.starts.size == 0:
            return np.zeros(ns.shape, dtype=np.int64)
        cum = np.concatenate(([0], np.cumsum(self.lengths)))
        i = np.searchsorted(self.starts, ns, side="right")
        full = cum[i]
        # subtract the part of run i-1 that sticks out beyond n
        prev_end = np.where(i > 0, self.run_ends[np.maximum(i - 1, 0)], 0)
        over = np.clip(prev_end - ns, 0, None)
        return full - np.where(i > 0, over, 0)

    def contains(self, n: int) -> bool:
        i = int(np.searchsorted(self.starts, n, side="right")) - 1
        return i >= 0 and n <= int(self.run_ends[i])

    def elements(self) -> np.ndarray:
        if self.cardinality() > _MAX_MATERIALIZE:
            raise InvalidParamsError("set too large to materialize elementwise")
        parts = [np.arange(s, s + l, dtype=np.int64) for s, l in zip(self.starts.tolist(), self.lengths.tolist())]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)

    def bits(self) -> np.ndarray:
        """Explicit membership bit sequence over 1..horizon (uint8)."""
        if self.horizon > _MAX_MATERIALIZE:
            raise InvalidParamsError("horizon too large to materialize bits")
        out = np.zeros(self.horizon, dtype=np.uint8)
        for s, l in zip(self.starts.tolist(), self.lengths.tolist()):
            out[s - 1 : s - 1 + l] = 1
        return out

    def intersect(self, other: "SetPrefix") -> "SetPrefix":
        """Intersection; horizon of the result is the smaller horizon."""
        n = min(self.horizon, other.horizon)
        a_s, a_e = self.starts, self.run_ends
        b_s, b_e = other.starts, other.run_ends
        out_s, out_e = [], []
        i = j = 0
        while i < len(a_s) and j < len(b_s):
            lo = max(a_s[i], b_s[j])
            hi = min(a_e[i], b_e[j])
            if lo <= hi:
                out_s.append(int(lo))
                out_e.append(int(hi))
            if a_e[i] < b_e[j]:
                i += 1
            else:
                j += 1
        starts = np.asarray(out_s, dtype=np.int64)
        lengths = np.asarray(out_e, dtype=np.int64) - starts + 1
        return SetPrefix.from_runs(starts, lengths, n)

    def issubset(self, other: "SetPrefix") -> bool:
        return self.intersect(other).cardinality() == self.cardinality()

    def __eq__(self, other) -> bool:
        if not isinstance(other, SetPrefix):
            return NotImplemented
        return (
            self.horizon == other.horizon
            and np.array_equal(self.starts, other.starts)
            and np.array_equal(self.lengths, other.lengths)
        )


# ---------------------------------------------------------------------------
# Interval generator rules
# ---------------------------------------------------------------------------


class GeneratorRule:
    """Closed-form rule k -> (start_k, length_k), k = 1, 2, ...

    Starts must be increasing.  Subclasses register themselves under
    ``kind`` for config serialization.
    """

    kind: str = ""

    def params(self) -> dict:
        raise NotImplementedError

    def interval(self, k: int) -> tuple[int, int]:
        raise NotImplementedError

    def intervals_upto(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """All (start, length) with start <= n, vectorized where possible."""
        starts, lengths = [], []
        k = 1
        while True:
            s, l = self.interval(k)
            if s > n:
                break
            starts.append(s)
            lengths.append(l)
            k += 1
        return np.asarray(starts, dtype=np.int64), np.asarray(lengths, dtype=np.int64)

    def max_element_in(self, lo: int, hi: int) -> Optional[int]:
        """Largest generated element in [lo, hi]; None when disjoint.

        Generic implementation enumerates intervals; rules with dense starts
        override with a closed form.
        """
        best = None
        k = 1
        while True:
            s, l = self.interval(k)
            if s > hi:
                break
            top = min(s + l - 1, hi)
            if top >= lo:
                best = top if best is None or top > best else best
            k += 1
        return best


class ArithRule(GeneratorRule):
    """k -> (first + (k-1)*step, length): arithmetic progressions of blocks."""

    kind = "arith"

    def __init__(self, first: int, step: int, length: int = 1):
        if first < 1 or step < 1 or length < 1:
            raise InvalidParamsError("arith rule needs first >= 1, step >= 1, length >= 1")
        self.first, self.step, self.length = int(first), int(step), int(length)

    def params(self):
        return {"first": self.first, "step": self.step, "length": self.length}

    def interval(self, k: int):
        return self.first + (k - 1) * self.step, self.length

    def intervals_upto(self, n: int):
        if n < self.first:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        count = (n - self.first) // self.step + 1
        starts = self.first + self.step * np.arange(count, dtype=np.int64)
        return starts, np.full(count, self.length, dtype=np.int64)

    def max_element_in(self, lo, hi):
        if hi < self.first:
            return None
        k = (hi - self.first) // self.step  # 0-based index of last start <= hi
        s = self.first + k * self.step
        top = min(s + self.length - 1, hi)
        # with step >= length the interval tops are increasing; one fallback
        # step is enough when the last block starts above hi - length
        while k >= 0:
            s = self.first + k * self.step
            top = min(s + self.length - 1, hi)
            if top >= lo and top >= s:
                return int(top)
            if s + self.length - 1 < lo:
                return None
            k -= 1
        return None


class Pow2Rule(GeneratorRule):
    """k -> (2^k, length): blocks anchored at powers of two."""

    kind = "pow2"

    def __init__(self, length: int = 1):
        if length < 1:
            raise InvalidParamsError("length must be >= 1")
        self.length = int(length)

    def params(self):
        return {"length": self.length}

    def interval(self, k: int):
        return 1 << k, self.length


class CubesRule(GeneratorRule):
    """k -> (k^3, k): length-k blocks at the cubes."""

    kind = "cubes"

    def params(self):
        return {}

    def interval(self, k: int):
        return k * k * k, k

    def intervals_upto(self, n: int):
        kmax = int(round(n ** (1 / 3))) + 2
        while kmax ** 3 > n:
            kmax -= 1
        ks = np.arange(1, kmax + 1, dtype=np.int64)
        return ks**3, ks


class MidpointsPow2Rule(GeneratorRule):
    """k -> (3*2^(k-1), 1): centers of the intervals [2^k, 2^(k+1)]."""

    kind = "midpoints_pow2"

    def params(self):
        return {}

    def interval(self, k: int):
        return 3 * (1 << (k - 1)), 1


class ShiftUnionRule(GeneratorRule):
    """Blocks of a base rule widened to cover shifts by 0..n-1.

    (s, L) of the base becomes (s, L + n - 1); overlapping blocks are merged
    when materialized to a prefix.
    """

    kind = "shift_union"

    def __init__(self, base: GeneratorRule, n: int):
        if n < 1:
            raise InvalidParamsError("shift count must be >= 1")
        self.base, self.n = base, int(n)

    def params(self):
        return {"base": {"rule": self.base.kind, **self.base.params()}, "n": self.n}

    def interval(self, k: int):
        s, l = self.base.interval(k)
        return s, l + self.n - 1

    def intervals_upto(self, n: int):
        starts, lengths = self.base.intervals_upto(n)
        return starts, lengths + (self.n - 1)


RULE_REGISTRY = {
    cls.kind: cls for cls in (ArithRule, Pow2Rule, CubesRule, MidpointsPow2Rule)
}


def make_rule(kind: str, **params) -> GeneratorRule:
    if kind == ShiftUnionRule.kind:
        base = params["base"]
        inner = make_rule(base["rule"], **{k: v for k, v in base.items() if k != "rule"})
        return ShiftUnionRule(inner, params["n"])
    if kind not in RULE_REGISTRY:
        raise InvalidParamsError(f"unknown generator rule: {kind!r}")
    return RULE_REGISTRY[kind](**params)


# ---------------------------------------------------------------------------
# IntervalFamily
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntervalFamily:
    """A family of integer intervals, explicit or generated by a rule.

    ``normalized`` asserts that intervals (up to any horizon) are pairwise
    disjoint and sorted by start; it is validated on materialization.
    """

    explicit_starts: np.ndarray = field(default_factory=lambda: _frozen(np.zeros(0, dtype=np.int64)))
    explicit_lengths: np.ndarray = field(default_factory=lambda: _frozen(np.zeros(0, dtype=np.int64)))
    rule: Optional[GeneratorRule] = None
    normalized: bool = False

    @classmethod
    def from_intervals(cls, intervals, normalized: bool = False) -> "IntervalFamily":
        ivs = list(intervals)
        starts = np.asarray([s for s, _ in ivs], dtype=np.int64)
        lengths = np.asarray([l for _, l in ivs], dtype=np.int64)
        if np.any(starts < 1) or np.any(lengths < 1):
            raise InvalidParamsError("intervals need start >= 1 and length >= 1")
        fam = cls(_frozen(starts), _frozen(lengths), None, normalized)
        if normalized:
            fam._check_normalized(starts, lengths)
        return fam

    @classmethod
    def from_rule(cls, rule: GeneratorRule, normalized: bool = False) -> "IntervalFamily":
        return cls(rule=rule, normalized=normalized)

    @staticmethod
    def _check_normalized(starts: np.ndarray, lengths: np.ndarray) -> None:
        if starts.size > 1:
            ends = starts + lengths - 1
            if np.any(starts[1:] <= ends[:-1]):
                raise InvalidParamsError("family flagged normalized has overlapping or unsorted intervals")

    @property
    def is_generator_based(self) -> bool:
        return self.rule is not None

    def intervals_upto(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """(starts, lengths) of intervals with start <= n, lengths unclipped."""
        if self.rule is not None:
            starts, lengths = self.rule.intervals_upto(n)
        else:
            keep = self.explicit_starts <= n
            starts, lengths = self.explicit_starts[keep], self.explicit_lengths[keep]
        if self.normalized:
            self._check_normalized(starts, lengths)
        return starts, lengths

    def prefix(self, n: int) -> SetPrefix:
        """The member set clipped to [1, n], as a SetPrefix."""
        starts, lengths = self.intervals_upto(n)
        return SetPrefix.from_runs(starts, lengths, n)

    def elements_upto(self, n: int) -> np.ndarray:
        return self.prefix(n).elements()

    def max_element_in(self, lo: int, hi: int) -> Optional[int]:
        """Largest member in [lo, hi]; None when the window is missed."""
        if self.rule is not None:
            return self.rule.max_element_in(lo, hi)
        starts, ends = self.explicit_starts, self.explicit_starts + self.explicit_lengths - 1
        best = None
        for s, e in zip(starts.tolist(), ends.tolist()):
            if s > hi:
                break
            top = min(e, hi)
            if top >= lo and (best is None or top > best):
                best = top
        return best

    def iter_intervals(self, n: int) -> Iterator[tuple[int, int]]:
        starts, lengths = self.intervals_upto(n)
        for s, l in zip(starts.tolist(), lengths.tolist()):
            yield s, l
