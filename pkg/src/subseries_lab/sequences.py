"""Closed-form increasing integer sequence rules.

These serve as interval-scheme generators (e.g. the k-th cut point of a
partition of the index axis), requested-length schedules, and lacunary set
generators.  A rule is a pure function ``k -> value`` for k = 1, 2, ...
with strictly increasing values.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidParamsError


class SequenceRule:
    kind: str = ""

    def params(self) -> dict:
        raise NotImplementedError

    def value(self, k: int) -> int:
        raise NotImplementedError

    def prefix(self, count: int) -> np.ndarray:
        return np.asarray([self.value(k) for k in range(1, count + 1)], dtype=np.int64)

    def contains(self, v: int, k_cap: int = 1 << 40) -> bool:
        """Membership of v in the value range, by doubling + bisection."""
        if v < self.value(1):
            return False
        lo, hi = 1, 1
        while self.value(hi) < v:
            lo, hi = hi, hi * 2
            if hi > k_cap:
                raise InvalidParamsError("sequence membership search exceeded cap")
        while lo < hi:
            mid = (lo + hi) // 2
            if self.value(mid) < v:
                lo = mid + 1
            else:
                hi = mid
        return self.value(lo) == v


class IdentitySeq(SequenceRule):
    kind = "identity"

    def params(self):
        return {}

    def value(self, k: int) -> int:
        return k

    def prefix(self, count: int) -> np.ndarray:
        return np.arange(1, count + 1, dtype=np.int64)


class LinearSeq(SequenceRule):
    """k -> a*k + b (requires a >= 1 and a + b >= 1)."""

    kind = "linear"

    def __init__(self, a: int, b: int = 0):
        if a < 1 or a + b < 1:
            raise InvalidParamsError("linear sequence needs a >= 1 and value(1) >= 1")
        self.a, self.b = int(a), int(b)

    def params(self):
        return {"a": self.a, "b": self.b}

    def value(self, k: int) -> int:
        return self.a * k + self.b

    def prefix(self, count: int) -> np.ndarray:
        return self.a * np.arange(1, count + 1, dtype=np.int64) + self.b


class Pow2Seq(SequenceRule):
    """k -> 2^(k+shift)."""

    kind = "pow2"

    def __init__(self, shift: int = 0):
        if shift < 0:
            raise InvalidParamsError("shift must be >= 0")
        self.shift = int(shift)

    def params(self):
        return {"shift": self.shift}

    def value(self, k: int) -> int:
        return 1 << (k + self.shift)


class Poly2Seq(SequenceRule):
    """k -> k^2 + shift (gaps 2k+1 grow without bound)."""

    kind = "poly2"

    def __init__(self, shift: int = 0):
        if 1 + shift < 1:
            raise InvalidParamsError("poly2 sequence needs value(1) >= 1")
        self.shift = int(shift)

    def params(self):
        return {"shift": self.shift}

    def value(self, k: int) -> int:
        return k * k + self.shift

    def prefix(self, count: int) -> np.ndarray:
        ks = np.arange(1, count + 1, dtype=np.int64)
        return ks * ks + self.shift


class ExplicitSeq(SequenceRule):
    kind = "explicit"

    def __init__(self, values):
        vals = np.asarray(values, dtype=np.int64)
        if vals.size == 0 or np.any(np.diff(vals) <= 0) or vals[0] < 1:
            raise InvalidParamsError("explicit sequence must be nonempty, positive, strictly increasing")
        self.values = vals

    def params(self):
        return {"values": self.values.tolist()}

    def value(self, k: int) -> int:
        if k > self.values.size:
            raise InvalidParamsError(f"explicit sequence defined only up to k={self.values.size}")
        return int(self.values[k - 1])

    def prefix(self, count: int) -> np.ndarray:
        if count > self.values.size:
            raise InvalidParamsError(f"explicit sequence defined only up to k={self.values.size}")
        return self.values[:count].copy()


class GreedyWeightSeq(SequenceRule):
    """Cut points n_k with unit weight mass in every window [n_k, n_(k+1)).

    n_1 = 1 and n_(k+1) is the least m with sum of w over [n_k, m) >= 1.
    Values are extended lazily and memoized; not config-serializable.
    """

    kind = "greedy_weight"

    def __init__(self, weight_fn, chunk: int = 4096):
        self._weight_fn = weight_fn
        self._chunk = chunk
        self._values = [1]

    def params(self):
        raise InvalidParamsError("greedy weight sequences are not serializable")

    def value(self, k: int) -> int:
        while len(self._values) < k:
            self._extend()
        return self._values[k - 1]

    def _extend(self):
        start = self._values[-1]
        acc = 0.0
        lo = start
        while True:
            ns = np.arange(lo, lo + self._chunk, dtype=np.int64)
            w = self._weight_fn(ns)
            c = np.cumsum(w) + acc
            hit = np.flatnonzero(c >= 1.0)
            if hit.size:
                self._values.append(int(ns[hit[0]]) + 1)
                return
            acc = float(c[-1])
            lo += self._chunk


SEQ_REGISTRY = {cls.kind: cls for cls in (IdentitySeq, LinearSeq, Pow2Seq, Poly2Seq, ExplicitSeq)}


def make_seq_rule(kind: str, **params) -> SequenceRule:
    if kind not in SEQ_REGISTRY:
        raise InvalidParamsError(f"unknown sequence rule: {kind!r}")
    return SEQ_REGISTRY[kind](**params)
