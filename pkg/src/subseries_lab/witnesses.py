"""Structural witness constructions for long-interval properties.

Builds families of disjoint intervals of prescribed lengths inside a given
ideal (witnesses of the long-interval property and its fixed-length weak
variant), normalizes raw witnesses into separated interval schedules, and
refutes the long-interval property for unions of gap-divergent sequences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientHorizonError, InvalidParamsError, RejectedInputError
from .ideals import IdealSpec, Smallness, VerdictParams, score_prefix
from .sequences import SequenceRule
from .sets import CubesRule, IntervalFamily, SetPrefix, ShiftUnionRule


def wpli_from_shift_invariance(family: IntervalFamily, n: int) -> IntervalFamily:
    """Widen an infinite family so every block covers shifts by 0..n-1.

    The prefix of the result equals the union of the shifted prefixes
    (E+0) ∪ ... ∪ (E+n-1), clipped to the horizon.
    """
    if n < 1:
        raise InvalidParamsError("shift count n must be >= 1")
    if family.rule is None:
        raise InvalidParamsError("witness family must be generator-based (infinite)")
    if n == 1:
        return family
    return IntervalFamily.from_rule(ShiftUnionRule(family.rule, n))


def pli_witness_for_density() -> IntervalFamily:
    """Length-k blocks at the cubes: vanishing density, unbounded run lengths."""
    return IntervalFamily.from_rule(CubesRule(), normalized=True)


def pli_from_wpli(
    witnesses: list[IntervalFamily],
    horizon: int,
    delta: float = 0.02,
    params: VerdictParams | None = None,
) -> IntervalFamily:
    """Diagonal truncation of fixed-length witnesses into a single small set.

    Witness n keeps only its elements beyond a cutoff a_n chosen so that the
    kept tail contributes density at most 2^-n * delta at every integer
    checkpoint beyond a_n (verified exactly on the element breakpoints).
    Each witness loses only a finite prefix; the merged union is small.
    """
    if not witnesses:
        raise InvalidParamsError("need at least one witness")
    params = params or VerdictParams(density_threshold=delta)
    density = IdealSpec.density()

    kept_starts: list[np.ndarray] = []
    kept_lengths: list[np.ndarray] = []
    cutoffs: list[int] = []
    for idx, fam in enumerate(witnesses, start=1):
        pref = fam.prefix(horizon)
        verdict = score_prefix(density, pref, params)
        if verdict.verdict is not Smallness.SMALL:
            raise RejectedInputError(f"witness {idx} is not density-small at horizon {horizon}")
        elems = pref.elements().astype(np.float64)
        budget = (2.0**-idx) * delta
        # need count(m) - count(a) <= budget*m for all m > a; the binding
        # checkpoints are the elements themselves
        counts = np.arange(1, elems.size + 1, dtype=np.float64)
        f = counts - budget * elems
        cut_count = 0  # number of leading elements dropped
        if elems.size:
            suffix_max = np.maximum.accumulate(f[::-1])[::-1]
            cut_count = elems.size
            for j in range(elems.size + 1):
                tail_max = suffix_max[j] if j < elems.size else -np.inf
                if j >= tail_max:
                    cut_count = j
                    break
        a_n = 0 if cut_count == 0 else int(elems[cut_count - 1])
        cutoffs.append(a_n)
        starts, lengths = fam.intervals_upto(horizon)
        ends = np.minimum(starts + lengths - 1, horizon)
        lo = np.maximum(starts, a_n + 1)
        keep = lo <= ends
        kept_starts.append(lo[keep])
        kept_lengths.append((ends - lo + 1)[keep])

    merged = SetPrefix.from_runs(
        np.concatenate(kept_starts), np.concatenate(kept_lengths), horizon
    )
    out = IntervalFamily.from_intervals(
        list(zip(merged.starts.tolist(), merged.lengths.tolist())), normalized=True
    )
    object.__setattr__(out, "cutoffs", tuple(cutoffs))
    return out


def ffact_normalize(
    requested_lengths: SequenceRule,
    raw_witness: IntervalFamily,
    count: int,
    search_horizon: int,
) -> IntervalFamily:
    """Select disjoint separated intervals of prescribed lengths inside runs.

    Returns intervals (m_k, n_k), k = 1..count, with m_k + n_k - 1 < m_(k+1),
    each contained in a maximal run of the raw witness.  Raises
    InsufficientHorizonError (carrying the failing k) when no run of length
    n_k remains below the search horizon.
    """
    if count < 1:
        raise InvalidParamsError("count must be >= 1")
    runs = raw_witness.prefix(search_horizon)
    r_starts, r_ends = runs.starts.tolist(), runs.run_ends.tolist()
    picked: list[tuple[int, int]] = []
    prev_end = 0
    ri = 0
    for k in range(1, count + 1):
        need = requested_lengths.value(k)
        placed = False
        while ri < len(r_starts):
            lo = max(r_starts[ri], prev_end + 1)
            if r_ends[ri] - lo + 1 >= need:
                picked.append((lo, need))
                prev_end = lo + need - 1
                placed = True
                break
            ri += 1
        if not placed:
            raise InsufficientHorizonError(
                f"no run of length {need} for k={k} below horizon {search_horizon}", context=k
            )
    return IntervalFamily.from_intervals(picked, normalized=True)


@dataclass(frozen=True)
class RefutationCertificate:
    """A window of k+1 consecutive integers meeting k gap-divergent sequences
    in at most k points, hence not covered by their union."""

    k: int
    n0: int
    a: int
    window: tuple[int, ...]
    intersection: tuple[int, ...]

    def missing(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.window) - set(self.intersection)))


def _gap_stabilization_index(gen: SequenceRule, k: int, horizon: int) -> int:
    """Smallest n0 with every observed gap beyond n0 exceeding k."""
    vals = []
    i = 1
    while True:
        v = gen.value(i)
        if v > horizon:
            break
        vals.append(v)
        i += 1
    if len(vals) < 2:
        raise InsufficientHorizonError("generator has fewer than two values within horizon")
    gaps = np.diff(np.asarray(vals, dtype=np.int64))
    bad = np.flatnonzero(gaps <= k)
    if bad.size == 0:
        return 1
    n0 = int(bad[-1]) + 2  # gaps[i] = b_(i+2) - b_(i+1) in 1-based terms
    if n0 >= len(vals):
        raise InsufficientHorizonError(f"gaps never exceed {k} within horizon {horizon}")
    return n0


def lacunary_refute_pli(generators: list[SequenceRule], horizon: int) -> RefutationCertificate:
    """Certify that the union of k gap-divergent sequences contains no run
    of k+1 consecutive integers beyond the gap stabilization point."""
    k = len(generators)
    if k < 1:
        raise InvalidParamsError("need at least one generator")
    n0 = max(_gap_stabilization_index(g, k, horizon) for g in generators)
    a = max(g.value(n0) for g in generators) + 1
    if a + k > horizon:
        raise InsufficientHorizonError(f"window {a}..{a + k} exceeds horizon {horizon}")
    window = tuple(range(a, a + k + 1))
    hit = sorted({v for v in window if any(g.contains(v) for g in generators)})
    cert = RefutationCertificate(k, n0, a, window, tuple(hit))
    if len(cert.intersection) > k:
        raise InsufficientHorizonError("window meets the union in more than k points; gaps not yet stable")
    return cert


def verify_refutation(cert: RefutationCertificate, generators: list[SequenceRule]) -> bool:
    """Recompute the window intersection exactly and re-check the certificate."""
    if len(generators) != cert.k or len(cert.window) != cert.k + 1:
        return False
    if cert.window[0] != cert.a or any(b - a != 1 for a, b in zip(cert.window, cert.window[1:])):
        return False
    if cert.a <= max(g.value(cert.n0) for g in generators):
        return False
    hit = tuple(sorted({v for v in cert.window if any(g.contains(v) for g in generators)}))
    return hit == cert.intersection and len(hit) <= cert.k
