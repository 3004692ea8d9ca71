"""Counter-based fair-bit sampling for selector coordinates.

Every coordinate value is a pure function of ``(seed, trial, coordinate)``,
so any coordinate of any trial can be computed without streaming through the
ones before it.  Coordinates are 1-based to match the index convention of the
rest of the library.  Internally, 64 consecutive coordinates share one hashed
64-bit word (SplitMix64-style finalizer), which keeps bulk sampling cheap for
both contiguous ranges and scattered blocks at huge indices.
"""

from __future__ import annotations

import sys

import numpy as np

_PHI = np.uint64(0x9E3779B97F4A7C15)
_SALT = np.uint64(0xD1B54A32D192ED03)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)

_LITTLE_ENDIAN = sys.byteorder == "little"


def _mix64(z: np.ndarray) -> np.ndarray:
    """SplitMix64 finalizer (avalanching bijection on uint64)."""
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _stream_key(seed: int, trial: int) -> np.uint64:
    key = _mix64(np.uint64(seed) * _PHI + _SALT)
    return _mix64(key + np.uint64(trial) * _PHI)


def _words(seed: int, trial: int, word_index: np.ndarray) -> np.ndarray:
    """Hashed 64-bit word holding coordinates [64*w+1, 64*w+64]."""
    key = _stream_key(seed, trial)
    return _mix64(key + (word_index.astype(np.uint64) + np.uint64(1)) * _PHI)


def selector_bits(seed: int, trial: int, start: int, count: int) -> np.ndarray:
    """Fair bits for the contiguous coordinates start..start+count-1 (1-based).

    Returns a uint8 array of length ``count``.
    """
    if start < 1 or count < 0:
        raise ValueError("start must be >= 1 and count >= 0")
    if count == 0:
        return np.zeros(0, dtype=np.uint8)
    c_lo = start - 1
    c_hi = start - 1 + count - 1
    w_lo = c_lo >> 6
    w_hi = c_hi >> 6
    words = _words(seed, trial, np.arange(w_lo, w_hi + 1, dtype=np.uint64))
    if _LITTLE_ENDIAN:
        flat = np.unpackbits(words.view(np.uint8), bitorder="little")
        off = c_lo - (w_lo << 6)
        return flat[off : off + count]
    coords = np.arange(c_lo, c_hi + 1, dtype=np.uint64)
    rel = (coords >> np.uint64(6)) - np.uint64(w_lo)
    return ((words[rel.astype(np.int64)] >> (coords & np.uint64(63))) & np.uint64(1)).astype(np.uint8)


def selector_bits_at(seed: int, trial: int, coords: np.ndarray) -> np.ndarray:
    """Fair bits at arbitrary 1-based coordinates (uint8 array)."""
    c0 = np.asarray(coords, dtype=np.uint64) - np.uint64(1)
    words = _words(seed, trial, c0 >> np.uint64(6))
    return ((words >> (c0 & np.uint64(63))) & np.uint64(1)).astype(np.uint8)


def selector_signs(seed: int, trial: int, start: int, count: int) -> np.ndarray:
    """Fair signs in {-1,+1} for contiguous coordinates (int8 array)."""
    bits = selector_bits(seed, trial, start, count)
    return (2 * bits.astype(np.int8) - 1).astype(np.int8)
