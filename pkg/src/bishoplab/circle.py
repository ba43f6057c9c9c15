"""Exact fixed-point arithmetic on the circle R/Z.

A point is stored as an integer ``u`` in ``[0, 2**(64*W))`` standing for
``u / 2**(64*W)``. Vectorised values are uint64 arrays of shape ``(W, ...)``
with the most significant word first; addition wraps modulo one, which is
exactly the rotation ``x -> {x + alpha}``.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Iterable

import numpy as np

WORD_BITS = 64
_MASK = (1 << WORD_BITS) - 1
_TWO_M64 = 2.0**-64


def words_for(bits: int) -> int:
    return max(1, -(-int(bits) // WORD_BITS))


def nearest_int_distance(t: float) -> float:
    """Distance from ``t`` to the nearest integer, in [0, 1/2]."""
    if not math.isfinite(t):
        raise ValueError("t must be finite")
    r = t - math.floor(t)
    return min(r, 1.0 - r)


def nearest_int_distance_exact(t: Fraction | int) -> Fraction:
    t = Fraction(t)
    r = t - math.floor(t)
    return min(r, 1 - r)


def from_ints(values: Iterable[int], W: int) -> np.ndarray:
    vals = [int(v) for v in values]
    out = np.empty((W, len(vals)), dtype=np.uint64)
    for i in range(W):
        shift = WORD_BITS * (W - 1 - i)
        out[i] = np.array([(v >> shift) & _MASK for v in vals], dtype=np.uint64)
    return out


def to_ints(words: np.ndarray) -> list[int]:
    W = words.shape[0]
    flat = words.reshape(W, -1)
    res = [0] * flat.shape[1]
    for i in range(W):
        col = flat[i].tolist()
        res = [(r << WORD_BITS) | int(c) for r, c in zip(res, col)]
    return res


def float_to_int(x: float, bits: int) -> int:
    """``floor(x * 2**bits)`` for x in [0, 1); exact for every double."""
    if not 0.0 <= x < 1.0:
        raise ValueError(f"point {x!r} not in [0,1)")
    m, e = math.frexp(x)
    # x = m * 2**e with 53-bit m; shift the integer mantissa instead of scaling floats
    mant = int(math.ldexp(m, 53))
    shift = e - 53 + bits
    return mant << shift if shift >= 0 else mant >> -shift


def from_floats(xs: Iterable[float], W: int) -> np.ndarray:
    return from_ints((float_to_int(float(x), WORD_BITS * W) for x in xs), W)


def add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(a + b) mod 1, broadcasting over trailing axes."""
    a, b = np.broadcast_arrays(a, b)
    out = np.empty(a.shape, dtype=np.uint64)
    carry = np.zeros(a.shape[1:], dtype=np.uint64)
    for i in range(a.shape[0] - 1, -1, -1):
        s = a[i] + b[i]
        c1 = s < a[i]
        s2 = s + carry
        c2 = s2 < s
        out[i] = s2
        carry = (c1 | c2).astype(np.uint64)
    return out


def sub(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(a - b) mod 1 together with the borrow flag (True where a < b)."""
    a, b = np.broadcast_arrays(a, b)
    out = np.empty(a.shape, dtype=np.uint64)
    borrow = np.zeros(a.shape[1:], dtype=np.uint64)
    for i in range(a.shape[0] - 1, -1, -1):
        d = a[i] - b[i]
        b1 = a[i] < b[i]
        d2 = d - borrow
        b2 = d < borrow
        out[i] = d2
        borrow = (b1 | b2).astype(np.uint64)
    return out, borrow.astype(bool)


def neg(a: np.ndarray) -> np.ndarray:
    return sub(np.zeros_like(a), a)[0]


def signed_diff(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """|a - b| as plain reals in [0,1) (no wrap-around) and the mask a < b."""
    d, negative = sub(a, b)
    if negative.any():
        d = np.where(negative[None], neg(d), d)
    return d, negative


def to_float(words: np.ndarray) -> np.ndarray:
    acc = np.zeros(words.shape[1:], dtype=np.float64)
    for i in range(words.shape[0] - 1, -1, -1):
        acc = (acc + words[i].astype(np.float64)) * _TWO_M64
    return acc
