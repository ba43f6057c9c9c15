"""Circle rotations and certified orbit tables."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import circle
from .diophantine import IrrationalSpec, parse_alpha
from .errors import NotErgodic

DEFAULT_WORKING_BITS = 128


@dataclass(frozen=True, eq=False)
class Rotation:
    """tau(x) = {x + alpha} evaluated in fixed point with ``bits`` fractional bits."""

    alpha: IrrationalSpec
    bits: int = DEFAULT_WORKING_BITS
    _A: int = field(init=False, repr=False)
    _err: Fraction = field(init=False, repr=False)

    def __post_init__(self):
        bits = circle.WORD_BITS * circle.words_for(self.bits)
        object.__setattr__(self, "bits", bits)
        A, err = self.alpha.fixed_point(bits)
        object.__setattr__(self, "_A", A)
        object.__setattr__(self, "_err", err)

    @classmethod
    def of(cls, alpha: IrrationalSpec | str, bits: int = DEFAULT_WORKING_BITS) -> "Rotation":
        if isinstance(alpha, str):
            alpha = parse_alpha(alpha)
        return cls(alpha, bits)

    @property
    def W(self) -> int:
        return self.bits // circle.WORD_BITS

    @property
    def alpha_int(self) -> int:
        return self._A

    @property
    def alpha_error(self) -> float:
        """|alpha - A/2**bits|."""
        return float(self._err)

    def position_error(self, k: int) -> float:
        """Bound on |tau^k x (computed) - tau^k x (true)| for an exactly stored x."""
        return abs(k) * float(self._err)

    def require_ergodic(self) -> None:
        if self.alpha.is_exact_rational:
            p, q = self.alpha.params["p"], self.alpha.params["q"]
            raise NotErgodic(
                f"alpha = {p}/{q} is rational: every orbit is finite (period {q}), so the rotation "
                "is not ergodic and T already has a spectral invariant subspace")

    def step_ints(self, ks: Sequence[int]) -> list[int]:
        one = 1 << self.bits
        return [(int(k) * self._A) % one for k in ks]

    def power_int(self, x_int: int, k: int) -> int:
        return (x_int + k * self._A) % (1 << self.bits)

    def to_int(self, x: float) -> int:
        return circle.float_to_int(x % 1.0, self.bits)

    def __call__(self, x: float, k: int = 1) -> float:
        """tau^k(x) for a float x, rounded to double."""
        y = self.power_int(self.to_int(x), k)
        return float(Fraction(y, 1 << self.bits))

    def inverse(self, x: float) -> float:
        return self(x, -1)

    def orbit(self, starts: Sequence[float] | np.ndarray, k_lo: int, k_hi: int) -> "OrbitCache":
        return OrbitCache.build(self, np.atleast_1d(np.asarray(starts, dtype=float)), k_lo, k_hi)


@dataclass(frozen=True, eq=False)
class OrbitCache:
    """tau^k(x_g) for starts x_g and k in [k_lo, k_hi], stored exactly in fixed point.

    ``words`` has shape (W, G, L) with L = k_hi - k_lo + 1; ``max_error`` bounds
    the distance from every stored point to the true orbit point.
    """

    rotation: Rotation
    starts: np.ndarray
    k_lo: int
    k_hi: int
    words: np.ndarray
    max_error: float

    @classmethod
    def build(cls, rotation: Rotation, starts: np.ndarray, k_lo: int, k_hi: int) -> "OrbitCache":
        if k_hi < k_lo:
            raise ValueError("empty k-range")
        return cls._from_words(rotation, circle.from_floats(starts, rotation.W), k_lo, k_hi)

    @classmethod
    def build_fixed(cls, rotation: Rotation, start_ints: Sequence[int], k_lo: int, k_hi: int) -> "OrbitCache":
        """Same as ``build`` for starts given exactly as fixed-point integers."""
        if k_hi < k_lo:
            raise ValueError("empty k-range")
        return cls._from_words(rotation, circle.from_ints(start_ints, rotation.W), k_lo, k_hi)

    @classmethod
    def _from_words(cls, rotation: Rotation, x: np.ndarray, k_lo: int, k_hi: int) -> "OrbitCache":
        steps = circle.from_ints(_arith_progression(rotation, k_lo, k_hi), rotation.W)
        words = circle.add(x[:, :, None], steps[:, None, :])
        words.setflags(write=False)
        starts = circle.to_float(x)
        starts.setflags(write=False)
        err = rotation.position_error(max(abs(k_lo), abs(k_hi)))
        return cls(rotation, starts, k_lo, k_hi, words, err)

    @property
    def ks(self) -> np.ndarray:
        return np.arange(self.k_lo, self.k_hi + 1)

    def index(self, k: int) -> int:
        return k - self.k_lo

    def positions(self) -> np.ndarray:
        """Float positions in [0,1), shape (G, L)."""
        p = circle.to_float(self.words)
        return np.minimum(p, np.nextafter(1.0, 0.0))

    def signed_distances(self, zero: float) -> tuple[np.ndarray, np.ndarray]:
        """|tau^k x - zero| computed exactly then rounded, and the mask tau^k x < zero."""
        if zero >= 1.0:
            # zero at 1: distance 1 - y, never negative; y = 0 sits at distance 1
            d = circle.to_float(circle.neg(self.words))
            d = np.where(d == 0.0, 1.0, d)
            return d, np.ones(d.shape, dtype=bool)
        z = circle.from_floats([zero], self.rotation.W)[:, :, None]
        d, negative = circle.signed_diff(self.words, z)
        return circle.to_float(d), negative


def _arith_progression(rotation: Rotation, k_lo: int, k_hi: int) -> list[int]:
    one = 1 << rotation.bits
    A = rotation.alpha_int
    cur = (k_lo * A) % one
    out = []
    for _ in range(k_hi - k_lo + 1):
        out.append(cur)
        cur += A
        if cur >= one:
            cur -= one
    return out


@dataclass(frozen=True, eq=False)
class ProductRotation:
    """Coordinate-wise rotation of the d-torus."""

    rotations: tuple[Rotation, ...]

    @classmethod
    def of(cls, alphas: Sequence[IrrationalSpec | str], bits: int = DEFAULT_WORKING_BITS):
        return cls(tuple(Rotation.of(a, bits) for a in alphas))

    @property
    def d(self) -> int:
        return len(self.rotations)

    def __call__(self, x: Sequence[float], k: int = 1) -> np.ndarray:
        return np.array([r(xi, k) for r, xi in zip(self.rotations, x)])

    def require_ergodic(self) -> None:
        for r in self.rotations:
            r.require_ergodic()
