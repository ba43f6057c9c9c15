"""Generalized-polynomial weights v(x) = C prod (sigma_i(x - x_i))^{s_i} and their spectral radius."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .errors import DomainError, OrbitHitsZero
from .orbit import OrbitCache, Rotation

SIGNED, ABSOLUTE = "signed", "absolute"


def entropy_term(x: float) -> float:
    """X + X' = 1 - x ln x - (1-x) ln(1-x), with 0 ln 0 = 0; lies in [1, 1 + ln 2]."""
    def xlogx(u):
        return 0.0 if u <= 0.0 else u * math.log(u)
    return 1.0 - xlogx(x) - xlogx(1.0 - x)


@dataclass(frozen=True)
class Factor:
    zero: float
    power: float
    mode: str = ABSOLUTE

    def __post_init__(self):
        if not 0.0 <= self.zero <= 1.0:
            raise ValueError("zero must lie in [0,1]")
        if not self.power > 0:
            raise ValueError("power must be positive")
        if self.mode not in (SIGNED, ABSOLUTE):
            raise ValueError(f"unknown mode {self.mode!r}")

    @property
    def integer_power(self) -> bool:
        return float(self.power).is_integer()

    @property
    def X(self) -> tuple[float, float]:
        x = self.zero
        xi = 0.0 if x == 0.0 else x - x * math.log(x)
        xp = 0.0 if x == 1.0 else (1 - x) - (1 - x) * math.log(1 - x)
        if x in (0.0, 1.0):  # X + X' = 1 at the endpoints
            xi, xp = (0.0, 1.0) if x == 0.0 else (1.0, 0.0)
        return xi, xp

    def sign_of(self, negative: np.ndarray) -> np.ndarray:
        """Sign of the factor given the mask x < zero (raises for illegal evaluations)."""
        if self.mode == ABSOLUTE or not negative.any():
            return np.ones(negative.shape, dtype=np.int8)
        if not self.integer_power:
            raise DomainError(f"signed factor (x-{self.zero})^{self.power} evaluated at x < {self.zero}")
        if int(self.power) % 2 == 0:
            return np.ones(negative.shape, dtype=np.int8)
        return np.where(negative, -1, 1).astype(np.int8)

    def __str__(self):
        core = "x" if self.zero == 0.0 else f"x-{self.zero:g}"
        core = f"|{core}|" if self.mode == ABSOLUTE else (core if self.zero == 0.0 else f"({core})")
        return core if self.power == 1 else f"{core}^{self.power:g}"


@dataclass(frozen=True)
class WeightP:
    """One-dimensional weight in the generalized-polynomial class."""

    C: float
    factors: tuple[Factor, ...]

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not self.factors:
            raise ValueError("at least one factor is required")
        object.__setattr__(self, "factors", tuple(self.factors))

    d = 1

    @property
    def S(self) -> float:
        """Sum of the powers s_i (the exponent that aggregates the growth bounds)."""
        return float(sum(f.power for f in self.factors))

    @property
    def zeros(self) -> list[float]:
        return [f.zero for f in self.factors]

    def __call__(self, x):
        return eval_weight(self, x)

    def scaled(self, c: float) -> "WeightP":
        return WeightP(self.C * c, self.factors)

    def log_abs_and_sign(self, x) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=float)
        logabs = np.full(x.shape, math.log(self.C))
        sign = np.ones(x.shape, dtype=np.int8)
        for f in self.factors:
            diff = x - f.zero
            with np.errstate(divide="ignore"):
                logabs = logabs + f.power * np.log(np.abs(diff))
            sign = sign * f.sign_of(diff < 0)
        return logabs, sign

    def log_abs_on_orbit(self, oc: OrbitCache) -> tuple[np.ndarray, np.ndarray]:
        """ln|v| and sign of v at every cached orbit point, from exact distances."""
        shape = oc.words.shape[1:]
        logabs = np.full(shape, math.log(self.C))
        sign = np.ones(shape, dtype=np.int8)
        for f in self.factors:
            dist, negative = oc.signed_distances(f.zero)
            with np.errstate(divide="ignore"):
                logabs += f.power * np.log(dist)
            if f.zero >= 1.0:
                negative = np.ones(shape, dtype=bool)
            sign *= f.sign_of(negative & (dist > 0))
        return logabs, sign

    def to_dict(self) -> dict:
        return {"C": self.C, "factors": [[f.zero, f.power, f.mode] for f in self.factors]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d) -> "WeightP":
        return cls(float(d["C"]), tuple(Factor(float(z), float(s), m) for z, s, m in d["factors"]))

    @classmethod
    def from_json(cls, s: str) -> "WeightP":
        return cls.from_dict(json.loads(s))

    @classmethod
    def parse(cls, descriptor: str) -> "WeightP":
        return parse_weight(descriptor)

    def __str__(self):
        body = "*".join(str(f) for f in self.factors)
        return body if self.C == 1 else f"{self.C:.17g}*{body}"


def eval_weight(v: WeightP, x):
    """v(x); exactly zero at the zeros, DomainError for illegal signed evaluations."""
    xa = np.asarray(x, dtype=float)
    out = np.full(xa.shape, v.C)
    for f in v.factors:
        diff = xa - f.zero
        if f.mode == ABSOLUTE:
            out = out * np.abs(diff) ** f.power
        else:
            if not f.integer_power and np.any(diff < 0):
                raise DomainError(f"signed factor (x-{f.zero})^{f.power} evaluated at x < {f.zero}")
            out = out * (diff ** int(f.power) if f.integer_power else diff**f.power)
    return float(out) if out.ndim == 0 else out


_NUM = r"[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?"
_FACTOR = re.compile(
    rf"^(?:(?P<abs>\|x(?:-(?P<za>{_NUM}))?\|)|(?P<par>\(x(?:-(?P<zp>{_NUM}))?\))|(?P<bare>x))"
    rf"(?:\^(?P<pow>{_NUM}))?$")


def parse_weight(descriptor: str) -> WeightP:
    """Parse e.g. ``x``, ``2*x``, ``|x-0.5|^0.5``, ``(x-0.5)^3``, ``e*x*|x-1|``.

    Bare ``x`` and ``(x-a)`` are signed factors; ``|x-a|`` is absolute.
    """
    C = 1.0
    factors = []
    for tok in descriptor.replace(" ", "").split("*"):
        if not tok:
            raise ValueError(f"malformed weight {descriptor!r}")
        if tok == "e":
            C *= math.e
            continue
        if re.fullmatch(_NUM, tok):
            C *= float(tok)
            continue
        m = _FACTOR.match(tok)
        if not m:
            raise ValueError(f"cannot parse factor {tok!r} in {descriptor!r}")
        power = float(m.group("pow")) if m.group("pow") else 1.0
        if m.group("abs"):
            factors.append(Factor(float(m.group("za") or 0.0), power, ABSOLUTE))
        else:
            factors.append(Factor(float(m.group("zp") or 0.0), power, SIGNED))
    return WeightP(C, tuple(factors))


@dataclass(frozen=True)
class ProductWeight:
    """v(x) = prod_i v_i(x_i) on the d-torus."""

    components: tuple[WeightP, ...]

    @property
    def d(self) -> int:
        return len(self.components)

    def __call__(self, x: Sequence[float]) -> float:
        return float(np.prod([v(xi) for v, xi in zip(self.components, x)]))

    @classmethod
    def parse(cls, descriptor: str) -> "ProductWeight":
        return cls(tuple(parse_weight(p) for p in descriptor.split(";")))


@dataclass(frozen=True)
class SpectralData:
    X: tuple[tuple[float, float], ...]
    r: float
    normalized_C: float

    def to_dict(self) -> dict:
        return {"X": [list(p) for p in self.X], "r": self.r, "normalized_C": self.normalized_C}


def spectral_radius(v: WeightP | ProductWeight) -> SpectralData:
    """r = C exp(-sum s_i (X_i + X_i')); products multiply coordinate radii."""
    if isinstance(v, ProductWeight):
        parts = [spectral_radius(c) for c in v.components]
        return SpectralData(tuple(x for p in parts for x in p.X), math.prod(p.r for p in parts),
                            math.prod(p.normalized_C for p in parts))
    X = tuple(f.X for f in v.factors)
    log_r = math.log(v.C) - sum(f.power * entropy_term(f.zero) for f in v.factors)
    r = math.exp(log_r)
    return SpectralData(X, r, v.C / r)


def normalize(v: WeightP | ProductWeight):
    """Rescale C so the spectral radius is exactly one."""
    if isinstance(v, ProductWeight):
        return ProductWeight(tuple(normalize(c) for c in v.components))
    log_c = sum(f.power * entropy_term(f.zero) for f in v.factors)
    return WeightP(math.exp(log_c), v.factors)


def spectral_radius_quadrature(v: WeightP, tol: float = 1e-10) -> float:
    """C exp(int_0^1 ln|v/C|) by adaptive quadrature.

    [0,1] is split at every zero so each log singularity sits at an endpoint,
    where the extrapolating integrator converges.
    """
    def integrand(x):
        return sum(f.power * math.log(abs(x - f.zero)) for f in v.factors if x != f.zero)

    cuts = sorted({0.0, 1.0, *v.zeros})
    total = 0.0
    for a, b in zip(cuts, cuts[1:]):
        val, _ = integrate.quad(integrand, a, b, epsabs=tol, epsrel=tol, limit=500)
        total += val
    return v.C * math.exp(total)


def birkhoff_radius_estimate(v: WeightP, rotation: Rotation, N: int, x0: float) -> float:
    """C exp((1/N) sum_{k<N} ln prod |tau^k x0 - x_i|^{s_i})."""
    oc = rotation.orbit([x0], 0, N - 1)
    logabs, _ = _abs_only(v).log_abs_on_orbit(oc)
    if np.isneginf(logabs).any():
        k = int(np.argmax(np.isneginf(logabs[0])))
        raise OrbitHitsZero(f"tau^{k}(x0) is a zero of v")
    return float(np.exp(logabs.mean()))


def _abs_only(v: WeightP) -> WeightP:
    return WeightP(v.C, tuple(Factor(f.zero, f.power, ABSOLUTE) for f in v.factors))
