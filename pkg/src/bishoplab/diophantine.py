"""Rotation angles in exact arithmetic, continued fractions and Diophantine type.

Every angle is a certified interval ``[lo, hi]`` of rationals containing alpha;
orbit code asks for an integer fixed-point approximation with an explicit error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping, Sequence

from .circle import nearest_int_distance, nearest_int_distance_exact  # noqa: F401  (re-export)
from .errors import InsufficientPrecision, ThresholdOverflow

KINDS = ("quadratic-surd", "liouville", "rational")
DEFAULT_BITS = 128
DEFAULT_EXPONENT_BUDGET = 10**6


def _is_square(n: int) -> bool:
    return n >= 0 and math.isqrt(n) ** 2 == n


def _factorials(count: int) -> list[int]:
    return [math.factorial(n) for n in range(1, count + 1)]


def _log2_fraction(x: Fraction) -> float:
    return math.log2(x.numerator) - math.log2(x.denominator)


@dataclass(frozen=True, eq=False)
class IrrationalSpec:
    """An angle in (0,1) known to ``precision_bits`` bits.

    kind ``quadratic-surd``: params a, b, d, c with alpha = (a + b*sqrt(d))/c.
    kind ``liouville``: params base, n_max, epsilon, exponents (u_1..u_{n_max+1});
    alpha is the series sum_n base**(-u_n) truncated after n_max terms.
    kind ``rational``: params p, q, error; alpha lies within ``error`` of p/q.
    """

    kind: str
    params: Mapping[str, Any]
    precision_bits: int = DEFAULT_BITS
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.precision_bits < 1:
            raise ValueError("precision_bits must be positive")
        getattr(self, "_validate_" + self.kind.replace("-", "_"))()
        lo, hi = self.interval()
        if not (0 < lo and hi < 1):
            raise ValueError("alpha must lie in (0,1)")

    # -- constructors -------------------------------------------------------
    @classmethod
    def surd(cls, a: int, b: int, d: int, c: int, precision_bits: int = DEFAULT_BITS):
        return cls("quadratic-surd", {"a": a, "b": b, "d": d, "c": c}, precision_bits)

    @classmethod
    def golden(cls, precision_bits: int = DEFAULT_BITS):
        """(sqrt 5 - 1)/2."""
        return cls.surd(-1, 1, 5, 2, precision_bits)

    @classmethod
    def rational(cls, p: int, q: int, error: Fraction | float | int = 0,
                 precision_bits: int | None = None):
        error = Fraction(error)
        if precision_bits is None:
            precision_bits = DEFAULT_BITS if error == 0 else max(1, math.floor(-_log2_fraction(error)))
        return cls("rational", {"p": int(p), "q": int(q), "error": error}, precision_bits)

    @classmethod
    def liouville(cls, base: int = 10, n_max: int | None = None, epsilon: float = 1.0,
                  exponents: Sequence[int] | None = None,
                  precision_bits: int | None = None):
        """Truncated Liouville series; exponents default to u_n = n!.

        With ``n_max`` omitted, the smallest depth whose tail is below
        ``2**-precision_bits`` is used. With ``precision_bits`` omitted, the
        certified precision of the chosen depth is used.
        """
        if n_max is None:
            bits = DEFAULT_BITS if precision_bits is None else precision_bits
            n_max = 1
            while True:
                ex = list(exponents[: n_max + 1]) if exponents is not None else _factorials(n_max + 1)
                if len(ex) < n_max + 1:
                    raise InsufficientPrecision("exponent sequence too short for requested precision")
                if _liouville_tail_bits(base, ex[n_max]) >= bits:
                    break
                n_max += 1
        ex = list(exponents[: n_max + 1]) if exponents is not None else _factorials(n_max + 1)
        certified = _liouville_tail_bits(base, ex[n_max]) if len(ex) > n_max else 0
        if precision_bits is None:
            precision_bits = max(1, certified)
        params = {"base": int(base), "n_max": int(n_max), "epsilon": float(epsilon),
                  "exponents": [int(u) for u in ex]}
        return cls("liouville", params, precision_bits)

    # -- validation ---------------------------------------------------------
    def _validate_quadratic_surd(self):
        a, b, d, c = (int(self.params[k]) for k in "abdc")
        if d <= 0 or _is_square(d):
            raise ValueError("d must be a positive non-square")
        if b == 0 or c == 0:
            raise ValueError("b and c must be nonzero")
        del a

    def _validate_liouville(self):
        base, n_max = self.params["base"], self.params["n_max"]
        ex = self.params["exponents"]
        if base < 2 or n_max < 1:
            raise ValueError("need base >= 2 and n_max >= 1")
        if len(ex) != n_max + 1:
            raise ValueError("exponents must list u_1..u_{n_max+1}")
        if any(u <= 0 for u in ex) or any(x >= y for x, y in zip(ex, ex[1:])):
            raise ValueError("exponents must be positive and strictly increasing")
        if self.precision_bits > _liouville_tail_bits(base, ex[-1]):
            raise InsufficientPrecision(
                f"truncation after {n_max} terms certifies only "
                f"{_liouville_tail_bits(base, ex[-1])} bits")

    def _validate_rational(self):
        p, q, err = self.params["p"], self.params["q"], Fraction(self.params["error"])
        if not 0 < p < q or math.gcd(p, q) != 1:
            raise ValueError("need 0 < p < q with gcd(p, q) = 1")
        if err < 0:
            raise ValueError("error bound must be non-negative")
        if err > 0 and self.precision_bits > -_log2_fraction(err):
            raise InsufficientPrecision("error bound is coarser than precision_bits")

    # -- values -------------------------------------------------------------
    def interval(self, bits: int | None = None) -> tuple[Fraction, Fraction]:
        """Rationals lo <= alpha <= hi, of width at most ``2**-bits`` when attainable."""
        bits = self.precision_bits if bits is None else bits
        key = ("interval", bits)
        if key not in self._cache:
            self._cache[key] = getattr(self, "_interval_" + self.kind.replace("-", "_"))(bits)
        return self._cache[key]

    def _interval_quadratic_surd(self, bits):
        a, b, d, c = (int(self.params[k]) for k in "abdc")
        k = bits + abs(b).bit_length() + 2
        s = math.isqrt(d << (2 * k))
        lo = Fraction(a * (1 << k) + b * s, c << k)
        hi = Fraction(a * (1 << k) + b * (s + 1), c << k)
        return (lo, hi) if lo <= hi else (hi, lo)

    def _interval_liouville(self, bits):
        base, n_max, ex = self.params["base"], self.params["n_max"], self.params["exponents"]
        top = ex[n_max - 1]
        total = sum(base ** (top - u) for u in ex[:n_max])
        lo = Fraction(total, base**top)
        return lo, lo + self.liouville_tail()

    def _interval_rational(self, bits):
        centre = Fraction(self.params["p"], self.params["q"])
        err = Fraction(self.params["error"])
        return centre - err, centre + err

    def liouville_tail(self) -> Fraction:
        """beta * base**(-u_{n_max+1}) with beta = base/(base-1)."""
        base = self.params["base"]
        return Fraction(base, base - 1) / Fraction(base) ** self.params["exponents"][-1]

    @property
    def error(self) -> Fraction:
        lo, hi = self.interval()
        return hi - lo

    @property
    def truncation(self) -> Fraction:
        """Lower end of the certified interval (the truncated series for Liouville angles)."""
        return self.interval()[0]

    @property
    def value(self) -> float:
        lo, hi = self.interval()
        return float((lo + hi) / 2)

    @property
    def is_exact_rational(self) -> bool:
        return self.kind == "rational" and Fraction(self.params["error"]) == 0

    def fixed_point(self, bits: int) -> tuple[int, Fraction]:
        """Integer A with |alpha - A/2**bits| <= err, returned as (A, err)."""
        key = ("fixed", bits)
        if key not in self._cache:
            lo, hi = self.interval(bits)
            mid = (lo + hi) / 2
            A = math.floor(mid * (1 << bits))
            err = (hi - lo) / 2 + Fraction(1, 1 << bits)
            if self.is_exact_rational:
                err = abs(Fraction(A, 1 << bits) - mid)
            self._cache[key] = (A, err)
        return self._cache[key]

    # -- serialization ------------------------------------------------------
    def to_dict(self) -> dict:
        params = dict(self.params)
        if "error" in params:
            params["error"] = str(Fraction(params["error"]))
        return {"kind": self.kind, "params": params, "precision_bits": self.precision_bits}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "IrrationalSpec":
        params = dict(d["params"])
        if "error" in params:
            params["error"] = Fraction(params["error"])
        return cls(d["kind"], params, int(d["precision_bits"]))

    @classmethod
    def from_json(cls, s: str) -> "IrrationalSpec":
        return cls.from_dict(json.loads(s))

    def __eq__(self, other):
        return isinstance(other, IrrationalSpec) and self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(json.dumps(self.to_dict(), sort_keys=True))


def _liouville_tail_bits(base: int, next_exponent: int) -> int:
    """Largest B with base/(base-1) * base**(-u) <= 2**-B."""
    bound = Fraction(base, base - 1) / Fraction(base) ** next_exponent
    bits = math.floor(-_log2_fraction(bound))
    while Fraction(1, 1 << max(bits, 0)) < bound:
        bits -= 1
    return max(bits, 0)


def parse_alpha(descriptor: str, precision_bits: int = DEFAULT_BITS) -> IrrationalSpec:
    """Parse a short descriptor.

    ``golden``, ``sqrt2`` (sqrt 2 - 1), ``surd:a,b,d,c``, ``p/q`` (exact rational),
    ``liouville`` or ``liouville:base=10,n_max=5,epsilon=1``, or a JSON object.
    """
    s = descriptor.strip()
    if s.startswith("{"):
        return IrrationalSpec.from_json(s)
    if s == "golden":
        return IrrationalSpec.golden(precision_bits)
    if s == "sqrt2":
        return IrrationalSpec.surd(-1, 1, 2, 1, precision_bits)
    if s.startswith("surd:"):
        a, b, d, c = (int(v) for v in s[5:].split(","))
        return IrrationalSpec.surd(a, b, d, c, precision_bits)
    if s.startswith("liouville"):
        kw: dict[str, Any] = {}
        if ":" in s:
            for item in s.split(":", 1)[1].split(","):
                k, v = item.split("=")
                kw[k.strip()] = float(v) if k.strip() == "epsilon" else int(v)
        return IrrationalSpec.liouville(**kw)
    if "/" in s:
        p, q = (int(v) for v in s.split("/"))
        g = math.gcd(p, q)
        return IrrationalSpec.rational(p // g, q // g)
    raise ValueError(f"cannot parse angle descriptor {descriptor!r}")


# -- continued fractions -------------------------------------------------------

@dataclass(frozen=True)
class ContinuedFraction:
    quotients: tuple[int, ...]          # a_1 .. a_depth (a_0 = 0 for alpha in (0,1))
    convergents: tuple[tuple[int, int], ...]  # (p_k, q_k), k = 1..depth


def continued_fraction(alpha: IrrationalSpec, depth: int) -> ContinuedFraction:
    """Partial quotients certified by running Euclid on both interval endpoints."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    lo, hi = alpha.interval()
    quotients: list[int] = []
    x_lo, x_hi = lo, hi
    for i in range(1, depth + 1):
        f_lo = x_lo - math.floor(x_lo)
        f_hi = x_hi - math.floor(x_hi)
        if f_lo == 0:
            raise InsufficientPrecision(f"expansion terminates before a_{i}", index=i)
        x_lo, x_hi = 1 / f_hi, 1 / f_lo
        a_lo, a_hi = math.floor(x_lo), math.floor(x_hi)
        if a_lo != a_hi:
            raise InsufficientPrecision(f"cannot certify partial quotient a_{i}", index=i)
        quotients.append(a_lo)
    return ContinuedFraction(tuple(quotients), tuple(convergents_from_quotients(quotients)))


def convergents_from_quotients(quotients: Sequence[int]) -> list[tuple[int, int]]:
    p_prev, q_prev, p, q = 1, 0, 0, 1  # a_0 = 0
    out = []
    for a in quotients:
        p_prev, q_prev, p, q = p, q, a * p + p_prev, a * q + q_prev
        out.append((p, q))
    return out


# -- Diophantine type ------------------------------------------------------------

@dataclass(frozen=True)
class Psi:
    """Growth function psi for the type condition q<q alpha> >= 1/psi(q)."""

    family: str  # constant | power | stretched-exp
    param: float

    def __post_init__(self):
        if self.family not in ("constant", "power", "stretched-exp"):
            raise ValueError(f"unknown psi family {self.family!r}")
        if self.param <= 0:
            raise ValueError("psi parameter must be positive")

    def log(self, q: int) -> float:
        if self.family == "constant":
            return math.log(self.param)
        if self.family == "power":
            return self.param * math.log(q)
        return q ** (1.0 / (3.0 + self.param))

    def __call__(self, q: int) -> float:
        return math.exp(self.log(q))

    @classmethod
    def parse(cls, s: str) -> "Psi":
        family, _, param = s.partition(":")
        return cls(family, float(param))

    def __str__(self):
        return f"{self.family}:{self.param:g}"


@dataclass(frozen=True)
class TypeCertificate:
    psi: Psi
    checked_up_to: int
    min_product: float          # min q<q alpha>
    argmin_q: int
    min_scaled_product: float   # min q<q alpha> psi(q); >= 1 iff consistent
    verdict: str                # consistent | violated
    witness_q: int | None
    method: str

    @property
    def consistent(self) -> bool:
        return self.verdict == "consistent"

    def to_dict(self) -> dict:
        return {"psi": str(self.psi), "checked_up_to": self.checked_up_to,
                "min_product": self.min_product, "argmin_q": self.argmin_q,
                "min_scaled_product": self.min_scaled_product, "verdict": self.verdict,
                "witness_q": self.witness_q, "method": self.method}


def _exact_psi(psi: Psi, q: int) -> Fraction | None:
    if psi.family == "constant":
        return Fraction(psi.param)
    if psi.family == "power" and float(psi.param).is_integer():
        return Fraction(q) ** int(psi.param)
    return None


def _decide_exactly(alpha: IrrationalSpec, q: int, psi: Psi) -> bool:
    """True iff q<q alpha> psi(q) >= 1, using the certified interval of alpha."""
    lo, hi = alpha.interval()
    qlo, qhi = q * lo, q * hi
    if math.floor(2 * qlo) != math.floor(2 * qhi):
        raise InsufficientPrecision(f"<q alpha> not monotone on the interval at q={q}", index=q)
    d1, d2 = nearest_int_distance_exact(qlo), nearest_int_distance_exact(qhi)
    low, high = q * min(d1, d2), q * max(d1, d2)
    exact = _exact_psi(psi, q)
    if exact is not None:
        if low * exact >= 1:
            return True
        if high * exact < 1:
            return False
    else:
        lp = psi.log(q)
        margin = 1e-12 * max(1.0, abs(lp))
        if low > 0 and _log_fraction(low) + lp >= margin:
            return True
        if _log_fraction(high) + lp < -margin:
            return False
    raise InsufficientPrecision(f"type condition undecidable at q={q}", index=q)


def _log_fraction(x: Fraction) -> float:
    return math.log(x.numerator) - math.log(x.denominator)


def _scaled_distance_checks(alpha: IrrationalSpec, qs: Sequence[int], psi: Psi):
    bits = min(alpha.precision_bits, 4 * max(qs).bit_length() + 192)
    A, err = alpha.fixed_point(bits)
    one = 1 << bits
    err_f = float(err)
    min_prod, argmin = math.inf, 0
    min_scaled = math.inf
    witness = None
    for q in qs:
        r = (q * A) % one
        dist = min(r, one - r)
        prod = float(Fraction(q * dist, one))
        slack = q * q * err_f  # |q<q alpha> - q<q A/2^bits>| <= q*q*err
        if prod < min_prod:
            min_prod, argmin = prod, q
        if prod <= 2 * slack:
            # the fixed-point image cannot resolve <q alpha>; decide on the interval
            ok = _decide_exactly(alpha, q, psi)
            if not ok and witness is None:
                witness = q
            continue
        log_scaled = math.log(prod) + psi.log(q)
        min_scaled = min(min_scaled, math.exp(min(log_scaled, 700.0)))
        if abs(log_scaled) <= 4 * slack / prod + 1e-9:
            ok = _decide_exactly(alpha, q, psi)
        else:
            ok = log_scaled > 0
        if not ok and witness is None:
            witness = q
    return min_prod, argmin, min_scaled, witness


def type_check(alpha: IrrationalSpec, psi: Psi | str, Q: int, method: str = "scan") -> TypeCertificate:
    """Check q<q alpha> >= 1/psi(q) for q <= Q.

    ``scan`` visits every q; ``convergents`` visits only continued-fraction
    denominators, which decides the same verdict for nondecreasing psi because
    a violation at q implies one at the last convergent denominator <= q.
    ``min_product`` is only a true minimum for ``scan``.
    """
    if Q < 1:
        raise ValueError("Q must be >= 1")
    psi = Psi.parse(psi) if isinstance(psi, str) else psi
    if method == "scan":
        qs: Sequence[int] = range(1, Q + 1)
    elif method == "convergents":
        qs = [q for q in _denominators_up_to(alpha, Q)]
    else:
        raise ValueError(f"unknown method {method!r}")
    min_prod, argmin, min_scaled, witness = _scaled_distance_checks(alpha, qs, psi)
    return TypeCertificate(psi, Q, min_prod, argmin, min_scaled,
                           "consistent" if witness is None else "violated", witness, method)


def _denominators_up_to(alpha: IrrationalSpec, Q: int) -> list[int]:
    out = [1]
    depth = 1
    while True:
        try:
            cf = continued_fraction(alpha, depth)
        except InsufficientPrecision:
            break
        q = cf.convergents[-1][1]
        if q > Q:
            break
        if q != out[-1]:
            out.append(q)
        depth += 1
    return out


# -- Liouville generator -----------------------------------------------------------

@dataclass(frozen=True)
class LiouvilleCondition:
    n: int
    u_n: int
    u_next: int
    gap: bool      # n*u_n + ln(beta)/ln(b) < u_{n+1}
    growth: bool   # u_{n+1} < b**(u_n/(3+eps)) / ln(b)


@dataclass(frozen=True)
class LiouvilleReport:
    base: int
    epsilon: float
    n_max: int
    conditions: tuple[LiouvilleCondition, ...]
    n0: int | None            # smallest n from which both conditions hold up to n_max - 1
    truncated_from: int | None  # requested n_max when the exponent budget forced truncation

    @property
    def degenerate(self) -> bool:
        return not self.conditions

    def to_dict(self) -> dict:
        return {"base": self.base, "epsilon": self.epsilon, "n_max": self.n_max, "n0": self.n0,
                "truncated_from": self.truncated_from,
                "conditions": [c.__dict__ for c in self.conditions]}


def liouville_conditions(base: int, epsilon: float, exponents: Sequence[int]) -> list[LiouvilleCondition]:
    """Both generator inequalities for n = 1..len(exponents)-1, evaluated in log form."""
    ln_b = math.log(base)
    ln_beta = math.log(base / (base - 1))
    out = []
    for n in range(1, len(exponents)):
        u, u_next = exponents[n - 1], exponents[n]
        gap = Fraction(n * u) + Fraction(ln_beta / ln_b) < u_next
        growth = math.log(u_next) < (u / (3.0 + epsilon)) * ln_b - math.log(ln_b)
        out.append(LiouvilleCondition(n, u, u_next, bool(gap), bool(growth)))
    return out


def liouville_generate(base: int, epsilon: float, n_max: int,
                       exponents: Sequence[int] | None = None,
                       exponent_budget: int = DEFAULT_EXPONENT_BUDGET
                       ) -> tuple[IrrationalSpec, LiouvilleReport]:
    """alpha = sum_{n<=n_max} base**(-u_n) plus the per-n condition table.

    With ``n_max`` = 1 there is nothing to check; the report is degenerate.
    If u_{n_max} exceeds ``exponent_budget`` the depth is truncated to the last
    admissible n and the requested depth is recorded in ``truncated_from``.
    A user-supplied exponent sequence is validated, never extended.
    """
    if base < 2 or epsilon <= 0 or n_max < 1:
        raise ValueError("need base >= 2, epsilon > 0, n_max >= 1")
    ex = list(exponents) if exponents is not None else _factorials(n_max + 1)
    if len(ex) < n_max + 1:
        raise ValueError("exponent sequence must provide u_1..u_{n_max+1}")
    ex = ex[: n_max + 1]
    truncated_from = None
    if ex[0] > exponent_budget:
        raise ThresholdOverflow("u_1 exceeds the exponent budget")
    if ex[n_max - 1] > exponent_budget:
        truncated_from = n_max
        n_max = max(n for n in range(1, n_max + 1) if ex[n - 1] <= exponent_budget)
        ex = ex[: n_max + 1]
    conds = liouville_conditions(base, epsilon, ex[:n_max])
    n0 = None
    for i in range(len(conds) - 1, -1, -1):
        if conds[i].gap and conds[i].growth:
            n0 = conds[i].n
        else:
            break
    spec = IrrationalSpec.liouville(base, n_max, epsilon, ex)
    return spec, LiouvilleReport(base, float(epsilon), n_max, tuple(conds), n0, truncated_from)
