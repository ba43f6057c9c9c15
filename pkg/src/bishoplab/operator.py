"""Powers of T f = v (f o tau), their growth bounds, and the exceptional sets E_t.

Along an orbit, T^n f(x) = W_x(n) f(tau^n x) with the multiplicative cocycle
W_x(n) = prod_{k<n} v(tau^k x) for n > 0 and 1 / prod_{k=1}^{-n} v(tau^{-k} x)
for n < 0. Everything is kept as (ln|W|, sign W) to avoid under/overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import DivisionAtZero, ThresholdOverflow
from .orbit import OrbitCache, ProductRotation, Rotation
from .weights import ProductWeight, WeightP, normalize

NT_CAP = 10**9


# -- weight functions ---------------------------------------------------------------

@dataclass(frozen=True)
class BeurlingWeightFn:
    """w(n) = n / ln(e+n)^{1+eps/4} and wtilde(n) = 15 n / ln(e+n)^{1+eps/2}; both even in n."""

    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")

    def w(self, n):
        n = np.abs(np.asarray(n, dtype=float))
        out = n / np.log(math.e + n) ** (1.0 + self.epsilon / 4.0)
        return float(out) if out.ndim == 0 else out

    def wtilde(self, n):
        n = np.abs(np.asarray(n, dtype=float))
        out = 15.0 * n / np.log(math.e + n) ** (1.0 + self.epsilon / 2.0)
        return float(out) if out.ndim == 0 else out

    def log_C(self, n, t: float):
        """ln C_{n,t} = -(1/5) wtilde(n) ln t."""
        return -self.wtilde(n) * math.log(t) / 5.0

    def C(self, n, t: float):
        return np.exp(self.log_C(n, t))

    def forward_log_bound(self, n, S: float):
        """S wtilde(n), the bound on ln U_{n,x}."""
        return S * self.wtilde(n)

    def backward_log_bound(self, n, S: float, t: float):
        """S ln C_{n,t} + S wtilde(n) = S (1 - ln t / 5) wtilde(n)."""
        return S * (1.0 - math.log(t) / 5.0) * self.wtilde(n)

    def summability_estimate(self, N: int) -> float:
        """sum_{n>=1} w(n)/n^2 from the partial sum to N plus an integral tail.

        The tail is int_N^inf w(x)/x^2 dx - w(N)/(2N^2) (trapezoid correction).
        With x = e^u the integrand is ln(e+e^u)^{-a}, a = 1 + eps/4; its u^{-a}
        part integrates in closed form and the remainder decays like e^{-u}.
        """
        n = np.arange(1, N + 1, dtype=float)
        partial = math.fsum(self.w(n) / n**2)
        a = 1.0 + self.epsilon / 4.0
        L = math.log(N)
        main = L ** (1.0 - a) / (a - 1.0)
        corr, _ = integrate.quad(lambda u: (u + math.log1p(math.exp(1.0 - u))) ** -a - u ** -a, L, np.inf,
                                 epsabs=1e-15, epsrel=1e-12, limit=200)
        return partial + main + corr - self.w(N) / (2.0 * N * N)


def compute_nt(weights: BeurlingWeightFn, S: float, t: float, cap: int = NT_CAP) -> int:
    """Smallest n >= 2 with S wtilde(n) (1 - ln t/5) <= w(n).

    The ratio of the two sides is 15 S (1 - ln t/5) / ln(e+n)^{eps/4}, which is
    decreasing, so the feasible set is a half-line and bisection applies.
    """
    if not 0 < t < 1:
        raise ValueError("t must lie in (0,1)")

    def ok(n):
        return weights.backward_log_bound(n, S, t) <= weights.w(n)

    if ok(2):
        return 2
    if not ok(cap):
        raise ThresholdOverflow(f"n(t) exceeds {cap} (S={S}, t={t}, eps={weights.epsilon})")
    lo, hi = 2, cap
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def stirling_upper(n: int) -> float:
    """ln of e (n/e)^n sqrt(2 pi n), an upper bound for ln n!."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return 1.0 + n * math.log(n) - n + 0.5 * math.log(2 * math.pi * n)


# -- exceptional sets ------------------------------------------------------------------

def failure_depths(dist: np.ndarray, t: float, n_max: int) -> np.ndarray:
    """K with d < t/k^3 exactly for k = 1..K (capped at n_max); 0 where d >= t."""
    with np.errstate(divide="ignore"):
        K = np.where(dist > 0, np.ceil(np.cbrt(t / np.where(dist > 0, dist, 1.0))) - 1, n_max)
    K = np.clip(K, 0, n_max).astype(np.int64)
    # repair cube-root rounding on both sides
    up = (K < n_max) & (dist * (K + 1.0) ** 3 < t)
    K = K + up
    down = (K > 0) & (dist * K.astype(float) ** 3 >= t)
    return K - down


def membership_along_orbit(oc: OrbitCache, zeros: Sequence[float], t: float, n_max: int) -> np.ndarray:
    """E_t membership (truncated at depth n_max) of every cached orbit point.

    A point y = tau^j x is a member iff no earlier point tau^{j-k} x, k = 1..n_max,
    lies within t/k^3 of a zero. Each close point blocks the next K positions, so
    membership follows from a difference array. Columns closer than n_max to the
    start of the cache cannot see their full history and are marked False.
    """
    G, L = oc.words.shape[1:]
    blocked = np.zeros((G, L + 1), dtype=np.int64)
    for z in zeros:
        d, _ = oc.signed_distances(z)
        K = failure_depths(d, t, n_max)
        g, j = np.nonzero(K)
        np.add.at(blocked, (g, j + 1), 1)
        np.add.at(blocked, (g, np.minimum(j + K[g, j] + 1, L)), -1)
    member = np.cumsum(blocked[:, :L], axis=1) == 0
    member[:, :n_max] = False
    return member


@dataclass(frozen=True, eq=False)
class ExceptionalSet:
    """E_t: points whose backward orbit satisfies |tau^{-k}x - x_i| >= t/k^3, k = 1..n_max."""

    rotation: Rotation
    zeros: tuple[float, ...]
    t: float
    n_max: int = 1000

    def __post_init__(self):
        if not 0 < self.t < 1:
            raise ValueError("t must lie in (0,1)")
        object.__setattr__(self, "zeros", tuple(float(z) for z in self.zeros))

    @property
    def measure_lower_bound(self) -> float:
        return 1.0 - len(self.zeros) * self.t * math.pi**2 / 3.0

    def _min_ratio_exact(self, x_int: int, n: int | None) -> bool:
        from fractions import Fraction
        one = 1 << self.rotation.bits
        t = Fraction(self.t)
        for k in range(1, (n or self.n_max) + 1):
            y = self.rotation.power_int(x_int, -k)
            thresh = t / (n if n is not None else k) ** 3
            for z in self.zeros:
                zi = one if z >= 1.0 else self.rotation.to_int(z)
                if Fraction(abs(y - zi), one) < thresh:
                    return False
        return True

    def contains(self, x: float | int) -> bool:
        """Exact membership in E_t; an int is read as a fixed-point point."""
        x_int = x if isinstance(x, int) else self.rotation.to_int(x)
        return self._min_ratio_exact(x_int, None)

    def contains_level(self, x: float | int, n: int) -> bool:
        """Exact membership in E_{n,t}: |tau^{-k}x - x_i| >= t/n^3 for k = 1..n."""
        x_int = x if isinstance(x, int) else self.rotation.to_int(x)
        return self._min_ratio_exact(x_int, n)

    def member_mask(self, xs, chunk: int = 2048) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        out = np.empty(xs.size, dtype=bool)
        ks = np.arange(self.n_max, 0, -1, dtype=float)  # columns hold k = n_max..1
        for s in range(0, xs.size, chunk):
            oc = self.rotation.orbit(xs[s:s + chunk], -self.n_max, -1)
            ok = np.ones(oc.words.shape[1], dtype=bool)
            for z in self.zeros:
                d, _ = oc.signed_distances(z)
                ok &= np.all(d * ks**3 >= self.t, axis=1)
            out[s:s + chunk] = ok
        return out


@dataclass(frozen=True)
class MeasureEstimate:
    estimate: float
    sigma: float
    lower_bound: float
    samples: int

    @property
    def consistent(self) -> bool:
        return self.estimate >= self.lower_bound - 3 * self.sigma

    def to_dict(self) -> dict:
        return dict(self.__dict__, consistent=self.consistent)


def exceptional_set_measure(zeros: Sequence[float], rotation: Rotation, t: float, n_max: int,
                            samples: int = 10_000, seed: int = 0) -> MeasureEstimate:
    """Monte-Carlo measure of E_t with the binomial standard error."""
    if samples < 1000:
        raise ValueError("use at least 1000 samples")
    xs = np.random.default_rng(seed).random(samples)
    E = ExceptionalSet(rotation, tuple(zeros), t, n_max)
    p = float(E.member_mask(xs).mean())
    return MeasureEstimate(p, math.sqrt(max(p * (1 - p), 0.0) / samples), E.measure_lower_bound, samples)


# -- cocycle tables ------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Cocycle:
    """ln|W_x(n)| and sign W_x(n) for n in [-J_back, J_fwd] at each start x (rows)."""

    logmag: np.ndarray   # shape (G, J_back + J_fwd + 1); column J_back is n = 0
    sign: np.ndarray
    J_back: int
    J_fwd: int

    def col(self, n: int) -> int:
        return n + self.J_back

    def log(self, n: int) -> np.ndarray:
        return self.logmag[:, self.col(n)]

    def value(self, n: int) -> np.ndarray:
        return self.sign[:, self.col(n)] * np.exp(self.logmag[:, self.col(n)])


def cocycle_from_logs(lv: np.ndarray, sv: np.ndarray, k0: int, J_back: int, J_fwd: int) -> Cocycle:
    """Build W from ln|v| and sign v tabulated at orbit positions k (column k - k0)."""
    G = lv.shape[0]
    logmag = np.zeros((G, J_back + J_fwd + 1))
    sign = np.ones((G, J_back + J_fwd + 1), dtype=np.int8)
    if J_fwd:
        f = slice(-k0, -k0 + J_fwd)                      # k = 0..J_fwd-1
        logmag[:, J_back + 1:] = np.cumsum(lv[:, f], axis=1)
        sign[:, J_back + 1:] = np.cumprod(sv[:, f], axis=1)
    if J_back:
        b = slice(-k0 - 1, -k0 - 1 - J_back, -1) if -k0 - 1 - J_back >= 0 else slice(-k0 - 1, None, -1)
        back = lv[:, b]                                   # k = -1, -2, ..., -J_back
        with np.errstate(invalid="ignore"):
            logmag[:, :J_back] = -np.cumsum(back, axis=1)[:, ::-1]
        sign[:, :J_back] = np.cumprod(sv[:, b], axis=1)[:, ::-1]
    return Cocycle(logmag, sign, J_back, J_fwd)


def cocycle(v: WeightP, rotation: Rotation, xs, J_back: int, J_fwd: int) -> tuple[Cocycle, OrbitCache]:
    oc = rotation.orbit(np.atleast_1d(np.asarray(xs, dtype=float)), -J_back, max(J_fwd, 0))
    lv, sv = v.log_abs_on_orbit(oc)
    return cocycle_from_logs(lv, sv, -J_back, J_back, J_fwd), oc


def apply_power(v: WeightP, rotation: Rotation, n: int, f: Callable, x: float):
    """T^n f(x) with v used as given (normalize first for the bound conventions)."""
    if n == 0:
        return f(x)
    cc, oc = cocycle(v, rotation, [x], max(-n, 0), max(n, 0))
    logw = float(cc.log(n)[0])
    if logw == math.inf or math.isnan(logw):
        raise DivisionAtZero(f"backward orbit of {x} hits a zero of v within {-n} steps")
    y = float(oc.positions()[0, oc.index(n)])
    return cc.sign[0, cc.col(n)] * math.exp(logw) * f(y)


# -- bound scans --------------------------------------------------------------------------

@dataclass(frozen=True)
class PowerBoundReport:
    n: int
    direction: str
    value: float          # ln U_{n,x} or -ln L_{n,x}
    bound: float          # S wtilde(n) or S (1 - ln t/5) wtilde(n)
    x: float | tuple
    t: float | None = None
    in_E_t: bool = True
    bound_w: float | None = None  # w(n), present when n >= n(t)

    @property
    def asserted(self) -> bool:
        return self.direction == "forward" or self.in_E_t

    @property
    def ok(self) -> bool:
        if not self.asserted:
            return True
        good = self.value <= self.bound
        if self.bound_w is not None:
            good = good and self.value <= self.bound_w
        return bool(good)

    @property
    def ratio(self) -> float:
        return self.value / self.bound

    def to_dict(self) -> dict:
        return dict(self.__dict__, ok=self.ok)


def forward_bound_scan(v: WeightP, rotation: Rotation, n_list: Sequence[int], x_grid,
                       weights: BeurlingWeightFn) -> list[PowerBoundReport]:
    """ln U_{n,x} against S wtilde(n); the weight is normalized first."""
    v = normalize(v)
    xs = np.atleast_1d(np.asarray(x_grid, dtype=float))
    cc, _ = cocycle(v, rotation, xs, 0, max(n_list))
    out = []
    for n in n_list:
        vals = cc.log(n)
        b = weights.forward_log_bound(n, v.S)
        out.extend(PowerBoundReport(n, "forward", float(val), b, float(x)) for x, val in zip(xs, vals))
    return out


def backward_bound_scan(v: WeightP, rotation: Rotation, n_list: Sequence[int], t: float, x_grid,
                        weights: BeurlingWeightFn) -> list[PowerBoundReport]:
    """-ln L_{n,x} against the C_{n,t}-form bound for grid points in E_t.

    Membership is decided up to depth max(n_list); the e^{w(n)} form is added
    when n(t) is finite and n >= n(t).
    """
    v = normalize(v)
    xs = np.atleast_1d(np.asarray(x_grid, dtype=float))
    n_top = max(n_list)
    cc, oc = cocycle(v, rotation, xs, n_top, 0)
    member = ExceptionalSet(rotation, tuple(v.zeros), t, n_top).member_mask(xs)
    try:
        nt = compute_nt(weights, v.S, t)
    except ThresholdOverflow:
        nt = None
    out = []
    for n in n_list:
        vals = cc.log(-n)
        b = weights.backward_log_bound(n, v.S, t)
        bw = weights.w(n) if nt is not None and n >= nt else None
        for x, val, m in zip(xs, vals, member):
            if m and not np.isfinite(val):
                raise DivisionAtZero(f"backward orbit of {x} hits a zero")
            out.append(PowerBoundReport(n, "backward", float(val), b, float(x), t, bool(m), bw))
    return out


# -- products on the d-torus ------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ProductOperator:
    """T f(x) = prod_i v_i(x_i) f(tau x) with tau a coordinate-wise rotation."""

    weights: ProductWeight
    rotation: ProductRotation

    @classmethod
    def build(cls, vs: Sequence[WeightP], alphas: Sequence, bits: int = 128) -> "ProductOperator":
        if len(vs) != len(alphas):
            raise ValueError("one weight per coordinate")
        return cls(ProductWeight(tuple(vs)), ProductRotation.of(alphas, bits))

    @property
    def d(self) -> int:
        return self.weights.d

    def growth_log_bound(self, n: int, weights: BeurlingWeightFn) -> float:
        """d w(n): the log of the norm bound e^{d w(n)}."""
        return self.d * weights.w(n)

    def apply_power(self, n: int, f: Callable, x: Sequence[float]):
        coeff = 1.0
        y = []
        for v, r, xi in zip(self.weights.components, self.rotation.rotations, x):
            coeff *= apply_power(v, r, n, lambda u: 1.0, xi)
            y.append(r(xi, n))
        return coeff * f(np.array(y))

    def forward_scan(self, n_list, points, weights: BeurlingWeightFn) -> list[PowerBoundReport]:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        per = [forward_bound_scan(v, r, n_list, pts[:, i], weights)
               for i, (v, r) in enumerate(zip(self.weights.components, self.rotation.rotations))]
        return [PowerBoundReport(rs[0].n, "forward", sum(r.value for r in rs), sum(r.bound for r in rs),
                                 tuple(float(c) for c in pts[j % len(pts)]))
                for j, rs in enumerate(zip(*per))]

    def backward_scan(self, n_list, t: float, points, weights: BeurlingWeightFn) -> list[PowerBoundReport]:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        per = [backward_bound_scan(v, r, n_list, t, pts[:, i], weights)
               for i, (v, r) in enumerate(zip(self.weights.components, self.rotation.rotations))]
        return [PowerBoundReport(rs[0].n, "backward", sum(r.value for r in rs), sum(r.bound for r in rs),
                                 tuple(float(c) for c in pts[j % len(pts)]), t, all(r.in_E_t for r in rs))
                for j, rs in enumerate(zip(*per))]
