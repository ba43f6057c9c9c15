"""Symbols in the Beurling algebra A_w: arithmetic, norm, bumps and rotations.

The circle is parameterised by [0,1) with characters e^{2 pi i n t}. A symbol
stores a contiguous block of Fourier coefficients plus ``tail_bound``, a
certified bound on the A_w norm of everything that was not stored.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.special import zeta

from .errors import NotCovering, TailNotSummable
from .operator import BeurlingWeightFn

DEFAULT_GRID = 10_000
_U = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class BeurlingSymbol:
    offset: int                 # frequency of coeffs[0]
    coeffs: np.ndarray          # complex, contiguous frequencies offset .. offset+len-1
    weight: BeurlingWeightFn
    tail_bound: float = 0.0
    support: tuple[float, float] | None = None  # declared arc [a, b), read modulo 1
    meta: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex).ravel()
        if c.size == 0:
            c = np.zeros(1, dtype=complex)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    # -- construction --------------------------------------------------------
    @classmethod
    def from_dict(cls, coeffs: Mapping[int, complex], weight: BeurlingWeightFn, **kw) -> "BeurlingSymbol":
        if not coeffs:
            return cls(0, np.zeros(1), weight, **kw)
        lo, hi = min(coeffs), max(coeffs)
        arr = np.zeros(hi - lo + 1, dtype=complex)
        for n, v in coeffs.items():
            arr[n - lo] += v
        return cls(lo, arr, weight, **kw)

    @classmethod
    def constant(cls, c: complex, weight: BeurlingWeightFn) -> "BeurlingSymbol":
        return cls(0, np.array([c]), weight)

    # -- access -------------------------------------------------------------
    @property
    def n_min(self) -> int:
        return self.offset

    @property
    def n_max(self) -> int:
        return self.offset + self.coeffs.size - 1

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    @property
    def radius(self) -> int:
        return max(abs(self.n_min), abs(self.n_max))

    def coef(self, n: int) -> complex:
        i = n - self.offset
        return complex(self.coeffs[i]) if 0 <= i < self.coeffs.size else 0j

    def dense(self, M: int) -> np.ndarray:
        """Coefficients for n = -M..M (zero padded / cut)."""
        out = np.zeros(2 * M + 1, dtype=complex)
        lo, hi = max(self.n_min, -M), min(self.n_max, M)
        if lo <= hi:
            out[lo + M: hi + M + 1] = self.coeffs[lo - self.offset: hi - self.offset + 1]
        return out

    def weighted_abs(self) -> np.ndarray:
        """|c_n| e^{w(|n|)} for the stored coefficients (inf on overflow)."""
        with np.errstate(over="ignore", divide="ignore"):
            return np.exp(np.log(np.abs(self.coeffs)) + self.weight.w(self.indices))

    @property
    def is_real(self) -> bool:
        if self.n_min != -self.n_max:
            return bool(np.all(self.coeffs == 0))
        return bool(np.allclose(self.coeffs, np.conj(self.coeffs[::-1]), rtol=0, atol=1e-15 * np.abs(self.coeffs).max()))

    # -- evaluation ------------------------------------------------------------
    def evaluate(self, ts) -> np.ndarray:
        """sum_n c_n e^{2 pi i n t} at arbitrary points (direct summation)."""
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        out = np.zeros(ts.size, dtype=complex)
        n = self.indices
        for s in range(0, ts.size, 256):
            out[s:s + 256] = np.exp(2j * np.pi * np.outer(ts[s:s + 256], n)) @ self.coeffs
        return out

    def grid_values(self, G: int = DEFAULT_GRID) -> np.ndarray:
        """Values at t_j = j/G: coefficients are folded modulo G and synthesised by one FFT."""
        bins = np.zeros(G, dtype=complex)
        np.add.at(bins, np.mod(self.indices, G), self.coeffs)
        return np.fft.ifft(bins) * G

    # -- arithmetic --------------------------------------------------------------
    def _combine(self, other: "BeurlingSymbol", a: complex, b: complex) -> "BeurlingSymbol":
        lo, hi = min(self.n_min, other.n_min), max(self.n_max, other.n_max)
        arr = np.zeros(hi - lo + 1, dtype=complex)
        arr[self.n_min - lo: self.n_max - lo + 1] += a * self.coeffs
        arr[other.n_min - lo: other.n_max - lo + 1] += b * other.coeffs
        return BeurlingSymbol(lo, arr, self.weight, abs(a) * self.tail_bound + abs(b) * other.tail_bound)

    def __add__(self, other):
        return self._combine(other, 1, 1)

    def __sub__(self, other):
        return self._combine(other, 1, -1)

    def __neg__(self):
        return self.scale(-1)

    def scale(self, c: complex) -> "BeurlingSymbol":
        return BeurlingSymbol(self.offset, c * self.coeffs, self.weight, abs(c) * self.tail_bound,
                              self.support if c != 0 else None)

    def __mul__(self, other):
        if isinstance(other, BeurlingSymbol):
            return symbol_product(self, other)
        return self.scale(other)

    __rmul__ = __mul__

    def truncated(self, M: int) -> "BeurlingSymbol":
        """Keep |n| <= M and move the weighted mass of the rest into the tail."""
        keep = (self.indices >= -M) & (self.indices <= M)
        dropped = float(np.sum(self.weighted_abs()[~keep]))
        arr = self.dense(M)
        return BeurlingSymbol(-M, arr, self.weight, self.tail_bound + dropped, self.support, dict(self.meta))

    def trimmed(self, threshold: float) -> "BeurlingSymbol":
        """Drop outer coefficients whose weighted size is below ``threshold``; tail absorbs them."""
        wa = self.weighted_abs()
        big = np.nonzero(wa >= threshold)[0]
        if big.size == 0:
            return BeurlingSymbol(0, np.zeros(1), self.weight, self.tail_bound + float(wa.sum()),
                                  self.support, dict(self.meta))
        i, j = big[0], big[-1]
        dropped = float(wa[:i].sum() + wa[j + 1:].sum())
        return BeurlingSymbol(self.offset + int(i), self.coeffs[i:j + 1], self.weight,
                              self.tail_bound + dropped, self.support, dict(self.meta))

    # -- serialization --------------------------------------------------------------
    def to_dict(self) -> dict:
        return {"coeffs": [[int(n), float(c.real), float(c.imag)] for n, c in zip(self.indices, self.coeffs)
                           if c != 0],
                "epsilon": self.weight.epsilon, "tail_bound": self.tail_bound,
                "support": list(self.support) if self.support else None}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "BeurlingSymbol":
        d = json.loads(s)
        coeffs = {int(n): complex(re, im) for n, re, im in d["coeffs"]}
        return cls.from_dict(coeffs, BeurlingWeightFn(d["epsilon"]), tail_bound=d["tail_bound"],
                             support=tuple(d["support"]) if d["support"] else None)


def algebra_norm(s: BeurlingSymbol) -> float:
    """sum |c_n| e^{w(|n|)} over stored coefficients plus the certified tail."""
    return float(np.sum(s.weighted_abs())) + s.tail_bound


def symbol_product(a: BeurlingSymbol, b: BeurlingSymbol) -> BeurlingSymbol:
    """Pointwise product on the circle: direct convolution of the coefficient blocks.

    Direct summation keeps the rounding error of each output coefficient
    relative to the terms that form it, which matters when products must be
    certified as tiny. The tail uses (a+ra)(b+rb) - ab = a rb + ra b + ra rb.
    """
    if a.weight != b.weight:
        raise ValueError("symbols must share the weight function")
    c = np.convolve(a.coeffs, b.coeffs)
    tail = algebra_norm(a) * b.tail_bound + a.tail_bound * algebra_norm(b) - a.tail_bound * b.tail_bound
    return BeurlingSymbol(a.offset + b.offset, c, a.weight, max(tail, 0.0))


def rotate_symbol(s: BeurlingSymbol, delta: float) -> BeurlingSymbol:
    """psi_delta(t) = psi(t + delta): coefficient n picks up e^{2 pi i n delta}."""
    n = s.indices
    phase = np.exp(2j * np.pi * np.mod(n * delta, 1.0)) if delta else np.ones(n.size)
    support = None
    if s.support:
        a, b = s.support
        support = ((a - delta) % 1.0, (a - delta) % 1.0 + (b - a))
    return BeurlingSymbol(s.offset, s.coeffs * phase, s.weight, s.tail_bound, support, dict(s.meta))


def arc_mask(ts: np.ndarray, support: tuple[float, float]) -> np.ndarray:
    a, b = support
    return np.mod(ts - a, 1.0) < (b - a)


# -- bump construction ----------------------------------------------------------------

EXPLICIT_RANGE = 10**7   # radii a_k summed exactly for k below this
SERIES_CUT = 0.3         # |2 pi n a_k| below which ln sinc is summed as a power series
SERIES_TERMS = 10


def _radius_profile(eps_p: float, K: int) -> np.ndarray:
    k = np.arange(1, K + 1, dtype=float)
    return 1.0 / (k * np.log(k + 2.0) ** (1.0 + eps_p))


def _profile_sum_upper(eps_p: float, g: np.ndarray) -> float:
    """sum_{k>=1} 1/(k ln(k+2)^{1+eps'}) from above: explicit part plus int_K^inf dx/(x ln^{1+eps'} x)."""
    K = g.size
    return float(np.sum(g)) * (1 + 1e-13) + math.log(K) ** (-eps_p) / eps_p


def _log_sinc_abs(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = np.sinc(x / np.pi)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(s)), np.sign(s)


def _lower_B(n: float, c: float, eps_p: float, ln_g_prefix: np.ndarray) -> float:
    """Lower bound for B(n) = sum_{2 pi n a_k > 1} ln(2 pi n a_k), so |phi_hat(n)| <= e^{-B(n)}."""
    L = math.log(2 * math.pi * n * c)

    def f(x):  # ln(2 pi n a_x), decreasing in x
        return L - math.log(x) - (1 + eps_p) * math.log(math.log(x + 2))

    if f(1) <= 0:
        return 0.0
    lo, hi = 1.0, 2.0
    while f(hi) > 0:
        lo, hi = hi, hi * 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 0.5:
            break
    kstar = int(math.floor(lo))
    K0 = ln_g_prefix.size
    if kstar <= K0:
        return kstar * L + float(ln_g_prefix[kstar - 1]) - 1e-9 * (kstar * abs(L) + 1)
    base = K0 * L + float(ln_g_prefix[-1]) - 1e-9 * (K0 * abs(L) + 1)
    a, b = K0 + 1.0, kstar + 1.0
    integral = (b - a) * (L - (1 + eps_p) * math.log(math.log(b + 2))) - (b * math.log(b) - b - a * math.log(a) + a)
    return base + max(integral, 0.0) * (1 - 1e-9)


def _certified_tail(N_trunc: int, c: float, eps_p: float, weight: BeurlingWeightFn,
                    ln_g_prefix: np.ndarray) -> float:
    """2 * sum_{n > N_trunc} e^{w(n) - B(n)} summed over dyadic blocks."""
    logs = []
    j = int(math.floor(math.log2(N_trunc + 1)))
    start = N_trunc + 1
    decreasing_run = 0
    prev = math.inf
    while j < 1000:
        lo, hi = max(2**j, start), 2 ** (j + 1) - 1
        if hi >= lo:
            term = math.log(hi - lo + 1) + weight.w(hi + 1) - _lower_B(lo, c, eps_p, ln_g_prefix)
            logs.append(term)
            decreasing_run = decreasing_run + 1 if term < prev - 1 else 0
            prev = term
            if term < -1e4 and decreasing_run >= 8:
                break
        j += 1
    else:
        return math.inf
    m = max(logs)
    if m > 700:
        return math.inf
    total = math.exp(m) * sum(math.exp(t - m) for t in logs)
    # each later block is at least e times smaller than the previous one: geometric remainder
    total += math.exp(logs[-1]) / (1 - math.exp(-1))
    return 2.0 * total


def bump(center: float, half_width: float, weight: BeurlingWeightFn, K: int | None = None,
         N_trunc: int = 2**16, tail_tol: float | None = None, trim: float | None = 1e-40) -> BeurlingSymbol:
    """Density of c0 + sum_k U_k with U_k uniform on [-a_k, a_k], a_k = c/(k ln(k+2)^{1+eps/8}).

    ``K=None`` convolves infinitely many factors (c from a certified upper bound
    on the series, so the support stays inside the declared arc); a finite K
    uses the first K radii normalised to sum to ``half_width``. Coefficients
    phi_hat(n) = e^{-2 pi i n c0} prod_k sinc(2 pi n a_k) are computed for
    |n| <= N_trunc; the tail uses |phi_hat(n)| <= prod_k min(1, 1/(2 pi |n| a_k)).
    """
    if not 0 < half_width < 0.5:
        raise ValueError("half_width must lie in (0, 1/2)")
    eps_p = weight.epsilon / 8.0
    n = np.arange(0, N_trunc + 1, dtype=float)
    if K is not None:
        if K < 1:
            raise ValueError("K must be >= 1")
        g = _radius_profile(eps_p, K)
        radii = half_width * g / np.sum(g)
        logmag = np.zeros(n.size)
        sign = np.ones(n.size)
        for a in radii:
            lm, sg = _log_sinc_abs(2 * np.pi * n * a)
            logmag += lm
            sign *= sg
        tail = math.inf  # polynomial decay never beats e^{w(n)}
        c = float(radii[0] / g[0])
    else:
        g = _radius_profile(eps_p, EXPLICIT_RANGE)
        c = half_width / _profile_sum_upper(eps_p, g)
        radii = c * g
        k_exp = int(np.searchsorted(-2 * np.pi * N_trunc * radii, -SERIES_CUT))
        logmag = np.zeros(n.size)
        sign = np.ones(n.size)
        # err bounds the absolute rounding error of the running sinc product; each
        # computed factor is within 4u of the true sinc, whatever its size
        err = np.zeros(n.size)
        for a in radii[:k_exp]:
            lm, sg = _log_sinc_abs(2 * np.pi * n * a)
            with np.errstate(under="ignore"):
                err = err * np.exp(lm) + 4 * _U * np.exp(logmag)
            logmag += lm
            sign *= sg
        # ln sinc x = -sum_j zeta(2j) x^{2j} / (j pi^{2j}) for the remaining small arguments
        rest = radii[k_exp:]
        K0 = EXPLICIT_RANGE
        lnK = math.log(K0)
        for j in range(1, SERIES_TERMS + 1):
            p = float(np.sum(rest ** (2 * j)))
            p += c ** (2 * j) * K0 ** (1 - 2 * j) / ((2 * j - 1) * lnK ** (2 * j * (1 + eps_p)))
            logmag -= zeta(2 * j) * 4.0**j * p * n ** (2 * j) / j
        ln_g_prefix = np.cumsum(np.log(g))
        tail = _certified_tail(N_trunc, c, eps_p, weight, ln_g_prefix)
        with np.errstate(under="ignore"):
            err += np.exp(logmag) * _U * (3 * k_exp + 2 * np.abs(logmag) + 16)
            werr = err * np.exp(weight.w(n))
        tail += 2 * float(np.sum(werr)) - float(werr[0])
    if tail_tol is not None and not tail <= tail_tol:
        raise TailNotSummable(f"certified tail {tail:.3e} exceeds {tail_tol:.3e} at N_trunc={N_trunc}")
    with np.errstate(under="ignore"):
        mag = sign * np.exp(logmag)
    full = np.concatenate([mag[:0:-1], mag])                  # n = -N..N, real and even
    freqs = np.arange(-N_trunc, N_trunc + 1)
    coeffs = full * np.exp(-2j * np.pi * np.mod(freqs * center, 1.0))
    meta = {"center": center, "half_width": half_width, "K": K, "N_trunc": N_trunc, "c": c,
            "radius_sum": float(np.sum(radii)) if K is not None else half_width}
    s = BeurlingSymbol(-N_trunc, coeffs, weight, tail, (center - half_width, center + half_width), meta)
    return s.trimmed(trim) if trim and math.isfinite(tail) else s


# -- double-double synthesis ------------------------------------------------------------

_SPLITTER = 134217729.0  # 2**27 + 1


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def _twiddles(L: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """cos and sin of 2 pi r / L as (hi, lo) double pairs, r = 0..L-1."""
    import mpmath

    with mpmath.workdps(40):
        cs = [mpmath.cos(2 * mpmath.pi * r / L) for r in range(L)]
        sn = [mpmath.sin(2 * mpmath.pi * r / L) for r in range(L)]
    ch = np.array([float(v) for v in cs])
    cl = np.array([float(v - mpmath.mpf(h)) for v, h in zip(cs, ch)])
    sh = np.array([float(v) for v in sn])
    sl = np.array([float(v - mpmath.mpf(h)) for v, h in zip(sn, sh)])
    return ch, cl, sh, sl


def accurate_real_values(s: "BeurlingSymbol", L: int, js: np.ndarray) -> np.ndarray:
    """Re sum_n c_n e^{2 pi i n j / L} at the given j, in double-double arithmetic.

    Used where the symbol is small, so the relative accuracy of the sample does
    not collapse to u * sum|c_n| / |value|.
    """
    js = np.asarray(js, dtype=np.int64)
    ch, cl, sh, sl = _twiddles(L)
    hi = np.zeros(js.size)
    lo = np.zeros(js.size)
    for n, c in zip(s.indices.tolist(), s.coeffs.tolist()):
        if c == 0:
            continue
        r = np.mod(n * js, L)
        p1, e1 = _two_prod(np.full(js.size, c.real), ch[r])
        p2, e2 = _two_prod(np.full(js.size, -c.imag), sh[r])
        hi, e3 = _two_sum(hi, p1)
        hi, e4 = _two_sum(hi, p2)
        lo += e1 + e2 + e3 + e4 + c.real * cl[r] - c.imag * sl[r]
    return hi + lo


# -- covering and inversion ----------------------------------------------------------------

@dataclass(frozen=True)
class CoverReport:
    N: int
    delta: float
    min_G: float
    residual: float          # max over the grid of |G Psi - 1| for the stored G
    residual_bound: float    # residual plus ||Psi|| times G's certified tail
    psi_norm: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def cover_and_invert(s: BeurlingSymbol, delta: float, grid: int = DEFAULT_GRID,
                     n_inv: int = 2**13, tol: float = 1e-8) -> tuple[BeurlingSymbol, BeurlingSymbol, CoverReport]:
    """G = sum_{k=0}^{N} s(t + k delta) with N = floor(1/delta) + 1, and a trigonometric Psi ~ 1/G."""
    if not 0 < delta <= 1:
        raise ValueError("delta must lie in (0, 1]")
    vals = s.grid_values(grid).real
    slack = s.tail_bound + 64 * _U * float(np.abs(s.coeffs).sum())
    if vals.min() < -slack:
        raise ValueError("symbol is negative on the grid")
    N = int(math.floor(1.0 / delta)) + 1
    n = s.indices
    phases = np.exp(2j * np.pi * np.mod(np.outer(np.arange(N + 1), n) * delta, 1.0)).sum(axis=0)
    G = BeurlingSymbol(s.offset, s.coeffs * phases, s.weight, (N + 1) * s.tail_bound)
    gv = G.grid_values(grid).real
    gslack = G.tail_bound + 64 * _U * float(np.abs(G.coeffs).sum())
    if gv.min() <= gslack:
        raise NotCovering(f"rotations by multiples of {delta} leave a gap: min G = {gv.min():.3e}")
    L = 2 * n_inv + 1
    samples = G.grid_values(L).real
    small = np.nonzero(samples < 1e-2 * samples.max())[0]
    if small.size:
        samples[small] = accurate_real_values(G, L, small)
    inv = 1.0 / samples
    c = np.fft.fft(inv) / L                                     # c[m] for m mod L
    # entries below u max|c| are transform noise; e^{w(n)} would blow them up.
    # Psi is certified by its residual below, so dropping them is safe
    c[np.abs(c) < _U * np.abs(c).max()] = 0
    m = np.arange(-n_inv, n_inv + 1)
    Psi = BeurlingSymbol(-n_inv, c[np.mod(m, L)], s.weight, 0.0)
    resid = float(np.abs(gv * Psi.grid_values(grid) - 1.0).max())
    bound = resid + G.tail_bound * algebra_norm(Psi)
    if not resid <= tol:
        raise NotCovering(f"inverse residual {resid:.3e} exceeds {tol:.1e}; raise n_inv")
    return G, Psi, CoverReport(N, delta, float(gv.min()), resid, bound, algebra_norm(Psi))
