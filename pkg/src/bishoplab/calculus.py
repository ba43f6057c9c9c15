"""The functional calculus phi(T) f = sum_n phi_hat(n) T^n f on grids, its checks, and the demo.

Along the orbit of a grid node x every power of T is a shift once the
cocycle is folded in: with U_x[n] = T^n f(x) = W_x(n) f(tau^n x) one has
T^j (T^k f)(x) = U_x[j + k]. So phi(T) f(x) is a correlation of phi_hat
with the row U_x, nested operators are nested correlations, and nothing
is ever interpolated between grid nodes. Correlations are summed directly
(never by FFT) because U spans many orders of magnitude along a row.

Every computed quantity carries two bounds: ``tail`` for what truncation
left out (stored coefficients beyond the cut, the symbol's certified tail,
and growth beyond the window) and ``rounding`` for floating point error.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import circle
from .beurling import BeurlingSymbol, algebra_norm, bump, cover_and_invert, rotate_symbol, symbol_product
from .errors import BishopLabError, DemoAbort, DivisionAtZero, TailNotSummable, ThresholdOverflow
from .operator import BeurlingWeightFn, compute_nt, membership_along_orbit, cocycle_from_logs
from .orbit import OrbitCache, Rotation
from .weights import WeightP, normalize, parse_weight

_U = np.finfo(float).eps


# -- expressions --------------------------------------------------------------------------

class Expr:
    """A function on [0,1) built from harmonics, arcs, constants, sums and products."""

    def __call__(self, x):
        raise NotImplementedError

    def sup(self) -> float:
        """An upper bound for sup |expr|."""
        raise NotImplementedError

    @property
    def freq(self) -> int:
        """Largest harmonic frequency involved (for the evaluation error model)."""
        return 0

    def __add__(self, other):
        return Sum((self, _as_expr(other)))

    __radd__ = __add__

    def __mul__(self, other):
        return Product((self, _as_expr(other)))

    __rmul__ = __mul__


def _as_expr(e) -> Expr:
    return e if isinstance(e, Expr) else Const(e)


@dataclass(frozen=True)
class Const(Expr):
    c: complex

    def __call__(self, x):
        return np.full(np.shape(x), self.c, dtype=complex if isinstance(self.c, complex) else float)

    def sup(self):
        return abs(self.c)

    def __str__(self):
        return repr(self.c)


@dataclass(frozen=True)
class Harmonic(Expr):
    """e^{2 pi i m x}."""

    m: int

    def __call__(self, x):
        return np.exp(2j * np.pi * np.mod(self.m * np.asarray(x, dtype=float), 1.0))

    def sup(self):
        return 1.0

    @property
    def freq(self):
        return abs(self.m)

    def __str__(self):
        return f"exp:{self.m}"


@dataclass(frozen=True)
class Cosine(Expr):
    m: int
    phase: float = 0.0   # cos(2 pi (m x - phase)); phase 1/4 gives sin

    def __call__(self, x):
        return np.cos(2 * np.pi * np.mod(self.m * np.asarray(x, dtype=float) - self.phase, 1.0))

    def sup(self):
        return 1.0

    @property
    def freq(self):
        return abs(self.m)

    def __str__(self):
        return f"cos:{self.m}" if self.phase == 0 else f"sin:{self.m}"


@dataclass(frozen=True)
class Indicator(Expr):
    """1 on the arc [a, b) read modulo 1."""

    a: float
    b: float

    def __post_init__(self):
        if not 0 < self.b - self.a <= 1:
            raise ValueError("indicator needs 0 < b - a <= 1")

    def __call__(self, x):
        return (np.mod(np.asarray(x, dtype=float) - self.a, 1.0) < self.b - self.a).astype(float)

    def sup(self):
        return 1.0

    def __str__(self):
        return f"ind:{self.a},{self.b}"


@dataclass(frozen=True)
class Sum(Expr):
    terms: tuple

    def __call__(self, x):
        return sum(t(x) for t in self.terms)

    def sup(self):
        return sum(t.sup() for t in self.terms)

    @property
    def freq(self):
        return max(t.freq for t in self.terms)

    def __str__(self):
        return "+".join(str(t) for t in self.terms)


@dataclass(frozen=True)
class Product(Expr):
    factors: tuple

    def __call__(self, x):
        out = self.factors[0](x)
        for f in self.factors[1:]:
            out = out * f(x)
        return out

    def sup(self):
        return math.prod(f.sup() for f in self.factors)

    @property
    def freq(self):
        return sum(f.freq for f in self.factors)

    def __str__(self):
        return "*".join(str(f) for f in self.factors)


_ATOM = re.compile(r"^(exp|cos|sin|ind|indicator):(.+)$")


def parse_expr(text: str) -> Expr:
    """Sums of products of atoms: a number, ``exp:m``, ``cos:m``, ``sin:m`` or ``ind:a,b``."""
    terms = []
    for term in text.replace(" ", "").split("+"):
        if not term:
            raise ValueError(f"empty term in {text!r}")
        factors = []
        for atom in term.split("*"):
            m = _ATOM.match(atom)
            if m is None:
                try:
                    factors.append(Const(float(atom)))
                except ValueError:
                    raise ValueError(f"cannot read {atom!r} in {text!r}") from None
                continue
            kind, arg = m.groups()
            if kind == "exp":
                factors.append(Harmonic(int(arg)))
            elif kind in ("cos", "sin"):
                factors.append(Cosine(int(arg), 0.0 if kind == "cos" else 0.25))
            else:
                a, b = (float(s) for s in arg.split(","))
                factors.append(Indicator(a, b))
        terms.append(factors[0] if len(factors) == 1 else Product(tuple(factors)))
    return terms[0] if len(terms) == 1 else Sum(tuple(terms))


# -- grid functions ------------------------------------------------------------------------

def grid_nodes(G: int) -> np.ndarray:
    """Cell midpoints (j + 1/2)/G."""
    return (np.arange(G) + 0.5) / G


def grid_norm(values, p: float = 2.0) -> float:
    """L^p norm of a grid function, each node carrying mass 1/G."""
    a = np.abs(np.asarray(values))
    if a.size == 0:
        return 0.0
    if math.isinf(p):
        return float(a.max())
    return float(np.mean(a**p) ** (1.0 / p))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Samples at the G cell midpoints, zero off ``mask`` when a mask is given."""

    samples: np.ndarray
    p: float = 2.0
    mask: np.ndarray | None = None
    expr: Expr | None = None

    @classmethod
    def sample(cls, expr: Expr | str, G: int = 256, p: float = 2.0, mask=None) -> "GridFunction":
        """Evaluate ``expr`` on the grid; ``mask`` is a boolean array or an ExceptionalSet."""
        if isinstance(expr, str):
            expr = parse_expr(expr)
        x = grid_nodes(G)
        vals = np.asarray(expr(x))
        if mask is not None and not isinstance(mask, np.ndarray):
            mask = mask.member_mask(x)
        if mask is not None:
            vals = np.where(mask, vals, 0)
        return cls(vals, p, mask, expr)

    @property
    def G(self) -> int:
        return self.samples.size

    @property
    def nodes(self) -> np.ndarray:
        return grid_nodes(self.G)

    def norm(self, p: float | None = None) -> float:
        return grid_norm(self.samples, self.p if p is None else p)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.samples - other.samples, self.p, self.mask)

    def to_dict(self) -> dict:
        s = self.samples
        d = {"G": self.G, "p": self.p, "norm": self.norm(),
             "real": [float(v) for v in np.real(s)]}
        if np.iscomplexobj(s):
            d["imag"] = [float(v) for v in np.imag(s)]
        return d


# -- orbit windows --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Lifted:
    """U[g, J + n] = T^n f(x_g) for |n| <= J, with H_g >= sup_n |T^n f(x_g)| e^{-w(n)}."""

    U: np.ndarray
    H: np.ndarray
    relerr: np.ndarray   # relative error bound of each entry of U
    rows: np.ndarray     # evaluation rows: nodes inside E_t

    @property
    def J(self) -> int:
        return (self.U.shape[1] - 1) // 2


@dataclass(frozen=True, eq=False)
class OrbitWindow:
    """Orbit of each grid node over [-J, J] with cocycle, E_t membership and error model.

    Membership of tau^n x is decided to depth ``n_mask`` from orbit points
    stored before the window, so f in D_t is realised exactly as
    expr(tau^n x) * [tau^n x in E_t].
    """

    v: WeightP
    rotation: Rotation
    weights: BeurlingWeightFn
    t: float
    J: int
    n_mask: int
    start_ints: tuple
    positions: np.ndarray
    member: np.ndarray
    logw: np.ndarray
    signw: np.ndarray
    relerr: np.ndarray
    beyond: float        # sup_{|n|>J} |T^n f(x)| e^{-w(n)} / sup|f| on E_t

    @classmethod
    def build(cls, v: WeightP, rotation: Rotation, weights: BeurlingWeightFn, t: float,
              G: int = 256, J: int = 8200, n_mask: int = 1000, start_ints: Sequence[int] | None = None):
        rotation.require_ergodic()
        v = normalize(v)
        if start_ints is None:
            start_ints = [rotation.to_int(x) for x in grid_nodes(G)]
        start_ints = tuple(int(s) for s in start_ints)
        try:
            nt = compute_nt(weights, v.S, t)
        except ThresholdOverflow as e:
            raise TailNotSummable(f"growth beyond the window is not controlled: {e}") from e
        if J < nt:
            raise TailNotSummable(f"window J={J} is shorter than n(t)={nt}")
        oc = OrbitCache.build_fixed(rotation, start_ints, -J - n_mask, J)
        member = membership_along_orbit(oc, v.zeros, t, n_mask)[:, n_mask:]
        lv, sv = v.log_abs_on_orbit(oc)
        cc = cocycle_from_logs(lv, sv, -J - n_mask, J, J)
        lam = cocycle_from_logs(np.abs(lv), np.ones_like(sv), -J - n_mask, J, J).logmag
        n = np.abs(np.arange(-J, J + 1))
        relerr = _U * (2 * np.abs(lam) + 2 * n + 16)
        pos = oc.positions()[:, n_mask:]
        for a in (pos, member, cc.logmag, cc.sign, relerr):
            a.setflags(write=False)
        return cls(v, rotation, weights, t, J, n_mask, start_ints, pos, member, cc.logmag, cc.sign, relerr, 1.0)

    @property
    def G(self) -> int:
        return len(self.start_ints)

    @property
    def nodes(self) -> np.ndarray:
        return circle.to_float(circle.from_ints(self.start_ints, self.rotation.W))

    @property
    def rows(self) -> np.ndarray:
        """Grid nodes inside E_t."""
        return np.nonzero(self.member[:, self.J])[0]

    def shifted(self, j: int) -> "OrbitWindow":
        """The same window started from tau^j x_g, computed afresh."""
        starts = [self.rotation.power_int(s, j) for s in self.start_ints]
        return OrbitWindow.build(self.v, self.rotation, self.weights, self.t, J=self.J,
                                 n_mask=self.n_mask, start_ints=starts)

    def cocycle(self, n: int) -> np.ndarray:
        """W_x(n) for every node."""
        return self.signw[:, self.J + n] * np.exp(self.logw[:, self.J + n])

    def lift(self, expr: Expr | str, masked: bool = True) -> Lifted:
        if isinstance(expr, str):
            expr = parse_expr(expr)
        F = np.asarray(expr(self.positions))
        if masked:
            F = np.where(self.member, F, 0)
        rows = self.rows
        with np.errstate(over="ignore", invalid="ignore"):
            U = np.where(F == 0, 0, self.signw * np.exp(self.logw) * F)
        if not np.all(np.isfinite(U[rows])):
            raise DivisionAtZero("a backward orbit inside the window passes through a zero of v")
        w = self.weights.w(np.arange(-self.J, self.J + 1))
        H = np.zeros(self.G)
        H[rows] = np.max(np.abs(U[rows]) * np.exp(-w), axis=1)
        H = np.maximum(H, expr.sup() * self.beyond)
        relerr = self.relerr + _U * (8 + 8 * np.pi * expr.freq)
        return Lifted(U, H, relerr, rows)


# -- symbol handling ----------------------------------------------------------------------------

@dataclass(frozen=True)
class _Clip:
    """Stored coefficients of a symbol with |n| <= K, and the A_w mass of everything else."""

    offset: int
    coeffs: np.ndarray
    rest: float       # certified tail plus weighted mass of dropped stored coefficients
    norm: float       # full algebra norm of the symbol

    @property
    def hi(self) -> int:
        return self.offset + self.coeffs.size - 1


def _clip(s: BeurlingSymbol, K: int) -> _Clip:
    lo, hi = max(s.n_min, -K), min(s.n_max, K)
    wa = s.weighted_abs()
    if lo > hi:
        return _Clip(0, np.zeros(1, dtype=complex), s.tail_bound + float(wa.sum()), algebra_norm(s))
    i, j = lo - s.offset, hi - s.offset
    dropped = float(wa[:i].sum() + wa[j + 1:].sum())
    return _Clip(lo, np.array(s.coeffs[i:j + 1]), s.tail_bound + dropped, algebra_norm(s))


def _correlate_rows(U: np.ndarray, rows: np.ndarray, offset: int, coeffs: np.ndarray,
                    lo: int, hi: int) -> np.ndarray:
    """out[r, m - lo] = sum_i coeffs[i] U[rows[r], J + m + offset + i] for m in [lo, hi]."""
    J = (U.shape[1] - 1) // 2
    a, b = J + lo + offset, J + hi + offset + coeffs.size
    if a < 0 or b > U.shape[1]:
        raise ValueError(f"window J={J} too short for frequencies {lo + offset}..{hi + offset + coeffs.size - 1}")
    real = not (np.iscomplexobj(U) or np.iscomplexobj(coeffs))
    out = np.empty((rows.size, hi - lo + 1), dtype=float if real else complex)
    c = np.conj(coeffs)
    for r, g in enumerate(rows):
        out[r] = np.correlate(U[g, a:b], c, "valid")
    return out


def _dot_rows(U: np.ndarray, rows: np.ndarray, offset: int, coeffs: np.ndarray, shift: int = 0) -> np.ndarray:
    """sum_i coeffs[i] U[rows, J + shift + offset + i]."""
    J = (U.shape[1] - 1) // 2
    a = J + shift + offset
    if a < 0 or a + coeffs.size > U.shape[1]:
        raise ValueError(f"window J={J} too short")
    return U[rows, a:a + coeffs.size] @ coeffs


def _on_grid(G: int, rows: np.ndarray, vals: np.ndarray) -> np.ndarray:
    out = np.zeros(G, dtype=vals.dtype)
    out[rows] = vals
    return out


# -- the calculus -----------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CalculusResult:
    value: GridFunction
    M: int
    tail_bound: float        # L^p norm of the pointwise truncation tail
    rounding_bound: float    # L^p norm of the pointwise rounding bound
    t: float
    pointwise_tail: np.ndarray = field(repr=False)
    pointwise_rounding: np.ndarray = field(repr=False)

    @property
    def bound(self) -> float:
        return self.tail_bound + self.rounding_bound

    def to_dict(self) -> dict:
        return {"M": self.M, "t": self.t, "norm": self.value.norm(), "tail_bound": self.tail_bound,
                "rounding_bound": self.rounding_bound}


def _single(phi: BeurlingSymbol, f: Lifted, M: int, p: float, shift: int = 0):
    """phi_M(T) T^shift f at the evaluation rows, with pointwise tail and rounding bounds."""
    J = f.J
    rows = f.rows
    reach = J - abs(shift)
    cm = _clip(phi, min(M, reach))
    cw = _clip(phi, reach)
    val = _dot_rows(f.U, rows, cm.offset, cm.coeffs, shift)
    absU = np.abs(f.U)
    # stored coefficients with M < |n| <= reach
    outer = np.abs(cw.coeffs).copy()
    n = np.arange(cw.offset, cw.hi + 1)
    outer[np.abs(n) <= M] = 0
    tail = _dot_rows(absU, rows, cw.offset, outer, shift) + cw.rest * f.H[rows] * math.exp(phi.weight.w(shift))
    scale = cm.coeffs.size * _U + f.relerr
    rnd = _dot_rows(absU * scale, rows, cm.offset, np.abs(cm.coeffs), shift)
    G = f.U.shape[0]
    return _on_grid(G, rows, val), _on_grid(G, rows, tail), _on_grid(G, rows, rnd)


def apply_calculus(phi: BeurlingSymbol, window: OrbitWindow, f: Expr | str | Lifted, M: int,
                   p: float = 2.0) -> CalculusResult:
    """S_M = sum_{|n|<=M} phi_hat(n) T^n f on the E_t nodes of the window's grid.

    The tail adds the stored coefficients beyond M (evaluated exactly inside
    the window) to ||phi - phi_window||_{A_w} times sup_n |T^n f(x)| e^{-w(n)}.
    """
    lifted = f if isinstance(f, Lifted) else window.lift(f)
    val, tail, rnd = _single(phi, lifted, M, p)
    mask = np.zeros(window.G, dtype=bool)
    mask[lifted.rows] = True
    return CalculusResult(GridFunction(val, p, mask), M, grid_norm(tail, p), grid_norm(rnd, p),
                          window.t, tail, rnd)


def convergence_in_measure(phi: BeurlingSymbol, window: OrbitWindow, f: Expr | str | Lifted,
                           M_list: Sequence[int], delta: float) -> list[float]:
    """Grid measure of {|S_{M_{i+1}} - S_{M_i}| > delta} for consecutive truncations."""
    if any(b <= a for a, b in zip(M_list, M_list[1:])):
        raise ValueError("M_list must be increasing")
    lifted = f if isinstance(f, Lifted) else window.lift(f)
    S = [_single(phi, lifted, M, 2.0)[0] for M in M_list]
    return [float(np.mean(np.abs(b - a) > delta)) for a, b in zip(S, S[1:])]


# -- property checks ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class Residual:
    """A computed residual next to the bounds it must respect."""

    name: str
    residual: float
    tail: float
    rounding: float
    factor: float = 1.0
    extra: dict = field(default_factory=dict)

    @property
    def bound(self) -> float:
        return self.factor * (self.tail + self.rounding)

    @property
    def ok(self) -> bool:
        return bool(self.residual <= self.bound)

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(bound=self.bound, ok=self.ok)
        return d


def cauchy_check(phi: BeurlingSymbol, window: OrbitWindow, f, M_list: Sequence[int], p: float = 2.0) -> list[Residual]:
    """||S_{2M} - S_M|| against tail(M) plus the rounding of both sums."""
    lifted = f if isinstance(f, Lifted) else window.lift(f)
    out = []
    for M in M_list:
        a, ta, ra = _single(phi, lifted, M, p)
        b, _, rb = _single(phi, lifted, 2 * M, p)
        out.append(Residual(f"cauchy M={M}", grid_norm(b - a, p), grid_norm(ta, p),
                            grid_norm(ra + rb, p), extra={"M": M, "norm_S": grid_norm(a, p)}))
    return out


def commutation_check(psi: BeurlingSymbol, window: OrbitWindow, f: Expr | str, j: int, M: int,
                      p: float = 2.0) -> Residual:
    """psi(T)(T^j f) against T^j(psi(T) f), the right side from an orbit restarted at tau^j x."""
    if isinstance(f, str):
        f = parse_expr(f)
    fx = window.lift(f)
    other = window.shifted(j)
    fy = other.lift(f)
    lhs, tl, rl = _single(psi, fx, M, p, shift=j)
    inner, ty, ry = _single(psi, fy, min(M, window.J - abs(j)), p)
    Wj = window.cocycle(j)
    rhs = Wj * inner
    common = np.zeros(window.G, dtype=bool)
    common[np.intersect1d(fx.rows, fy.rows)] = True
    aW = np.abs(Wj)
    rnd = rl + aW * (ry + (window.relerr[:, window.J + j] + _U) * np.abs(inner))
    tail = tl + aW * ty
    diff = np.where(common, lhs - rhs, 0)
    return Residual(f"commutation j={j}", grid_norm(diff, p), grid_norm(np.where(common, tail, 0), p),
                    grid_norm(np.where(common, rnd, 0), p), extra={"j": j, "nodes": int(common.sum())})


def _nested(outer: _Clip, inner: _Clip, f: Lifted, shifts: Sequence[int]):
    """outer(T) T^j inner(T) f at the evaluation rows for each shift j, with the absolute-value sums."""
    lo = outer.offset + min(shifts)
    hi = outer.hi + max(shifts)
    V = _correlate_rows(f.U, f.rows, inner.offset, inner.coeffs, lo, hi)
    A = _correlate_rows(np.abs(f.U) * (1 + f.relerr), f.rows, inner.offset, np.abs(inner.coeffs), lo, hi)
    vals, absvals = [], []
    for j in shifts:
        s = j + outer.offset - lo
        vals.append(V[:, s:s + outer.coeffs.size] @ outer.coeffs)
        absvals.append(A[:, s:s + outer.coeffs.size] @ np.abs(outer.coeffs))
    return vals, absvals


def multiplicativity_check(phi: BeurlingSymbol, psi: BeurlingSymbol, window: OrbitWindow, f, M: int,
                           p: float = 2.0) -> Residual:
    """phi(T)(psi(T) f) nested against (phi psi)(T) f with the product symbol."""
    lifted = f if isinstance(f, Lifted) else window.lift(f)
    J = window.J
    cp = _clip(phi, min(M, J // 2))
    cq = _clip(psi, min(M, J - max(abs(cp.offset), abs(cp.hi))))
    (lhs,), (absl,) = _nested(cp, cq, lifted, [0])
    prod = np.convolve(cp.coeffs, cq.coeffs)
    rhs = _dot_rows(lifted.U, lifted.rows, cp.offset + cq.offset, prod)
    relmax = lifted.relerr[lifted.rows].max(axis=1)
    L = cp.coeffs.size + cq.coeffs.size
    rnd = absl * (3 * L * _U + 2 * relmax)
    # both sides stand for phi(T) psi(T) f: what the clips dropped, via submultiplicativity
    wt = (cp.norm * cq.rest + cp.rest * cq.norm + cp.rest * cq.rest) * lifted.H[lifted.rows]
    G = window.G
    diff = _on_grid(G, lifted.rows, lhs - rhs)
    return Residual("multiplicativity", grid_norm(diff, p), grid_norm(_on_grid(G, lifted.rows, 2 * wt), p),
                    grid_norm(_on_grid(G, lifted.rows, rnd), p),
                    extra={"norm_lhs": grid_norm(_on_grid(G, lifted.rows, lhs), p)})


def covering_check(psi: BeurlingSymbol, window: OrbitWindow, f, delta: float, p: float = 2.0,
                   n_inv: int = 2**13) -> Residual:
    """||Psi(T)(sum_k psi_k(T) f) - f|| with psi_k = psi(. + k delta) and Psi ~ 1/sum_k psi_k.

    The bound is the exact coefficient mismatch Psi*G - 1 applied to f, plus
    G's certified tail times ||Psi||, plus rounding. At every node where |f|
    exceeds the pointwise bound some psi_k(T) f is nonzero; those nodes are
    counted and the individual norms ||psi_k(T) f|| are reported.
    """
    lifted = f if isinstance(f, Lifted) else window.lift(f)
    Gs, Psi, rep = cover_and_invert(psi, delta, n_inv=n_inv)
    J = window.J
    cg = _clip(Gs, J)
    cP = _clip(Psi, J - max(abs(cg.offset), abs(cg.hi)))
    (lhs,), (absl,) = _nested(cP, cg, lifted, [0])
    rows = lifted.rows
    f0 = lifted.U[rows, J]
    mismatch = np.convolve(cP.coeffs, cg.coeffs)
    mismatch[-(cP.offset + cg.offset)] -= 1.0
    mis = _dot_rows(np.abs(lifted.U), rows, cP.offset + cg.offset, np.abs(mismatch))
    relmax = lifted.relerr[rows].max(axis=1)
    L = cP.coeffs.size + cg.coeffs.size
    rnd = absl * (3 * L * _U + 2 * relmax)
    tail = mis + (cg.rest * cP.norm + cP.rest * cg.norm) * lifted.H[rows]
    G = window.G
    parts = []
    for k in range(rep.N + 1):
        v, t_k, r_k = _single(rotate_symbol(psi, k * delta), lifted, J, p)
        parts.append({"k": k, "norm": grid_norm(v, p), "bound": grid_norm(t_k + r_k, p)})
    res = Residual("covering", grid_norm(_on_grid(G, rows, lhs - f0), p), grid_norm(_on_grid(G, rows, tail), p),
                   grid_norm(_on_grid(G, rows, rnd), p), factor=10.0,
                   extra={"cover": rep.to_dict(), "norm_f": grid_norm(_on_grid(G, rows, f0), p), "parts": parts})
    # at a node where |f| beats the pointwise bound, Psi(T) G(T) f is nonzero there
    certified = np.abs(f0) > tail + rnd
    res.extra["certified_nodes"] = int(certified.sum())
    res.extra["certifies_nonzero"] = bool(certified.any())
    return res


def perturbation_check(phi: BeurlingSymbol, window: OrbitWindow, f, h, cuts: Sequence[int],
                       delta: float = 1e-3, p: float = 2.0) -> list[Residual]:
    """phi_K(T) f_K against phi(T) f with phi_K = phi cut at K and f_K = f + h/K.

    The measure of {|difference| > delta} is reported next to each norm.
    """
    fx = f if isinstance(f, Lifted) else window.lift(f)
    hx = h if isinstance(h, Lifted) else window.lift(h)
    J = window.J
    ref, rt, rr = _single(phi, fx, J, p)
    out = []
    for K in cuts:
        eps = 1.0 / K
        a, ta, ra = _single(phi, fx, K, p)
        b, tb, rb = _single(_clip_symbol(phi, K), hx, K, p)
        diff = a + eps * b - ref
        out.append(Residual(f"perturbation K={K}", grid_norm(diff, p), grid_norm(ta + eps * (np.abs(b) + tb) + rt, p),
                            grid_norm(ra + rr + eps * rb, p),
                            extra={"K": K, "weight": eps, "measure": float(np.mean(np.abs(diff) > delta))}))
    return out


def truncation_check(phi: BeurlingSymbol, window: OrbitWindow, f, cuts: Sequence[int], p: float = 2.0) -> list[Residual]:
    """||phi_K(T) f - phi(T) f|| against ||phi - phi_K||_{A_w} sup_n |T^n f| e^{-w(n)}."""
    fx = f if isinstance(f, Lifted) else window.lift(f)
    ref, _, rr = _single(phi, fx, window.J, p)
    H = fx.H
    out = []
    for K in cuts:
        a, _, ra = _single(phi, fx, K, p)
        gap = algebra_norm(phi) - algebra_norm(_clip_symbol(phi, K))
        tail = np.where(np.isin(np.arange(window.G), fx.rows), max(gap, 0.0) * H, 0)
        out.append(Residual(f"truncation K={K}", grid_norm(a - ref, p), grid_norm(tail, p),
                            grid_norm(ra + rr, p), extra={"K": K, "gap_norm": gap}))
    return out


def _clip_symbol(s: BeurlingSymbol, K: int) -> BeurlingSymbol:
    c = _clip(s, K)
    return BeurlingSymbol(c.offset, c.coeffs, s.weight, 0.0)


@dataclass(frozen=True)
class PropertyReport:
    cauchy: list
    perturbation: list
    truncation: list
    commutation: list
    multiplicativity: list
    covering: Residual | None

    @property
    def ok(self) -> bool:
        items = self.cauchy + self.truncation + self.commutation + self.multiplicativity
        good = all(r.ok for r in items)
        return good and (self.covering is None or self.covering.ok)

    def to_dict(self) -> dict:
        return {k: ([r.to_dict() for r in v] if isinstance(v, list) else (v.to_dict() if v else None))
                for k, v in self.__dict__.items()} | {"ok": self.ok}


def property_suite(phi: BeurlingSymbol, psi: BeurlingSymbol, window: OrbitWindow, f: Expr | str,
                   commutant_samples: Sequence[int] = (1, 2, 3, 4, 5), M: int = 4096,
                   cauchy_M: Sequence[int] = (2**8, 2**10, 2**12), delta: float | None = 0.15,
                   p: float = 2.0) -> PropertyReport:
    """Residuals for the six calculus properties on one window and one f in D_t."""
    if isinstance(f, str):
        f = parse_expr(f)
    fx = window.lift(f)
    hx = window.lift(Cosine(1))
    cuts = [2**k for k in range(2, 15, 2)]
    return PropertyReport(
        cauchy_check(phi, window, fx, cauchy_M, p),
        perturbation_check(phi, window, fx, hx, cuts, p=p),
        truncation_check(phi, window, fx, cuts, p),
        [commutation_check(psi, window, f, j, M, p) for j in commutant_samples],
        [multiplicativity_check(phi, psi, window, fx, M, p)],
        covering_check(psi, window, fx, delta, p) if delta else None,
    )


def write_curve_csv(residuals: Sequence[Residual], path) -> None:
    """CSV of (M, residual, tail) with LF line endings."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["M", "residual", "tail"])
        for r in residuals:
            w.writerow([r.extra.get("M", r.extra.get("K", "")), repr(r.residual), repr(r.tail + r.rounding)])


# -- the end-to-end construction ----------------------------------------------------------------------------

@dataclass(frozen=True)
class DemoConfig:
    alpha: str = "golden"
    weight: str = "e*x"
    epsilon: float = 8.0
    t: float = 0.05
    M: int = 4096
    G: int = 256
    p: float = 2.0
    phi_center: float = 0.25
    psi_center: float = 0.75
    half_width: float = 0.1
    shifts: tuple = (1, 2, 3, 4, 5)
    g: str = "ind:0.1,0.6"
    u: str = "1+cos:1"
    n_mask: int = 1000
    precision_bits: int = 128

    def to_dict(self) -> dict:
        d = asdict(self)
        d["shifts"] = list(self.shifts)
        return d


@dataclass(frozen=True)
class Certificate:
    name: str
    ok: bool
    value: float
    threshold: float
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DemoReport:
    config: DemoConfig
    certificates: list

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.certificates)

    def certificate(self, name: str) -> Certificate:
        return next(c for c in self.certificates if c.name == name)

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "passed": self.passed,
                "certificates": [c.to_dict() for c in self.certificates]}


class _Stage:
    """Re-raise library errors as DemoAbort tagged with the stage name."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, et, e, tb):
        if e is not None and isinstance(e, (BishopLabError, ValueError, ArithmeticError)) \
                and not isinstance(e, DemoAbort):
            raise DemoAbort(self.name, e) from e
        return False


def hyperinvariant_demo(config: DemoConfig = DemoConfig()) -> DemoReport:
    """Build phi, psi with phi psi = 0 and check that h = psi(T) g lies in the kernel of phi(T) T^j.

    Certificates: (a) ||phi psi||_{A_w} <= 1e-6; (b) ||h|| exceeds its own
    error bound; (c) ||phi(T) T^j h|| <= 1000 x (tail + rounding) for each j;
    (d) ||phi(T) u|| minus its bound exceeds 10 x the largest tolerance of (c).
    """
    cfg = config
    with _Stage("setup"):
        rotation = Rotation.of(cfg.alpha, cfg.precision_bits)
        rotation.require_ergodic()
        v = normalize(parse_weight(cfg.weight))
        weights = BeurlingWeightFn(cfg.epsilon)
        g_expr, u_expr = parse_expr(cfg.g), parse_expr(cfg.u)
    with _Stage("symbols"):
        phi = bump(cfg.phi_center, cfg.half_width, weights)
        psi = bump(cfg.psi_center, cfg.half_width, weights) if cfg.psi_center != cfg.phi_center else phi
    certs = []
    with _Stage("disjointness"):
        prod_norm = algebra_norm(symbol_product(phi, psi))
        certs.append(Certificate("disjointness", prod_norm <= 1e-6, prod_norm, 1e-6,
                                 {"norm_phi": algebra_norm(phi), "norm_psi": algebra_norm(psi),
                                  "tail_phi": phi.tail_bound, "tail_psi": psi.tail_bound}))
    with _Stage("window"):
        J = 2 * cfg.M + 8
        window = OrbitWindow.build(v, rotation, weights, cfg.t, cfg.G, J, cfg.n_mask)
        gx = window.lift(g_expr)
        ux = window.lift(u_expr)
    p = cfg.p
    G = window.G
    rows = gx.rows
    with _Stage("witness"):
        h, th, rh = _single(psi, gx, cfg.M, p)
        nh, bh = grid_norm(h, p), grid_norm(th + rh, p)
        certs.append(Certificate("nonzero_witness", nh > bh, nh, bh,
                                 {"norm_g": grid_norm(gx.U[:, J], p), "nodes_in_E_t": int(rows.size)}))
    with _Stage("membership"):
        cp = _clip(phi, min(cfg.M, J // 2))
        cq = _clip(psi, min(cfg.M, J - max(abs(cp.offset), abs(cp.hi)) - max(cfg.shifts)))
        vals, absvals = _nested(cp, cq, gx, list(cfg.shifts))
        relmax = gx.relerr[rows].max(axis=1)
        L = cp.coeffs.size + cq.coeffs.size
        worst = 0.0
        detail = []
        for j, val, av in zip(cfg.shifts, vals, absvals):
            # phi psi = 0 exactly, so the computed value is what the clipped symbols and rounding leave
            growth = gx.H[rows] * math.exp(weights.w(j))
            tail = (cp.norm * cq.rest + cp.rest * cq.norm + cp.rest * cq.rest) * growth
            rnd = av * (3 * L * _U + 2 * relmax)
            res = grid_norm(_on_grid(G, rows, val), p)
            tol = 1e3 * (grid_norm(_on_grid(G, rows, tail), p) + grid_norm(_on_grid(G, rows, rnd), p))
            worst = max(worst, tol)
            detail.append({"j": j, "residual": res, "tol": tol, "ok": bool(res <= tol)})
        ok = all(d["ok"] for d in detail)
        certs.append(Certificate("membership", ok, max(d["residual"] for d in detail), worst, {"shifts": detail}))
    with _Stage("nontriviality"):
        val, tu, ru = _single(phi, ux, cfg.M, p)
        nu, bu = grid_norm(val, p), grid_norm(tu + ru, p)
        certs.append(Certificate("nontriviality", nu - bu > 10 * worst, nu, 10 * worst, {"bound": bu}))
    return DemoReport(cfg, certs)
