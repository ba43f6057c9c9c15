"""Extreme discrepancy of point sequences and the continued-fraction bound for rotations."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .diophantine import IrrationalSpec
from .errors import EmptySequence, InsufficientPrecision
from .orbit import Rotation

KN_CONSTANT = 3.0


@dataclass(frozen=True, eq=False)
class PointSequence:
    """Immutable points in [0,1) with a description of where they came from."""

    points: np.ndarray
    source: str = "explicit"

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).ravel()
        if pts.size and (pts.min() < 0.0 or pts.max() >= 1.0):
            raise ValueError("points must lie in [0,1)")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.size

    @classmethod
    def orbit(cls, rotation: Rotation, x0: float, N: int, direction: str = "forward"):
        """tau^{k}(x0), k = 1..N (forward) or tau^{-k}(x0) (backward)."""
        if direction == "forward":
            oc = rotation.orbit([x0], 1, N)
            pts = oc.positions()[0]
        elif direction == "backward":
            oc = rotation.orbit([x0], -N, -1)
            pts = oc.positions()[0][::-1]
        else:
            raise ValueError("direction must be forward or backward")
        return cls(pts, f"orbit(alpha={rotation.alpha.value!r}, x0={x0!r}, {direction})")


@dataclass(frozen=True)
class DiscrepancyReport:
    N: int
    D_N: float
    witness_interval: tuple[float, float]
    witness_closure: str   # which endpoints the extremal count includes: "[)", "()", "[]", "(]"
    method: str

    def to_dict(self) -> dict:
        return {"N": self.N, "D_N": self.D_N, "witness_interval": list(self.witness_interval),
                "witness_closure": self.witness_closure, "method": self.method}


def _prefix(seq: PointSequence | Sequence[float] | np.ndarray, N: int | None) -> np.ndarray:
    pts = seq.points if isinstance(seq, PointSequence) else np.asarray(seq, dtype=float).ravel()
    N = pts.size if N is None else N
    if N < 1 or pts.size == 0:
        raise EmptySequence("need at least one point")
    if N > pts.size:
        raise ValueError(f"N={N} exceeds sequence length {pts.size}")
    return pts[:N]


def discrepancy_oracle(seq, N: int | None = None) -> DiscrepancyReport:
    """Brute force over endpoints in the sorted points plus {0, 1}.

    Each candidate pair is scored with both endpoints included and excluded;
    the supremum over half-open intervals equals the best of these because
    the count is piecewise constant and the length is continuous.
    """
    x = np.sort(_prefix(seq, N))
    n = x.size
    cand = np.unique(np.concatenate([x, [0.0, 1.0]]))
    left = np.searchsorted(x, cand, side="left")    # points < c
    right = np.searchsorted(x, cand, side="right")  # points <= c
    length = cand[None, :] - cand[:, None]
    valid = length >= 0
    counts = {
        "[)": left[None, :] - left[:, None],
        "()": left[None, :] - right[:, None],
        "[]": right[None, :] - left[:, None],
        "(]": right[None, :] - right[:, None],
    }
    best, arg = -1.0, None
    for tag, c in counts.items():
        dev = np.where(valid, np.abs(c / n - length), -1.0)
        if tag != "[]":
            dev = np.where(length > 0, dev, -1.0)
        i, j = np.unravel_index(np.argmax(dev), dev.shape)
        if dev[i, j] > best:
            best, arg = float(dev[i, j]), (float(cand[i]), float(cand[j]), tag)
    return DiscrepancyReport(n, best, (arg[0], arg[1]), arg[2], "oracle")


def discrepancy_fast(seq, N: int | None = None) -> DiscrepancyReport:
    """1/N + max(i/N - x_(i)) - min(i/N - x_(i)) over the sorted sample."""
    x = np.sort(_prefix(seq, N))
    n = x.size
    g = np.arange(1, n + 1) / n - x
    imax, imin = int(np.argmax(g)), int(np.argmin(g))
    D = 1.0 / n + float(g[imax] - g[imin])
    # the extremal closed interval runs from x_(imin) to x_(imax); if imax < imin the
    # complement (which wraps) is the witness, reported as the larger open gap
    if imin <= imax:
        witness, closure = (float(x[imin]), float(x[imax])), "[]"
    else:
        witness, closure = (float(x[imax]), float(x[imin])), "()"
    return DiscrepancyReport(n, D, witness, closure, "closed-form")


def discrepancy(seq, N: int | None = None, method: str = "fast") -> DiscrepancyReport:
    return discrepancy_oracle(seq, N) if method == "oracle" else discrepancy_fast(seq, N)


def interval_deviation(seq, N: int, a: float, b: float, closure: str = "[)") -> float:
    """|A(N, I)/N - (b - a)| for the interval I with the given endpoint closure."""
    x = _prefix(seq, N)
    lo_ok = x >= a if closure[0] == "[" else x > a
    hi_ok = x <= b if closure[1] == "]" else x < b
    return abs(np.count_nonzero(lo_ok & hi_ok) / x.size - (b - a))


def orbit_discrepancy(rotation: Rotation, x0: float, N: int, direction: str = "forward",
                      audit: bool = False) -> float:
    """D_N of the orbit of x0; with ``audit`` the orbit is recomputed at twice
    the working precision and the two values must agree to 1e-15."""
    D = discrepancy_fast(PointSequence.orbit(rotation, x0, N, direction)).D_N
    if audit:
        hi = Rotation(rotation.alpha, 2 * rotation.bits)
        D2 = discrepancy_fast(PointSequence.orbit(hi, x0, N, direction)).D_N
        if abs(D - D2) > 1e-15:
            raise InsufficientPrecision(f"discrepancy audit failed: {D} vs {D2}")
    return D


def orbit_discrepancies(rotation: Rotation, x_grid: Iterable[float], N: int,
                        direction: str = "forward") -> np.ndarray:
    xs = np.asarray(list(x_grid), dtype=float)
    if direction == "forward":
        oc = rotation.orbit(xs, 1, N)
    else:
        oc = rotation.orbit(xs, -N, -1)
    pos = np.sort(oc.positions(), axis=1)
    g = np.arange(1, N + 1) / N - pos
    return 1.0 / N + g.max(axis=1) - g.min(axis=1)


@dataclass(frozen=True)
class SupDiscrepancy:
    N: int
    sup: float
    values: np.ndarray
    spread: float  # max/min over the grid


def sup_discrepancy_over_x(rotation: Rotation, N: int, x_grid: Sequence[float],
                           direction: str = "forward") -> SupDiscrepancy:
    """max over starting points of D_N of the orbit, with the near-constancy ratio."""
    if len(x_grid) == 0:
        raise ValueError("x_grid must be nonempty")
    vals = orbit_discrepancies(rotation, x_grid, N, direction)
    return SupDiscrepancy(N, float(vals.max()), vals, float(vals.max() / vals.min()))


# -- continued-fraction bound ---------------------------------------------------------

def _frac_distances(alpha: IrrationalSpec, m: int) -> np.ndarray:
    """<h alpha> for h = 1..m from the certified fixed-point image."""
    bits = min(alpha.precision_bits, 4 * m.bit_length() + 192)
    A, err = alpha.fixed_point(bits)
    one = 1 << bits
    out = np.empty(m)
    for h in range(1, m + 1):
        r = (h * A) % one
        dist = min(r, one - r)
        if Fraction(dist, one) <= 2 * h * err:
            raise InsufficientPrecision(f"<h alpha> unresolved at h={h}", index=h)
        out[h - 1] = float(Fraction(dist, one))
    return out


def kn_bound(alpha: IrrationalSpec, N: int, m: int, C: float = KN_CONSTANT) -> float:
    """C (1/m + (1/N) sum_{h<=m} 1/(h <h alpha>))."""
    if m < 1 or N < 1:
        raise ValueError("need m >= 1 and N >= 1")
    d = _frac_distances(alpha, m)
    h = np.arange(1, m + 1)
    return float(C * (1.0 / m + np.sum(1.0 / (h * d)) / N))


def kn_bound_scan(alpha: IrrationalSpec, N: int, m_values: Sequence[int],
                  C: float = KN_CONSTANT) -> tuple[np.ndarray, int, float]:
    """Bound for every m in ``m_values``; returns (values, best m, best value)."""
    m_values = list(m_values)
    d = _frac_distances(alpha, max(m_values))
    h = np.arange(1, len(d) + 1)
    partial = np.cumsum(1.0 / (h * d))
    vals = np.array([C * (1.0 / m + partial[m - 1] / N) for m in m_values])
    i = int(np.argmin(vals))
    return vals, m_values[i], float(vals[i])


def type_psi_m(N: int, epsilon: float) -> int:
    """floor(ln(N ln^{-3-eps/3} N) ** (3 + eps/2)), clamped to at least 1."""
    lnN = math.log(N)
    inner = math.log(N) - (3 + epsilon / 3) * math.log(lnN)
    if inner <= 0:
        return 1
    return max(1, math.floor(inner ** (3 + epsilon / 2)))


def write_bound_csv(path, rows: Iterable[tuple[int, float, float]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["N", "D_N", "bound"])
        for row in rows:
            w.writerow(row)
