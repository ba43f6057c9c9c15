import math
from fractions import Fraction
from itertools import combinations_with_replacement

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bishoplab.diophantine import IrrationalSpec
from bishoplab.discrepancy import (PointSequence, discrepancy, discrepancy_fast, discrepancy_oracle,
                                   interval_deviation, kn_bound, kn_bound_scan, orbit_discrepancy,
                                   sup_discrepancy_over_x, type_psi_m, write_bound_csv)
from bishoplab.errors import EmptySequence
from bishoplab.orbit import Rotation


def exact_discrepancy(points):
    """sup over [a,b), (a,b), [a,b], (a,b] with endpoints in points + {0,1}, in rationals."""
    xs = [Fraction(x) for x in points]
    n = len(xs)
    cand = sorted(set(xs) | {Fraction(0), Fraction(1)})
    best = Fraction(0)
    for a, b in combinations_with_replacement(cand, 2):
        for lo_in in (True, False):
            for hi_in in (True, False):
                if a == b and not (lo_in and hi_in):
                    continue
                c = sum(1 for x in xs if (x >= a if lo_in else x > a) and (x <= b if hi_in else x < b))
                best = max(best, abs(Fraction(c, n) - (b - a)))
    return best


points = st.lists(st.floats(0.0, 1.0, exclude_max=True), min_size=1, max_size=12)


def test_single_point():
    assert discrepancy_oracle([0.5]).D_N == 1.0
    assert discrepancy_fast([0.5]).D_N == 1.0


def test_centered_equipartition():
    x = [(2 * i - 1) / 8 for i in range(1, 5)]
    assert discrepancy_oracle(x).D_N == pytest.approx(0.25, abs=1e-15)
    assert discrepancy_fast(x).D_N == pytest.approx(0.25, abs=1e-15)


def test_golden_orbit_five_points(golden):
    seq = PointSequence.orbit(golden, 0.0, 5)
    assert np.allclose(seq.points, [0.6180, 0.2361, 0.8541, 0.4721, 0.0902], atol=1e-4)
    assert float(exact_discrepancy(seq.points)) == pytest.approx(0.2721, abs=1e-4)
    assert discrepancy_oracle(seq).D_N == pytest.approx(0.2721359549995794, abs=1e-12)
    assert discrepancy_fast(seq).D_N == pytest.approx(discrepancy_oracle(seq).D_N, abs=1e-12)


@settings(max_examples=150, deadline=None)
@given(points)
def test_oracle_matches_rational_enumeration(pts):
    assert discrepancy_oracle(pts).D_N == pytest.approx(float(exact_discrepancy(pts)), abs=1e-12)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0.0, 1.0, exclude_max=True), min_size=1, max_size=200))
def test_fast_matches_oracle(pts):
    assert discrepancy_fast(pts).D_N == pytest.approx(discrepancy_oracle(pts).D_N, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(points)
def test_witness_realises_the_discrepancy(pts):
    for rep in (discrepancy_oracle(pts), discrepancy_fast(pts)):
        a, b = rep.witness_interval
        dev = interval_deviation(pts, len(pts), a, b, rep.witness_closure)
        assert dev == pytest.approx(rep.D_N, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(points, st.randoms(use_true_random=False))
def test_bounds_and_relabeling(pts, rnd):
    D = discrepancy_fast(pts).D_N
    assert 1 / len(pts) - 1e-15 <= D <= 1.0 + 1e-15
    shuffled = list(pts)
    rnd.shuffle(shuffled)
    assert discrepancy_fast(shuffled).D_N == D
    assert discrepancy_oracle(shuffled).D_N == pytest.approx(discrepancy_oracle(pts).D_N, abs=1e-15)


def test_empty_and_oversized():
    with pytest.raises(EmptySequence):
        discrepancy_fast([])
    with pytest.raises(ValueError):
        discrepancy_oracle([0.1, 0.2], N=3)
    with pytest.raises(ValueError):
        PointSequence([0.3, 1.0])


def test_prefix_and_dispatch():
    pts = [0.1, 0.9, 0.5, 0.3]
    assert discrepancy(pts, 2).D_N == discrepancy_fast(pts[:2]).D_N
    assert discrepancy(pts, method="oracle").method == "oracle"


def test_orbit_points_follow_the_map(golden):
    fwd = PointSequence.orbit(golden, 0.3, 6)
    bwd = PointSequence.orbit(golden, 0.3, 6, "backward")
    for k in range(6):
        assert fwd.points[k] == pytest.approx(golden(0.3, k + 1), abs=1e-16)
        assert bwd.points[k] == pytest.approx(golden(0.3, -(k + 1)), abs=1e-16)


def test_sup_over_starts_is_translation_invariant(golden):
    grid = np.linspace(0.0, 0.9, 10)
    for N in (1, 7, 50, 1000):
        sup = sup_discrepancy_over_x(golden, N, grid)
        assert sup.spread <= 1.01
        assert np.ptp(sup.values) <= 1e-12
    assert np.allclose(sup_discrepancy_over_x(golden, 1, grid).values, 1.0, rtol=0, atol=1e-15)


def test_backward_orbit_bounded_by_forward_sup(golden):
    grid = np.random.default_rng(3).random(10)
    for N in (10, 100, 1000):
        fwd = sup_discrepancy_over_x(golden, N, grid).sup
        bwd = sup_discrepancy_over_x(golden, N, grid, "backward").values
        assert np.all(bwd <= fwd + 1e-12)


def test_precision_audit(golden):
    assert orbit_discrepancy(golden, 0.1, 10**4, audit=True) > 0


@pytest.mark.parametrize("desc", ["golden", "sqrt2"])
def test_birkhoff_trend(desc):
    rot = Rotation.of(desc)
    D = [orbit_discrepancy(rot, 0.1, N) for N in (10**2, 10**3, 10**4)]
    assert D[0] > D[1] > D[2]


def test_kn_bound_single_term():
    a = IrrationalSpec.golden()
    d = (3 - 5**0.5) / 2
    assert kn_bound(a, 100, 1) == pytest.approx(3 * (1 + 1 / (100 * d)), rel=1e-14)


def test_kn_bound_dominates(golden):
    a = golden.alpha
    D = orbit_discrepancy(golden, 0.0, 10**4)
    assert kn_bound(a, 10**4, 100) >= D
    vals, m_best, best = kn_bound_scan(a, 10**4, range(1, 201))
    assert np.all(vals >= D)
    assert best == vals.min() and vals[m_best - 1] == best


def test_type_psi_m_choice():
    # m = floor(ln(N ln^{-3-eps/3} N)^{3+eps/2}); tiny N clamps to 1
    N, eps = 10**8, 1.0
    inner = math.log(N) - (3 + eps / 3) * math.log(math.log(N))
    assert type_psi_m(N, eps) == math.floor(inner ** 3.5)
    assert type_psi_m(10**3, 1.0) == 1


def test_bound_csv(tmp_path):
    path = tmp_path / "bound.csv"
    write_bound_csv(path, [(10, 0.1, 0.5), (100, 0.02, 0.2)])
    raw = path.read_bytes()
    assert b"\r" not in raw
    assert raw.decode().splitlines() == ["N,D_N,bound", "10,0.1,0.5", "100,0.02,0.2"]
