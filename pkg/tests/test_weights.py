import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bishoplab.errors import DomainError, OrbitHitsZero
from bishoplab.weights import (ABSOLUTE, SIGNED, Factor, ProductWeight, WeightP, birkhoff_radius_estimate,
                               entropy_term, eval_weight, normalize, parse_weight, spectral_radius,
                               spectral_radius_quadrature)


def test_eval_examples():
    assert eval_weight(parse_weight("x"), 0.25) == 0.25
    assert eval_weight(parse_weight("|x-0.5|^0.5"), 0.25) == pytest.approx(0.5, abs=1e-16)
    with pytest.raises(DomainError):
        eval_weight(parse_weight("(x-0.5)^0.5"), 0.25)


def test_eval_vanishes_exactly_at_zeros():
    v = parse_weight("2*|x-0.3|^1.5*(x-0.7)^3")
    assert eval_weight(v, 0.3) == 0.0 and eval_weight(v, 0.7) == 0.0
    assert eval_weight(v, 0.5) == pytest.approx(2 * 0.2**1.5 * (-0.2) ** 3)


def test_signed_integer_power_keeps_sign():
    v = parse_weight("(x-0.5)^3")
    assert eval_weight(v, 0.25) == pytest.approx(-(0.25**3))
    assert eval_weight(parse_weight("(x-0.5)^2"), 0.25) == pytest.approx(0.0625)


def test_parse_and_json_roundtrip():
    v = parse_weight("e*x*|x-0.5|^0.5*(x-1)^2")
    assert v.C == pytest.approx(math.e)
    assert [f.mode for f in v.factors] == [SIGNED, ABSOLUTE, SIGNED]
    assert v.S == 3.5
    assert WeightP.from_json(v.to_json()) == v
    with pytest.raises(ValueError):
        parse_weight("x+1")


def test_invalid_weights():
    with pytest.raises(ValueError):
        WeightP(0.0, (Factor(0.0, 1.0),))
    with pytest.raises(ValueError):
        Factor(1.5, 1.0)
    with pytest.raises(ValueError):
        Factor(0.2, 0.0)


@pytest.mark.parametrize("desc, r", [
    ("x", math.exp(-1)),
    ("|x-0.5|", 1 / (2 * math.e)),
    ("2*x", 2 * math.exp(-1)),
])
def test_spectral_radius_examples(desc, r):
    assert spectral_radius(parse_weight(desc)).r == pytest.approx(r, rel=1e-14)


def test_endpoint_convention():
    for z in (0.0, 1.0):
        xi, xp = Factor(z, 1.0).X
        assert xi + xp == 1.0
    xi, xp = Factor(0.5, 1.0).X
    assert xi + xp == pytest.approx(1 + math.log(2))


def mp_radius(v):
    """C exp(int_0^1 ln|v/C|), with mpmath quadrature split at the zeros."""
    cuts = sorted({0.0, 1.0, *v.zeros})
    total = mpmath.mpf(0)
    for a, b in zip(cuts, cuts[1:]):
        total += mpmath.quad(lambda x: sum(f.power * mpmath.log(abs(x - f.zero)) for f in v.factors), [a, b])
    return v.C * float(mpmath.exp(total))


@pytest.mark.parametrize("desc", ["x", "|x-0.5|", "3*|x-0.2|^0.5*|x-0.9|^2", "x*(x-1)", "|x-0.37|^1.3"])
def test_closed_form_matches_quadrature(desc):
    v = parse_weight(desc)
    r = spectral_radius(v).r
    assert r == pytest.approx(mp_radius(v), rel=1e-8)
    assert r == pytest.approx(spectral_radius_quadrature(v), rel=1e-8)


def test_normalize_examples():
    v = normalize(parse_weight("x"))
    assert v.C == pytest.approx(math.e, rel=1e-15)
    assert spectral_radius(v).r == pytest.approx(1.0, rel=1e-15)
    h = normalize(parse_weight("|x-0.5|"))
    assert h.C == pytest.approx(2 * math.e, rel=1e-15)


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0.1, 4)), min_size=1, max_size=4), st.floats(0.01, 100))
def test_normalize_is_idempotent(spec, C):
    v = WeightP(C, tuple(Factor(z, s) for z, s in spec))
    n1 = normalize(v)
    assert spectral_radius(n1).r == pytest.approx(1.0, rel=1e-12)
    assert normalize(n1).C == pytest.approx(n1.C, rel=1e-15)


def test_entropy_bounds_and_symmetry():
    xs = np.random.default_rng(0).random(1000)
    for x in xs:
        e = entropy_term(x)
        assert 1.0 <= e <= 1.0 + math.log(2) + 1e-15
        assert e == pytest.approx(entropy_term(1.0 - x), abs=1e-15)
        xi, xp = Factor(x, 1.0).X
        assert xi + xp == pytest.approx(e, abs=1e-14)


def test_product_weight_radius_multiplies():
    pw = ProductWeight.parse("x;|x-0.5|")
    assert pw.d == 2
    assert spectral_radius(pw).r == pytest.approx(math.exp(-1) / (2 * math.e))
    assert pw([0.2, 0.1]) == pytest.approx(0.2 * 0.4)
    assert spectral_radius(normalize(pw)).r == pytest.approx(1.0)


def test_birkhoff_estimates(golden):
    assert birkhoff_radius_estimate(parse_weight("x"), golden, 10**5, 0.1) == pytest.approx(math.exp(-1), abs=1e-2)
    assert birkhoff_radius_estimate(parse_weight("|x-0.5|"), golden, 10**5, 0.1) == pytest.approx(
        1 / (2 * math.e), abs=1e-2)


def test_birkhoff_single_term(golden):
    v = parse_weight("3*|x-0.5|^2")
    assert birkhoff_radius_estimate(v, golden, 1, 0.2) == pytest.approx(eval_weight(v, 0.2), rel=1e-14)


def test_birkhoff_orbit_hits_zero(golden):
    with pytest.raises(OrbitHitsZero):
        birkhoff_radius_estimate(parse_weight("x"), golden, 10, 0.0)
