from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bishoplab import circle
from bishoplab.diophantine import IrrationalSpec
from bishoplab.errors import NotErgodic
from bishoplab.orbit import ProductRotation, Rotation

u128 = st.integers(min_value=0, max_value=(1 << 128) - 1)


@given(st.lists(u128, min_size=1, max_size=8))
def test_int_words_roundtrip(vals):
    assert circle.to_ints(circle.from_ints(vals, 2)) == vals


@given(u128, u128)
def test_add_sub_wrap_like_integers_mod_one(a, b):
    one = 1 << 128
    A, B = circle.from_ints([a], 2), circle.from_ints([b], 2)
    assert circle.to_ints(circle.add(A, B)) == [(a + b) % one]
    d, borrow = circle.sub(A, B)
    assert circle.to_ints(d) == [(a - b) % one]
    assert bool(borrow[0]) == (a < b)


@given(u128, u128)
def test_signed_diff_is_plain_absolute_difference(a, b):
    d, neg = circle.signed_diff(circle.from_ints([a], 2), circle.from_ints([b], 2))
    assert circle.to_ints(d) == [abs(a - b)]
    assert bool(neg[0]) == (a < b)


@given(st.floats(min_value=0.0, max_value=1.0, exclude_max=True))
def test_float_to_int_is_exact_floor(x):
    assert circle.float_to_int(x, 128) == int(Fraction(x) * (1 << 128))


def test_rotation_matches_exact_surd_orbit(golden):
    # oracle: Fraction arithmetic on the certified interval
    lo, hi = golden.alpha.interval(256)
    for k in (1, 7, 1000, -1, -999):
        y = golden(0.1, k)
        exact = (Fraction(0.1) + k * (lo + hi) / 2) % 1
        assert abs(y - float(exact)) < 1e-15


def test_inverse_undoes_step(golden):
    xs = np.random.default_rng(1).random(200)
    for x in xs:
        assert abs(golden.inverse(golden(x)) - x) < 1e-15


def test_rotation_preserves_interval_length(golden):
    # |tau^{-1}(I)| = |I|: the preimage of [a, b) is [a - alpha, b - alpha) mod 1
    for a, b in [(0.1, 0.3), (0.5, 0.95), (0.0, 0.618)]:
        pa, pb = golden.inverse(a), golden.inverse(b)
        assert abs(((pb - pa) % 1.0) - (b - a)) < 1e-15


def test_orbit_cache_positions_and_index(golden):
    oc = golden.orbit([0.25, 0.5], -3, 4)
    assert oc.positions().shape == (2, 8)
    assert oc.index(0) == 3
    assert oc.positions()[0, oc.index(0)] == 0.25
    assert abs(oc.positions()[1, oc.index(2)] - golden(0.5, 2)) < 1e-16


def test_rational_rotation_is_not_ergodic():
    rot = Rotation.of("1/3")
    with pytest.raises(NotErgodic, match="period 3"):
        rot.require_ergodic()


def test_product_rotation_acts_coordinatewise():
    pr = ProductRotation.of(["golden", "sqrt2"])
    y = pr([0.1, 0.2])
    assert abs(y[0] - Rotation.of("golden")(0.1)) < 1e-16
    assert abs(y[1] - ((0.2 + 2**0.5 - 1) % 1)) < 1e-15
    with pytest.raises(NotErgodic):
        ProductRotation((Rotation.of("golden"), Rotation(IrrationalSpec.rational(1, 2)))).require_ergodic()
