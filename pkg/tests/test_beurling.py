import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bishoplab.beurling import (BeurlingSymbol, algebra_norm, arc_mask, bump, cover_and_invert, rotate_symbol,
                                symbol_product)
from bishoplab.errors import NotCovering, TailNotSummable
from bishoplab.operator import BeurlingWeightFn

W1 = BeurlingWeightFn(1.0)
TS = np.arange(10_000) / 10_000


def cos_symbol(w=W1):
    return BeurlingSymbol.from_dict({-1: 0.5, 1: 0.5}, w)


def random_symbol(rng, w, radius=6):
    n = rng.integers(1, radius + 1)
    coeffs = rng.normal(size=2 * n + 1) + 1j * rng.normal(size=2 * n + 1)
    return BeurlingSymbol(-n, coeffs, w, float(rng.random() * 0.1))


# -- norm and arithmetic ------------------------------------------------------------------

def test_norm_of_constant():
    assert algebra_norm(BeurlingSymbol.constant(1.0, W1)) == 1.0


def test_norm_of_cosine():
    w1 = 1 / math.log(math.e + 1) ** 1.25
    assert algebra_norm(cos_symbol()) == pytest.approx(math.exp(w1), rel=1e-15)
    assert algebra_norm(cos_symbol()) == pytest.approx(2.0366, abs=1e-4)


def test_norm_is_homogeneous():
    s = cos_symbol()
    for c in (2.0, -3.5, 1j, 0.3 - 0.4j):
        assert algebra_norm(s.scale(c)) == pytest.approx(abs(c) * algebra_norm(s), rel=1e-15)


def test_product_unit_and_cosine_square():
    one = BeurlingSymbol.constant(1.0, W1)
    s = cos_symbol()
    assert np.array_equal(symbol_product(one, s).coeffs, s.coeffs)
    sq = symbol_product(s, s)
    assert sq.offset == -2
    assert np.allclose(sq.coeffs, [0.25, 0, 0.5, 0, 0.25], atol=1e-16)


def test_product_is_pointwise_product():
    rng = np.random.default_rng(1)
    a, b = random_symbol(rng, W1), random_symbol(rng, W1)
    ts = rng.random(50)
    assert np.allclose(symbol_product(a, b).evaluate(ts), a.evaluate(ts) * b.evaluate(ts), atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1.0, 4.0, 8.0]))
def test_submultiplicative(seed, eps):
    w = BeurlingWeightFn(eps)
    rng = np.random.default_rng(seed)
    a, b = random_symbol(rng, w, 30), random_symbol(rng, w, 30)
    assert algebra_norm(symbol_product(a, b)) <= algebra_norm(a) * algebra_norm(b) * (1 + 1e-12)


def test_parseval_synthesis():
    rng = np.random.default_rng(4)
    s = random_symbol(rng, W1, 40)
    G = 512
    assert np.allclose(s.grid_values(G), s.evaluate(np.arange(G) / G), atol=1e-10)


def test_truncated_and_trimmed_keep_the_norm():
    rng = np.random.default_rng(9)
    s = random_symbol(rng, W1, 20)
    assert algebra_norm(s.truncated(3)) == pytest.approx(algebra_norm(s), rel=1e-14)
    assert algebra_norm(s.trimmed(5.0)) == pytest.approx(algebra_norm(s), rel=1e-14)


def test_json_roundtrip():
    s = BeurlingSymbol.from_dict({-2: 0.5j, 3: 1 - 2j}, W1, tail_bound=1e-9, support=(0.1, 0.4))
    r = BeurlingSymbol.from_json(s.to_json())
    assert np.array_equal(r.coeffs, s.coeffs) and r.offset == s.offset
    assert r.tail_bound == s.tail_bound and r.support == s.support and r.weight == s.weight


# -- rotations ------------------------------------------------------------------------------

def test_rotation_identities():
    rng = np.random.default_rng(2)
    s = random_symbol(rng, W1, 10)
    for delta in (0.0, 1.0):
        assert np.allclose(rotate_symbol(s, delta).coeffs, s.coeffs, rtol=0, atol=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.floats(-3, 3))
def test_rotation_is_a_translate(delta):
    rng = np.random.default_rng(3)
    s = random_symbol(rng, W1, 10)
    r = rotate_symbol(s, delta)
    ts = rng.random(20)
    assert np.allclose(r.evaluate(ts), s.evaluate(ts + delta), atol=1e-12)
    assert algebra_norm(r) == pytest.approx(algebra_norm(s), rel=1e-15)


# -- bumps ------------------------------------------------------------------------------------

def test_single_factor_bump_is_the_arc_indicator():
    s = bump(0.25, 0.1, W1, K=1, N_trunc=60)
    n = s.indices
    assert np.allclose(s.coeffs, np.sinc(2 * n * 0.1) * np.exp(-2j * np.pi * n * 0.25), atol=1e-15)
    assert s.tail_bound == math.inf


def test_finite_product_bump_grid_certificates():
    s = bump(0.25, 0.1, W1, K=40, N_trunc=2**16)
    v = s.grid_values(10_000).real
    assert np.abs(v[~arc_mask(TS, s.support)]).max() <= 1e-8
    assert v.min() >= -1e-12
    assert s.coef(0) == pytest.approx(1.0, abs=1e-15)
    # polynomial coefficient decay cannot beat e^{w(n)}: no finite certificate
    assert s.tail_bound == math.inf


def test_bump_certificates(phi):
    assert math.isfinite(algebra_norm(phi))
    assert phi.tail_bound <= 1e-8
    v = phi.grid_values(10_000)
    assert np.abs(v.imag).max() <= 1e-12
    assert v.real.min() >= -phi.tail_bound
    assert np.abs(v.real[~arc_mask(TS, phi.support)]).max() <= 1e-8
    assert phi.coef(0) == pytest.approx(1.0, abs=1e-15)
    assert phi.is_real
    assert phi.support == pytest.approx((0.15, 0.35))


def test_bump_tail_request(w8):
    with pytest.raises(TailNotSummable):
        bump(0.25, 0.1, w8, N_trunc=2**7, tail_tol=1e-8)
    with pytest.raises(ValueError):
        bump(0.25, 0.6, w8)


def test_disjoint_bumps_multiply_to_zero(phi, psi):
    prod = symbol_product(phi, psi)
    assert algebra_norm(prod) <= 1e-6
    grid = np.abs(prod.grid_values(10_000)).max()
    assert grid <= algebra_norm(prod)


def test_rotated_bump_lands_on_the_other_bump(phi, psi):
    r = rotate_symbol(phi, 0.5)
    assert np.allclose(r.grid_values(10_000), psi.grid_values(10_000), atol=1e-10)
    assert np.allclose(np.abs(r.coeffs), np.abs(phi.coeffs), rtol=1e-15, atol=0)
    assert r.support[0] == pytest.approx(0.65)


# -- covering ---------------------------------------------------------------------------------

def test_cover_constant():
    G, Psi, rep = cover_and_invert(BeurlingSymbol.constant(1.0, W1), 0.3)
    assert rep.N == 4
    assert G.coef(0) == pytest.approx(5.0)
    assert Psi.coef(0) == pytest.approx(0.2, abs=1e-15)
    assert algebra_norm(Psi) == pytest.approx(0.2, abs=1e-12)


def test_cover_bump(phi):
    G, Psi, rep = cover_and_invert(phi, 0.15)
    assert rep.N == 7
    assert rep.min_G > 0
    assert rep.residual <= 1e-8
    assert math.isfinite(rep.psi_norm)
    gv = G.grid_values(10_000).real
    assert np.abs(gv * Psi.grid_values(10_000) - 1).max() == pytest.approx(rep.residual)


def test_cover_gap(phi):
    with pytest.raises(NotCovering):
        cover_and_invert(phi, 0.5)
