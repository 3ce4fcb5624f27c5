import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fracbvp.clifford import (
    Multivector,
    alpha_iso,
    alpha_iso_inv,
    beta_arr,
    beta_inv_arr,
    beta_iso,
    beta_iso_inv,
    blade_label,
    blade_mask,
    conj_arr,
    conjugate,
    generator_arr,
    geometric_product,
    gp_arr,
    parse_blade_label,
    recompose,
    recompose_arr,
    split_arr,
    split_even_odd,
)

from conftest import random_mv, rel_err

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)


def e(n, *idx):
    return Multivector.blade(n, idx)


def test_generator_squares_and_anticommutation():
    for n in range(1, 7):
        one = Multivector.scalar(n)
        for i in range(1, n + 1):
            assert e(n, i) * e(n, i) == -one
            for j in range(i + 1, n + 1):
                assert (e(n, i) * e(n, j) + e(n, j) * e(n, i)).norm() == 0


def test_product_examples():
    assert e(2, 1) * e(2, 2) == e(2, 1, 2)
    assert e(2, 2) * e(2, 1) == -e(2, 1, 2)
    assert e(2, 1, 2) * e(2, 1, 2) == -Multivector.scalar(2)


def test_conjugation_examples():
    assert conjugate(Multivector.scalar(3)) == Multivector.scalar(3)
    assert conjugate(e(2, 1)) == -e(2, 1)
    assert conjugate(e(2, 1, 2)) == -e(2, 1, 2)


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        geometric_product(e(2, 1), e(3, 1))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_associativity_randomized(rng, n):
    a, b, c = (random_mv(rng, n, 2000) for _ in range(3))
    assert rel_err(gp_arr(gp_arr(a, b), c), gp_arr(a, gp_arr(b, c))) <= 1e-12


@pytest.mark.parametrize("n", [2, 3, 4])
def test_conjugation_anti_involution(rng, n):
    a, b = random_mv(rng, n, 2000), random_mv(rng, n, 2000)
    assert np.array_equal(conj_arr(conj_arr(a)), a)
    assert rel_err(conj_arr(gp_arr(a, b)), gp_arr(conj_arr(b), conj_arr(a))) <= 1e-12


@pytest.mark.parametrize("n", [2, 3, 4])
def test_split_recompose_exact(rng, n):
    a = random_mv(rng, n, 500)
    for i0 in range(1, n + 1):
        a0, a1 = split_arr(a, i0)
        assert np.allclose(recompose_arr(a0, a1, i0), a, rtol=0, atol=1e-14)
        odd = np.array([bin(m).count("1") % 2 for m in range(1 << n)], bool)
        assert not a0[:, odd].any() and not a1[:, odd].any()


def test_split_examples():
    p = split_even_odd(Multivector.scalar(2), 1)
    assert p.even == Multivector.scalar(2) and p.odd_cofactor.norm() == 0
    p = split_even_odd(e(2, 1), 1)
    assert p.even.norm() == 0 and p.odd_cofactor == Multivector.scalar(2)
    x1, x2 = 0.3, -1.7
    a = x1 * e(2, 1) - x2 * e(2, 2)
    p = split_even_odd(a, 1)
    assert p.odd_cofactor.allclose(x1 * Multivector.scalar(2) + x2 * e(2, 1, 2))
    assert recompose(p).allclose(a)
    with pytest.raises(ValueError):
        split_even_odd(a, 3)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_beta_homomorphism_and_inverse(rng, n):
    a, b = random_mv(rng, n, 2000, even=True), random_mv(rng, n, 2000, even=True)
    for i0 in range(1, n + 1):
        lhs = beta_arr(gp_arr(a, b), i0)
        rhs = gp_arr(beta_arr(a, i0), beta_arr(b, i0))
        assert rel_err(lhs, rhs) <= 1e-12
        assert np.array_equal(beta_inv_arr(beta_arr(a, i0), i0), a)


def test_beta_examples_and_errors():
    assert beta_iso(Multivector.scalar(2), 1) == Multivector.scalar(1)
    assert beta_iso(e(2, 1, 2), 1) == e(1, 1)
    sq = beta_iso(e(2, 1, 2) * e(2, 1, 2), 1)
    assert sq == beta_iso(e(2, 1, 2), 1) * beta_iso(e(2, 1, 2), 1) == -Multivector.scalar(1)
    assert beta_iso_inv(e(1, 1), 1) == e(2, 1, 2)
    with pytest.raises(ValueError):
        beta_iso(e(2, 1), 1)


def test_alpha_examples_and_round_trip(rng):
    assert alpha_iso(e(2, 1), 1) == Multivector.scalar(1)
    assert alpha_iso(e(2, 2), 1) == e(1, 1)
    y = alpha_iso(3 * e(2, 1) + 5 * e(2, 2), 2)
    assert y == 5 * Multivector.scalar(1) + 3 * e(1, 1)
    for n in (2, 3, 4):
        x = Multivector.vector(rng.normal(size=n))
        for i0 in range(1, n + 1):
            assert alpha_iso_inv(alpha_iso(x, i0), i0).allclose(x)
    with pytest.raises(ValueError):
        alpha_iso(e(2, 1, 2), 1)


def test_blade_labels_round_trip():
    for n in range(1, 6):
        for m in range(1 << n):
            assert parse_blade_label(blade_label(m)) == m
    assert blade_label(0) == "" and blade_label(blade_mask([1, 2])) == "1,2"


def test_json_round_trip():
    a = Multivector(3, np.arange(8, dtype=float))
    doc = json.loads(a.to_json())
    assert doc["n"] == 3 and doc["coeffs"]["1,2"] == 3.0
    assert Multivector.from_json(a.to_json()) == a


def test_norm_zero_iff_zero():
    assert Multivector(3).norm() == 0
    assert e(3, 2).norm() == 1


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, 8, elements=finite), arrays(np.float64, 8, elements=finite), st.integers(1, 3))
def test_property_split_and_conjugate_product(a, b, i0):
    a0, a1 = split_arr(a, i0)
    assert np.allclose(recompose_arr(a0, a1, i0), a, atol=1e-12)
    lhs = conj_arr(gp_arr(a, b))
    assert np.allclose(lhs, gp_arr(conj_arr(b), conj_arr(a)), atol=1e-9 * (1 + np.abs(lhs).max()))


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, 8, elements=finite))
def test_property_submultiplicative(a):
    rng = np.random.default_rng(0)
    b = rng.normal(size=8)
    # dense Cl(3) product is bounded by 2**n times the product of norms
    assert np.linalg.norm(gp_arr(a, b)) <= 8 * np.linalg.norm(a) * np.linalg.norm(b) + 1e-12


def test_generator_arr_matches_blade():
    assert np.array_equal(generator_arr(3, 2), e(3, 2).coeffs)
