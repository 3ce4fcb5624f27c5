import numpy as np
import pytest
from scipy import integrate

from fracbvp.clifford import generator_arr, gp_arr
from fracbvp.fields import MultivectorField
from fracbvp.fractal import Sphere
from fracbvp.teodorescu import box_kernel_integrals, build_staircase, teodorescu


def _brute_2d(lo, hi, k):
    f = lambda y, x: (x, y)[k] / (x * x + y * y)
    return integrate.dblquad(f, lo[0], hi[0], lo[1], hi[1], epsabs=1e-12)[0]


@pytest.mark.parametrize("lo,hi", [((0.2, -0.3), (0.7, 0.4)), ((-1.0, 0.1), (-0.2, 0.9))])
def test_planar_box_integrals_match_quadrature(lo, hi):
    got = box_kernel_integrals(np.array(lo), np.array(hi))
    for k in range(2):
        assert got[k] == pytest.approx(_brute_2d(lo, hi, k), rel=1e-8)


def test_spatial_box_integral_matches_quadrature():
    lo, hi = np.array([0.3, -0.2, 0.1]), np.array([0.8, 0.5, 0.6])
    got = box_kernel_integrals(lo, hi)
    for k in range(3):
        f = lambda z, y, x: (x, y, z)[k] / (x * x + y * y + z * z) ** 1.5
        ref = integrate.tplquad(f, lo[0], hi[0], lo[1], hi[1], lo[2], hi[2], epsabs=1e-10)[0]
        assert got[k] == pytest.approx(ref, rel=1e-7)


@pytest.mark.parametrize("m", [2, 3])
def test_centred_box_integral_vanishes(m):
    got = box_kernel_integrals(-0.5 * np.ones(m), 0.5 * np.ones(m))
    assert np.allclose(got, 0.0, atol=1e-12)


def test_box_integrals_reject_high_dimension():
    with pytest.raises(NotImplementedError):
        box_kernel_integrals(np.zeros(4), np.ones(4))


@pytest.mark.parametrize("m,h", [(2, 0.02), (3, 0.05)])
def test_staircase_reproduces_unit_density(m, h):
    lo, hi = -1.5 * np.ones(m), 1.5 * np.ones(m)
    x = np.zeros((2, m))
    x[1, 0] = 3.0
    for side, inside_val in (("inner", 1.0), ("outer", -1.0)):
        st = build_staircase(Sphere(m), h, side, lo, hi)
        d = np.zeros((len(st), 2**m))
        d[:, 0] = 1.0
        s = st.cauchy_sum(d, x, "vector", m, 1, "left")
        assert s[0, 0] == pytest.approx(inside_val, abs=1e-8)
        assert np.allclose(s[0, 1:], 0.0, atol=1e-8)
        assert np.allclose(s[1], 0.0, atol=1e-8)
        assert np.all(np.abs(np.abs(st.sign) - 1) == 0)


def test_staircase_clearance_shrinks_union():
    lo, hi = -1.5 * np.ones(2), 1.5 * np.ones(2)
    a = build_staircase(Sphere(2), 0.02, "inner", lo, hi)
    b = build_staircase(Sphere(2), 0.02, "inner", lo, hi, clearance=0.5)
    assert np.max(np.hypot(*b.points.T)) < np.max(np.hypot(*a.points.T))
    with pytest.raises(ValueError):
        build_staircase(Sphere(2), 0.02, "middle", lo, hi)


def _bump(p):
    r2 = (p**2).sum(1)
    g = np.exp(-r2 / 0.05)
    v = np.zeros((len(p), 4))
    v[:, 0], v[:, 1], v[:, 3] = g, p[:, 0] * g, 0.5 * g
    return v


def test_dirac_of_teodorescu_is_identity():
    F = MultivectorField.from_function(_bump, (-1.0, -1.0), 0.01, (201, 201))
    x0 = np.array([[0.1, 0.05], [-0.2, 0.1]])
    dl = 1e-3
    acc = 0.0
    for k in range(2):
        e = np.zeros(2)
        e[k] = dl
        d = (teodorescu(F, x0 + e) - teodorescu(F, x0 - e)) / (2 * dl)
        acc = acc + gp_arr(generator_arr(2, k + 1)[None], d)
    assert np.allclose(acc, _bump(x0), atol=2e-3)


def test_teodorescu_side_check():
    F = MultivectorField.from_function(_bump, (-1.0, -1.0), 0.1, (21, 21))
    with pytest.raises(ValueError):
        teodorescu(F, [[0.0, 0.0]], side="up")
