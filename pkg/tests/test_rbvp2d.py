import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracbvp.fractal import Sphere
from fracbvp.jump import SolutionVariant, smooth_example_g, solve
from fracbvp.oracles import circle_index_one_oracle, index_one_coefficient, reduced_coordinate, to_complex
from fracbvp.rbvp2d import (
    BranchError,
    CoefficientProblem,
    UndersamplingError,
    complex_to_even,
    even_to_complex,
    moment_conditions,
    rbvp_residual,
    solve_rbvp,
    unwrap_log,
    winding_index,
)
from fracbvp.teodorescu import build_staircase

CIRCLE = Sphere(2)
T = np.exp(2j * np.pi * np.arange(400) / 400)


def _power(k, pivot=1):
    return lambda x: complex_to_even(reduced_coordinate(x, pivot) ** k, pivot)


def _problem(G, **kw):
    return CoefficientProblem(CIRCLE, G, smooth_example_g(2), 1.0, **kw)


def _probes(seed=0, n=60):
    rng = np.random.default_rng(seed)
    rad = np.concatenate([rng.uniform(0.0, 0.9, n // 2), rng.uniform(1.1, 2.5, n - n // 2)])
    ang = rng.uniform(0.0, 2 * np.pi, n)
    return np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])


@settings(max_examples=50, deadline=None)
@given(st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False), st.integers(1, 2))
def test_complex_bridge_roundtrip(w, i0):
    a = complex_to_even(np.array([w]), i0)
    assert a[0, 1] == 0 and a[0, 2] == 0
    assert even_to_complex(a, i0)[0] == pytest.approx(w, abs=1e-12)


def test_bridge_values_and_products():
    assert even_to_complex(np.array([[0.3, 0.0, 0.0, 0.7]]))[0] == pytest.approx(0.3 + 0.7j)
    with pytest.raises(ValueError):
        even_to_complex(np.array([[1.0, 0.5, 0.0, 0.0]]))


@pytest.mark.parametrize("k", [0, 1, 2, -3])
def test_winding_of_powers(k):
    assert winding_index(T**k) == (k, -k)
    assert winding_index((T**k)[::-1], orientation=-1) == (k, -k)
    assert winding_index(np.conj(T**k)) == (-k, k)


def test_winding_is_additive():
    a, b = T * (2 + T.real), T**2 * np.exp(0.3 * T)
    assert winding_index(a * b)[0] == winding_index(a)[0] + winding_index(b)[0]


def test_winding_errors():
    with pytest.raises(UndersamplingError):
        winding_index(np.exp(2j * np.pi * np.arange(10) / 10) ** 5)
    with pytest.raises(ValueError):
        winding_index(np.array([1.0, 0.0, 1j]))


def test_unwrap_log_closes_for_index_zero():
    w = np.exp(0.4 * T) * (3 + T)
    L = unwrap_log(w)
    assert np.allclose(np.exp(L), w)
    assert np.max(np.abs(np.diff(L.imag))) < 0.1
    with pytest.raises(BranchError):
        unwrap_log(T)


def test_problem_index_and_checks():
    assert _problem(_power(0)).index() == (0, 0)
    assert _problem(_power(-2)).index() == (-2, 2)
    G1 = lambda x: complex_to_even(index_one_coefficient(reduced_coordinate(x, 1)), 1)
    assert _problem(G1).index() == (1, -1)
    assert _problem(_power(1, pivot=2), pivot=2).index() == (1, -1)
    with pytest.raises(ValueError):
        _problem(lambda x: np.tile([0.0, 0.0, 0.0, 0.0], (len(x), 1))).index()
    with pytest.raises(ValueError):
        _problem(lambda x: np.tile([1.0, 0.2, 0.0, 0.0], (len(x), 1))).index()
    with pytest.raises(ValueError):
        CoefficientProblem(Sphere(3), _power(0), smooth_example_g(3), 1.0)


def test_index_zero_with_unit_coefficient_is_the_jump_solver():
    p = _problem(_power(0))
    x = _probes(1, 40)
    a, oka = solve_rbvp(p, SolutionVariant(), 2**-6).evaluate(x)
    b, okb = solve(p.jump_problem, SolutionVariant(), 2**-6).evaluate(x)
    assert a.tobytes() == b.tobytes()
    assert oka.tobytes() == okb.tobytes()


def test_index_one_matches_closed_form():
    G = lambda x: complex_to_even(index_one_coefficient(reduced_coordinate(x, 1)), 1)
    p = _problem(G)
    sol = solve_rbvp(p, SolutionVariant(), 2**-7, richardson=True)
    x = _probes()
    ref, X = circle_index_one_oracle(p.g, x)
    num, ok = sol.evaluate(x)
    assert ok.all()
    assert np.abs(num - ref).max() / np.abs(ref).max() < 2e-3
    assert np.abs(sol.fine.canonical(x) - X).max() / np.abs(X).max() < 5e-3
    r = sol.fine.report
    assert r["index"] == 1 and r["solvable"] and r["conditions_complex_per_branch"] == 0
    assert r["trace_ratio_max_error"] < 1e-10
    res = rbvp_residual(sol, eps=0.1, n_probes=64)
    assert res["max"] < 0.05


def test_negative_index_family():
    p = _problem(_power(-1))
    base = solve_rbvp(p, SolutionVariant(), 2**-6)
    assert base.report["polynomial_degree"] == 1
    assert base.report["free_real_parameters"] == 8
    polys = (np.array([1.0 + 2.0j, -0.5j]), np.array([0.3]))
    fam = solve_rbvp(p, SolutionVariant(), 2**-6, polynomials=polys)
    x = _probes(2, 20)
    z = reduced_coordinate(x, 1)
    X = base.canonical(x)
    u0a, u1a, _ = base.upsilon(x)
    u0b, u1b, _ = fam.upsilon(x)
    assert np.allclose(to_complex(u0b) - to_complex(u0a), X * np.polyval(polys[0][::-1], z), atol=1e-10)
    assert np.allclose(to_complex(u1b) - to_complex(u1a), X * 0.3, atol=1e-10)
    with pytest.raises(ValueError):
        solve_rbvp(p, SolutionVariant(), 2**-6, polynomials=(np.zeros(3), np.zeros(1)))


def test_positive_index_refuses_polynomials():
    with pytest.raises(ValueError):
        solve_rbvp(_problem(_power(2)), SolutionVariant(), 2**-6, polynomials=([1.0], []))


def test_index_two_counts_conditions():
    sol = solve_rbvp(_problem(_power(2)), SolutionVariant(), 2**-6)
    r = sol.report
    assert r["conditions_complex_per_branch"] == 1
    assert r["conditions_real_per_branch"] == 2
    assert r["conditions_complex_total"] == 2
    assert r["polynomial_degree"] is None and r["free_real_parameters"] == 0
    assert not r["solvable"] and r["failed_moments"]
    # a datum with zero branch data satisfies every condition
    zero = CoefficientProblem(CIRCLE, _power(2), lambda x: np.zeros((len(x), 4)), 1.0)
    r0 = solve_rbvp(zero, SolutionVariant(), 2**-6).report
    assert r0["solvable"]
    assert all(np.allclose(m, 0.0) for b in r0["moments"].values() for m in b)


def test_moments_of_constant_density_vanish():
    st_ = build_staircase(CIRCLE, 2**-6, "inner", -1.5 * np.ones(2), 1.5 * np.ones(2))
    dens = np.zeros((len(st_), 2))
    assert moment_conditions(st_, dens, 3, 0.0) == [0.0, 0.0]
    dens[:, 0] = 1.0
    m = moment_conditions(st_, dens, 2, 0.0)
    assert abs(m[0]) < 1e-10
    assert moment_conditions(st_, dens, 1, 0.0) == []


def test_moments_are_linear_in_density():
    st_ = build_staircase(CIRCLE, 2**-6, "inner", -1.5 * np.ones(2), 1.5 * np.ones(2))
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(2, len(st_), 2))
    ma, mb = (np.array(moment_conditions(st_, d, 3, 0.1 + 0.2j)) for d in (a, b))
    mab = np.array(moment_conditions(st_, 2 * a - b, 3, 0.1 + 0.2j))
    assert np.allclose(mab, 2 * ma - mb, atol=1e-12)
    assert np.all(np.abs(ma) > 0)


def test_part_exponents_reach_the_certificate():
    p = CoefficientProblem(CIRCLE, _power(0), smooth_example_g(2), 0.6, nu_even=0.6, nu_odd=1.0)
    cert = p.jump_problem.solvability()
    assert cert["nu_odd"] == 1.0 and cert["nu_even"] == 0.6
    with pytest.raises(ValueError):
        CoefficientProblem(CIRCLE, _power(0), smooth_example_g(2), 0.6, nu_even=0.7, nu_odd=1.0)
