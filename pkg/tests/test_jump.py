import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_mv
from fracbvp.fractal import FractalCurveSpec, Sphere, build_region
from fracbvp.jump import (
    Extrapolated,
    JumpProblem,
    NotCertifiedError,
    SolutionVariant,
    assemble,
    check_solvability,
    check_uniqueness_window,
    jump_residual,
    log_holder_example_g,
    monogenicity_residual,
    smooth_example_g,
    solve,
    split_data,
)
from fracbvp.oracles import circle_jump_oracle

PROBES = np.array([[0.2, 0.1], [-0.3, 0.4], [1.6, 0.3], [-0.5, -2.0]])


def _circle_problem(**kw):
    return JumpProblem(2, Sphere(2), smooth_example_g(2), 1.0, **kw)


def _rel(a, b):
    return np.abs(a - b).max() / np.abs(b).max()


def test_solvability_thresholds():
    r = check_solvability(0.7, 1.0, 0.642857, 0.625, 2)
    assert r["threshold_inner"] == pytest.approx(1 - 0.642857 / 2)
    assert r["solvable"] and r["solvable_by_inner"] and r["solvable_by_outer"]
    assert len(r["certified_variants"]) == 4
    r = check_solvability(0.6, 1.0, 0.642857, 0.625, 2)
    assert not r["solvable"] and r["certified_variants"] == []


def test_solvability_is_strict():
    r = check_solvability(0.5, 0.5, 1.0, 1.0, 2)
    assert not r["solvable"]


def test_solvability_mixed_parts():
    # even part only clears the inner threshold
    r = check_solvability(0.685, 1.0, 0.642857, 0.625, 2)
    assert r["parts"]["even"] == {"inner": True, "outer": False}
    assert set(r["certified_variants"]) == {"inner,inner", "inner,outer"}


def test_uniqueness_window():
    w = check_uniqueness_window(1.3, 0.9, 0.64, 2)
    assert w["lower"] == pytest.approx(0.3)
    assert w["upper"] == pytest.approx(1 - 2 * 0.1 / 0.64)
    assert w["nonempty"]
    with pytest.raises(ValueError):
        check_uniqueness_window(0.5, 0.9, 0.64, 2)


def test_variant_parsing():
    assert SolutionVariant.parse("inner, outer") == SolutionVariant("inner", "outer")
    assert len(SolutionVariant.all()) == 4
    with pytest.raises(ValueError):
        SolutionVariant.parse("inner")
    with pytest.raises(ValueError):
        SolutionVariant("left", "inner")


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2**31 - 1))
def test_split_assemble_roundtrip(n, seed):
    rng = np.random.default_rng(seed)
    g = random_mv(rng, n, 7)
    for i0 in range(1, n + 1):
        assert np.allclose(assemble(*split_data(g, i0), i0), g, atol=1e-12)


def test_problem_validation():
    with pytest.raises(ValueError):
        JumpProblem(3, Sphere(2), smooth_example_g(2), 1.0)
    with pytest.raises(ValueError):
        _circle_problem(pivot=3)
    with pytest.raises(ValueError):
        JumpProblem(2, Sphere(2), smooth_example_g(2), 1.2)
    with pytest.raises(ValueError):
        JumpProblem(2, Sphere(2), smooth_example_g(2), 0.8, nu_even=0.9, nu_odd=1.0)
    with pytest.raises(ValueError):
        _circle_problem(c=np.zeros(3))


def test_example_data():
    g = log_holder_example_g(2.2)(np.array([[0.0, 0.5], [0.3, -0.2]]))
    assert g[0, 3] == 0.0
    assert g[1, 0] == pytest.approx(-0.06)
    assert g[1, 3] == pytest.approx(0.3 ** (2.2 / 3.2) * np.log(0.3))
    with pytest.raises(ValueError):
        smooth_example_g(4)


@pytest.mark.parametrize("variant", SolutionVariant.all(), ids=lambda v: v.label)
def test_circle_solution_converges_for_every_variant(variant):
    p = _circle_problem()
    ref = circle_jump_oracle(p.g, PROBES, 1, 1.0)
    e = [_rel(solve(p, variant, h).evaluate(PROBES)[0], ref) for h in (2**-6, 2**-7)]
    assert e[1] < 0.01
    assert 1.6 < e[0] / e[1] < 2.4


def test_richardson_improves_accuracy():
    p = _circle_problem()
    ref = circle_jump_oracle(p.g, PROBES, 1, 1.0)
    sol = solve(p, SolutionVariant(), 2**-7, richardson=True)
    assert isinstance(sol, Extrapolated)
    f, ok = sol.evaluate(PROBES)
    assert ok.all() and _rel(f, ref) < 1e-3
    assert sol.provenance["richardson"]


def test_value_at_infinity_is_added():
    c = np.array([1.0, -2.0, 0.5, 0.25])
    a = solve(_circle_problem(), SolutionVariant(), 2**-6)(PROBES)
    b = solve(_circle_problem(c=c), SolutionVariant(), 2**-6)(PROBES)
    assert np.allclose(b - a, c, atol=1e-12)


def test_other_pivot_matches_oracle():
    p = _circle_problem(pivot=2)
    ref = circle_jump_oracle(p.g, PROBES, 2, 1.0)
    assert _rel(solve(p, SolutionVariant(), 2**-7, richardson=True)(PROBES), ref) < 1e-3


def test_jump_residual_and_monogenicity():
    sol = solve(_circle_problem(), SolutionVariant(), 2**-7, richardson=True)
    r = jump_residual(sol, eps=0.1, n_probes=64)
    assert r["n_used"] > 0 and r["max"] < 0.05
    m = monogenicity_residual(sol, [[0.0, 0.0], [0.2, -0.1], [2.0, 0.5]])
    assert 1.5 <= m["slope"] <= 2.5
    with pytest.raises(ValueError):
        monogenicity_residual(sol, [[0.99, 0.0]])


def test_three_dimensional_solution_is_monogenic():
    p = JumpProblem(3, Sphere(3), smooth_example_g(3), 1.0, pivot=2)
    sol = solve(p, SolutionVariant(), 2**-4)
    m = monogenicity_residual(sol, [[0.0, 0.0, 0.1], [0.0, 2.0, 0.0]], spacings=(0.04, 0.02))
    assert m["slope"] > 1.5
    assert all(v > 0 for v in sol.provenance["staircase_nodes"].values())


def test_uncertified_variant_is_refused():
    reg = build_region(FractalCurveSpec(1.05, 2.2, 4))
    p = JumpProblem(2, reg, log_holder_example_g(2.2), 0.6)
    assert not p.solvability()["solvable"]
    with pytest.raises(NotCertifiedError):
        solve(p, SolutionVariant(), 2**-5)
    sol = solve(p, SolutionVariant(), 2**-5, unsafe=True)
    assert not sol.provenance["certified"]


def test_valid_mask_excludes_boundary_band():
    sol = solve(_circle_problem(), SolutionVariant(), 2**-6)
    ok = sol.valid(np.array([[0.99, 0.0], [0.5, 0.0], [1.01, 0.0]]))
    assert ok.tolist() == [False, True, False]
