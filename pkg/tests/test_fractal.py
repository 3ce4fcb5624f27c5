import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracbvp.fractal import (
    MAX_RECTS,
    FractalCurveSpec,
    ResourceError,
    Sphere,
    build_region,
    cutoff_rho,
    region_json,
    region_svg,
    sample_polyline,
)


def shoelace(poly):
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def test_spec_validation():
    for bad in [(0.5, 2.0, 3), (1.0, 0.5, 3), (1.0, 2.0, 0), (1.0, 2.0, 2.5)]:
        with pytest.raises(ValueError):
            FractalCurveSpec(*bad)


def test_census_small_case():
    s = FractalCurveSpec(1.05, 2.2, 3)
    assert [s.floor_mbeta(m) for m in (1, 2, 3)] == [2, 4, 6]
    assert [s.count(m) for m in (1, 2, 3)] == [4, 16, 64]
    assert s.spacing(3) == 2.0**-9
    assert s.width(3) == pytest.approx(0.5 * 2.0 ** (-9 * 1.05))
    assert s.n_rects() == 1 + 4 + 16 + 64


def test_floor_is_exact_in_decimal():
    assert FractalCurveSpec(1.0, 1.15, 1).floor_mbeta(20) == 23
    assert FractalCurveSpec(1.0, 2.2, 1).floor_mbeta(5) == 11


@settings(max_examples=60, deadline=None)
@given(st.floats(1.0, 2.0), st.floats(1.0, 3.0), st.integers(1, 8))
def test_property_census(alpha, beta, depth):
    s = FractalCurveSpec(alpha, beta, depth)
    for m in range(1, depth + 1):
        k = s.floor_mbeta(m)
        assert s.count(m) == 2**k
        assert s.spacing(m) == math.ldexp(1.0, -m - k)
        assert 0 < s.width(m) <= 0.5 * s.spacing(m)
    assert s.n_rects() == 1 + sum(2 ** s.floor_mbeta(m) for m in range(1, depth + 1))


def test_teeth_fit_in_unit_interval():
    reg = build_region(FractalCurveSpec(1.05, 2.2, 5))
    for m in range(1, 6):
        r = reg.level_rects(m)
        assert r[:, 0].min() > 0 and r[:, 2].max() <= 1.0 + 1e-15
        assert np.all(r[1:, 0] > r[:-1, 2])


def test_rectangle_cap_enforced_lazily():
    reg = build_region(FractalCurveSpec(1.2, 3.0, 8))
    assert reg.n_rects > MAX_RECTS
    assert reg.inside([[0.5, -0.5]])[0]
    with pytest.raises(ResourceError):
        reg.rects()


def test_polyline_area_and_orientation():
    reg = build_region(FractalCurveSpec(1.05, 2.2, 4))
    poly = reg.polyline()
    r = reg.rects()
    area = np.sum((r[:, 2] - r[:, 0]) * (r[:, 3] - r[:, 1]))
    assert shoelace(poly) == pytest.approx(area, rel=1e-12)
    assert shoelace(poly) > 0


def test_distance_is_lipschitz_and_consistent(rng):
    reg = build_region(FractalCurveSpec(1.05, 2.2, 4))
    x = rng.uniform([-0.2, -1.2], [1.2, 0.7], size=(400, 2))
    y = x + rng.normal(scale=0.01, size=x.shape)
    d = np.abs(reg.dist(x) - reg.dist(y))
    assert np.all(d <= np.linalg.norm(x - y, axis=1) + 1e-12)
    dense = sample_polyline(reg.polyline(), 1e-4)
    from scipy.spatial import cKDTree

    ref = cKDTree(dense).query(x)[0]
    assert np.all(reg.dist(x) <= ref + 1e-12) and np.max(ref - reg.dist(x)) < 1e-4


def test_inside_agrees_with_rectangles(rng):
    reg = build_region(FractalCurveSpec(1.05, 2.2, 3))
    r = reg.rects()
    x = rng.uniform([-0.1, -1.1], [1.1, 0.6], size=(3000, 2))
    brute = np.zeros(len(x), bool)
    for x0, y0, x1, y1 in r:
        brute |= (x[:, 0] >= x0) & (x[:, 0] <= x1) & (x[:, 1] >= y0) & (x[:, 1] <= y1)
    assert np.array_equal(reg.inside(x), brute)


def test_normals_point_outward():
    reg = build_region(FractalCurveSpec(1.05, 2.2, 3))
    pts = np.array([[0.5, -1.0], [0.0, -0.5], [1.0, -0.5]])
    n = reg.normals(pts)
    assert np.allclose(n, [[0, -1], [-1, 0], [1, 0]])


def test_region_json_and_svg():
    reg = build_region(FractalCurveSpec(1.05, 2.2, 3))
    doc = region_json(reg)
    assert doc["depth"] == 3 and len(doc["rects"]) == reg.n_rects
    root = ET.fromstring(region_svg(reg))
    assert root.tag.endswith("svg") and root.find("{http://www.w3.org/2000/svg}path") is not None


def test_sphere_geometry():
    c = Sphere(2, 2.0, center=[1.0, 0.0])
    assert c.inside([[1.0, 1.0]])[0] and not c.inside([[4.0, 0.0]])[0]
    assert c.dist([[1.0, 0.0]])[0] == 2.0
    pts = c.boundary_samples(0.01)
    assert np.allclose(c.dist(pts), 0.0, atol=1e-12)
    s3 = Sphere(3)
    assert np.allclose(np.linalg.norm(s3.boundary_samples(0.2), axis=1), 1.0)
    with pytest.raises(ValueError):
        Sphere(2, -1.0)


def test_cutoff_rho():
    rho = cutoff_rho([0.0, 0.0], 1.0, 2.0)
    x = np.array([[0.5, 0.0], [1.5, 0.0], [3.0, 0.0]])
    v, g = rho(x, grad=True)
    assert v[0] == 1.0 and v[2] == 0.0 and 0 < v[1] < 1
    h = 1e-6
    fd = (rho(x + [h, 0.0]) - rho(x - [h, 0.0])) / (2 * h)
    assert np.allclose(g[:, 0], fd, atol=1e-6)
    with pytest.raises(ValueError):
        cutoff_rho([0, 0], 2.0, 1.0)
