"""Rectangle-tooth fractal curves O(alpha, beta) and smooth baselines.

The region ``T`` is the unit square ``Q = [0,1] x [-1,0]`` with thin teeth
``[y - B_m, y] x [0, 2^-m]`` attached to its top edge.  Level ``m`` has
``2^floor(m beta)`` teeth whose right walls are spaced ``a_m`` apart inside
``[2^-m, 2^-m+1]``; the tooth width is ``B_m = a_m^alpha / 2``.

The region is stored lazily by level, so geometry queries and the
exponent estimators work at depths whose rectangle lists would not fit in
memory; only explicit exports materialise rectangles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

MAX_RECTS = 2**24

__all__ = [
    "FractalCurveSpec",
    "PolyrectRegion",
    "Sphere",
    "ResourceError",
    "build_region",
    "cutoff_rho",
    "region_svg",
    "region_json",
]


class ResourceError(RuntimeError):
    """Requested object exceeds the configured size limit."""


@dataclass(frozen=True)
class FractalCurveSpec:
    """Parameters of O(alpha, beta) truncated after ``depth`` levels."""

    alpha: float
    beta: float
    depth: int

    def __post_init__(self):
        if not self.alpha >= 1.0:
            raise ValueError("alpha must be >= 1")
        if not self.beta >= 1.0:
            raise ValueError("beta must be >= 1")
        if not (isinstance(self.depth, (int, np.integer)) and 1 <= self.depth <= 16):
            raise ValueError("depth must be an integer in 1..16")

    def floor_mbeta(self, m: int) -> int:
        # exact decimal arithmetic: 1.15 * 20 must floor to 23, not 22
        return math.floor(m * Fraction(repr(float(self.beta))))

    def count(self, m: int) -> int:
        """Number of teeth at level ``m``."""
        return 2 ** self.floor_mbeta(m)

    def spacing(self, m: int) -> float:
        """Distance between consecutive right walls at level ``m``."""
        return math.ldexp(1.0, -m - self.floor_mbeta(m))

    def width(self, m: int) -> float:
        return 0.5 * self.spacing(m) ** self.alpha

    def height(self, m: int) -> float:
        return math.ldexp(1.0, -m)

    def gap(self, m: int) -> float:
        return self.spacing(m) - self.width(m)

    def n_rects(self) -> int:
        return 1 + sum(self.count(m) for m in range(1, self.depth + 1))

    def with_depth(self, depth: int) -> "FractalCurveSpec":
        return FractalCurveSpec(self.alpha, self.beta, depth)


def _seg_dist(px, py, x0, y0, x1, y1):
    """Distance from points to axis-aligned segments (broadcasting)."""
    dx = np.maximum(np.maximum(np.minimum(x0, x1) - px, px - np.maximum(x0, x1)), 0.0)
    dy = np.maximum(np.maximum(np.minimum(y0, y1) - py, py - np.maximum(y0, y1)), 0.0)
    return np.hypot(dx, dy)


def _general_seg_dist(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from points ``p`` (N,2) to segments ``a->b`` (S,2); returns (N,)."""
    ab = b - a
    L2 = np.maximum(np.sum(ab * ab, axis=1), 1e-300)
    out = np.full(len(p), np.inf)
    for k in range(len(a)):
        t = np.clip(((p - a[k]) @ ab[k]) / L2[k], 0.0, 1.0)
        q = a[k] + t[:, None] * ab[k]
        np.minimum(out, np.linalg.norm(p - q, axis=1), out=out)
    return out


class PolyrectRegion:
    """Truncated region ``T_M`` with O(depth) membership and distance queries."""

    ambient_dim = 2

    def __init__(self, spec: FractalCurveSpec):
        self.spec = spec
        self.levels = []
        for m in range(1, spec.depth + 1):
            self.levels.append(
                dict(m=m, count=spec.count(m), a=spec.spacing(m), B=spec.width(m), H=spec.height(m), start=spec.height(m))
            )

    # ------------------------------------------------------------- census
    @property
    def n_rects(self) -> int:
        return self.spec.n_rects()

    def level_rects(self, m: int) -> np.ndarray:
        """Level-``m`` teeth as ``[x0, y0, x1, y1]`` rows."""
        lv = self.levels[m - 1]
        right = lv["start"] + lv["a"] * np.arange(1, lv["count"] + 1)
        out = np.empty((lv["count"], 4))
        out[:, 0] = right - lv["B"]
        out[:, 1] = 0.0
        out[:, 2] = right
        out[:, 3] = lv["H"]
        return out

    def rects(self) -> np.ndarray:
        """All rectangles, square first; raises ResourceError above 2^24."""
        if self.n_rects > MAX_RECTS:
            raise ResourceError(f"{self.n_rects} rectangles exceed the limit {MAX_RECTS}; lower the depth")
        parts = [np.array([[0.0, -1.0, 1.0, 0.0]])]
        parts += [self.level_rects(m) for m in range(1, self.spec.depth + 1)]
        return np.concatenate(parts)

    # ------------------------------------------------------------ queries
    @property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array([0.0, -1.0]), np.array([1.0, 0.5])

    def _tooth_index(self, lv: dict, px: np.ndarray) -> np.ndarray:
        """Index ``j`` of the tooth whose right wall is the first one >= px."""
        return np.ceil((px - lv["start"]) / lv["a"])

    def inside(self, x) -> np.ndarray:
        """Closed-region membership."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        px, py = x[:, 0], x[:, 1]
        res = (px >= 0) & (px <= 1) & (py >= -1) & (py <= 0)
        for lv in self.levels:
            j = self._tooth_index(lv, px)
            ok = (j >= 1) & (j <= lv["count"])
            right = lv["start"] + j * lv["a"]
            res |= ok & (px >= right - lv["B"]) & (py >= 0) & (py <= lv["H"])
        return res

    def dist(self, x) -> np.ndarray:
        """Exact Euclidean distance to the boundary curve."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        px, py = x[:, 0], x[:, 1]
        d = _seg_dist(px, py, 0.0, -1.0, 0.0, 0.0)
        d = np.minimum(d, _seg_dist(px, py, 0.0, -1.0, 1.0, -1.0))
        d = np.minimum(d, _seg_dist(px, py, 1.0, -1.0, 1.0, 0.0))
        under_base = np.zeros(len(px), dtype=bool)
        for lv in self.levels:
            a, B, H = lv["a"], lv["B"], lv["H"]
            j0 = self._tooth_index(lv, px)
            inb = (j0 >= 1) & (j0 <= lv["count"]) & (px > lv["start"] + j0 * a - B)
            under_base |= inb
            for j in (j0 - 1, j0):
                jj = np.clip(j, 1, lv["count"])
                r = lv["start"] + jj * a
                d = np.minimum(d, _seg_dist(px, py, r - B, 0.0, r - B, H))
                d = np.minimum(d, _seg_dist(px, py, r, 0.0, r, H))
                d = np.minimum(d, _seg_dist(px, py, r - B, H, r, H))
        # top edge of the square outside the tooth bases
        floor = np.where((px >= 0) & (px <= 1) & ~under_base, np.abs(py), np.inf)
        return np.minimum(d, floor)

    def normals(self, x) -> np.ndarray:
        """Outward unit normal at boundary points (axis-aligned pieces)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        eps = 1e-9 * max(1e-300, min(lv["B"] for lv in self.levels))
        out = np.zeros_like(x)
        for k, e in enumerate(np.eye(2)):
            inside_p = self.inside(x + eps * e)
            inside_m = self.inside(x - eps * e)
            out[:, k] = inside_m.astype(float) - inside_p.astype(float)
        nrm = np.linalg.norm(out, axis=1, keepdims=True)
        return np.divide(out, nrm, out=np.zeros_like(out), where=nrm > 0)

    # ---------------------------------------------------------- polyline
    def polyline(self) -> np.ndarray:
        """Closed boundary polygon, counter-clockwise, first vertex not repeated."""
        if self.n_rects > MAX_RECTS:
            raise ResourceError(f"{self.n_rects} rectangles exceed the limit {MAX_RECTS}; lower the depth")
        pts = [np.array([[0.0, -1.0], [1.0, -1.0], [1.0, 0.0]])]
        # walk the top edge from x = 1 leftwards, tooth by tooth
        for m in range(1, self.spec.depth + 1):
            r = self.level_rects(m)[::-1]
            v = np.empty((len(r), 4, 2))
            v[:, 0] = np.column_stack([r[:, 2], r[:, 1]])
            v[:, 1] = np.column_stack([r[:, 2], r[:, 3]])
            v[:, 2] = np.column_stack([r[:, 0], r[:, 3]])
            v[:, 3] = np.column_stack([r[:, 0], r[:, 1]])
            pts.append(v.reshape(-1, 2))
        pts.append(np.array([[0.0, 0.0]]))
        poly = np.concatenate(pts)
        keep = np.ones(len(poly), dtype=bool)
        keep[1:] = np.any(poly[1:] != poly[:-1], axis=1)
        return poly[keep]

    def boundary_samples(self, spacing: float) -> np.ndarray:
        """Points along the boundary: every vertex plus fill at ``spacing``."""
        return sample_polyline(self.polyline(), spacing, closed=True)

    def envelope_polygon(self) -> np.ndarray:
        """CCW polygon of ``Q`` plus the per-level bounding boxes of the teeth.

        Every boundary point lies in the closed envelope, so the distance to
        the envelope's edge bounds the distance to the curve from below for
        points outside it.
        """
        v = [(0.0, -1.0), (1.0, -1.0), (1.0, 0.5)]
        for m in range(1, self.spec.depth + 1):
            h = math.ldexp(1.0, -m)
            v.append((h, h))
            if m < self.spec.depth:
                v.append((h, h / 2))
        h = math.ldexp(1.0, -self.spec.depth)
        v += [(h, 0.0), (0.0, 0.0)]
        return np.array(v)

    def envelope_inside(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        px, py = x[:, 0], x[:, 1]
        res = (px >= 0) & (px <= 1) & (py >= -1) & (py <= 0)
        for m in range(1, self.spec.depth + 1):
            h = math.ldexp(1.0, -m)
            res |= (px >= h) & (px <= 2 * h) & (py >= 0) & (py <= h)
        return res


def sample_polyline(poly: np.ndarray, spacing: float, closed: bool = True) -> np.ndarray:
    """Vertices of ``poly`` plus equally spaced fill points on long edges."""
    a = poly
    b = np.roll(poly, -1, axis=0) if closed else poly[1:]
    if not closed:
        a = poly[:-1]
    L = np.linalg.norm(b - a, axis=1)
    n = np.maximum(np.ceil(L / spacing).astype(np.int64), 1)
    owner = np.repeat(np.arange(len(a)), n)
    start = np.cumsum(n) - n
    t = (np.arange(n.sum()) - start[owner]) / n[owner]
    pts = a[owner] + t[:, None] * (b - a)[owner]
    if not closed:
        pts = np.vstack([pts, poly[-1:]])
    return pts


class Sphere:
    """Round sphere of given centre and radius; the smooth baseline boundary."""

    def __init__(self, dim: int = 2, radius: float = 1.0, center=None):
        if dim < 2:
            raise ValueError("dimension must be >= 2")
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.ambient_dim = dim
        self.radius = float(radius)
        self.center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)

    @property
    def bbox(self):
        return self.center - self.radius, self.center + self.radius

    def inside(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.linalg.norm(x - self.center, axis=1) <= self.radius

    def dist(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.abs(np.linalg.norm(x - self.center, axis=1) - self.radius)

    def normals(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float)) - self.center
        return x / np.linalg.norm(x, axis=1, keepdims=True)

    def boundary_samples(self, spacing: float) -> np.ndarray:
        if self.ambient_dim == 2:
            n = max(8, int(np.ceil(2 * np.pi * self.radius / spacing)))
            t = 2 * np.pi * np.arange(n) / n
            return self.center + self.radius * np.column_stack([np.cos(t), np.sin(t)])
        if self.ambient_dim == 3:
            n = max(32, int(np.ceil(4 * np.pi * self.radius**2 / spacing**2)))
            k = np.arange(n) + 0.5
            z = 1 - 2 * k / n
            phi = np.pi * (1 + 5**0.5) * k
            rr = np.sqrt(1 - z * z)
            return self.center + self.radius * np.column_stack([rr * np.cos(phi), rr * np.sin(phi), z])
        raise NotImplementedError("boundary sampling implemented for dimensions 2 and 3")

    def polyline(self, n: int = 4096) -> np.ndarray:
        if self.ambient_dim != 2:
            raise ValueError("polyline only for circles")
        t = 2 * np.pi * np.arange(n) / n
        return self.center + self.radius * np.column_stack([np.cos(t), np.sin(t)])


def build_region(spec: FractalCurveSpec) -> PolyrectRegion:
    """Lazy truncated region; rectangle lists are produced on export only."""
    return PolyrectRegion(spec)


def cutoff_rho(center, r1: float, r2: float):
    """C^2 radial cut-off equal to 1 inside radius ``r1`` and 0 beyond ``r2``.

    Returns a callable ``rho(x, grad=False)``; with ``grad=True`` it returns
    ``(value, gradient)``.
    """
    if not 0 < r1 < r2:
        raise ValueError("need 0 < r1 < r2")
    c = np.asarray(center, dtype=float)

    def rho(x, grad: bool = False):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = x - c
        r = np.linalg.norm(d, axis=1)
        t = np.clip((r - r1) / (r2 - r1), 0.0, 1.0)
        val = 1.0 - t**3 * (10 - 15 * t + 6 * t * t)
        if not grad:
            return val
        dval = -30 * t * t * (1 - t) ** 2 / (r2 - r1)
        g = np.divide(d * dval[:, None], r[:, None], out=np.zeros_like(d), where=r[:, None] > 0)
        return val, g

    return rho


def region_json(region: PolyrectRegion) -> dict:
    s = region.spec
    return {"alpha": s.alpha, "beta": s.beta, "depth": s.depth, "rects": region.rects().tolist()}


def region_svg(region, scale: float = 1000.0) -> str:
    """SVG path of the boundary polygon (y axis flipped, unit scaled by ``scale``)."""
    poly = region.polyline()
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    pad = 0.02 * scale
    x0, y0 = lo[0] * scale - pad, -hi[1] * scale - pad
    w, h = (hi[0] - lo[0]) * scale + 2 * pad, (hi[1] - lo[1]) * scale + 2 * pad
    d = "M" + " L".join(f"{x * scale:.6g},{-y * scale:.6g}" for x, y in poly) + " Z"
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{x0:.6g} {y0:.6g} {w:.6g} {h:.6g}">\n'
        f'<path d="{d}" fill="#dde6f0" stroke="black" stroke-width="0.5"/>\n</svg>\n'
    )
