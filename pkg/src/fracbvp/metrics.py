"""Metric characteristics of boundaries and data.

Marcinkiewicz exponents are estimated from the layer volume
``V(delta) = |{x in D : dist(x, S) < delta}|``.  If ``V ~ delta^k`` then
``I_p(D) = int_D dist^-p`` is finite exactly for ``p < k``: the shell
contributions ``J_k(p) ~ delta_k^(k - p)`` decay geometrically for
``p < k`` and grow otherwise.  The estimator fits the growth rate of the
shell contributions for every ``p`` on a grid and brackets the sign change.

For the tooth curves each piece (tooth, gap between teeth) has a closed-form
layer area; the remaining smooth parts use a quadtree over a distance that
bounds the true distance from below, so layer volumes are never
under-estimated.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .fractal import PolyrectRegion, Sphere, _general_seg_dist, sample_polyline

log = logging.getLogger(__name__)

__all__ = [
    "MarcinkiewiczEstimate",
    "MetricReport",
    "marcinkiewicz_closed_form",
    "marcinkiewicz_numeric",
    "box_counting_dimension",
    "holder_sup_exponent",
    "layer_volume_quadtree",
    "rect_layer_area",
]


def marcinkiewicz_closed_form(alpha: float, beta: float) -> tuple[float, float]:
    """Inner and outer exponents of the tooth curve O(alpha, beta)."""
    if alpha < 1 or beta < 1:
        raise ValueError("alpha and beta must be >= 1")
    return 1.0 - (beta - 1.0) / ((beta + 1.0) * alpha), 2.0 / (beta + 1.0)


def rect_layer_area(w, H, delta):
    """Area of ``[0,w] x [0,H]`` within ``delta`` of its two vertical sides and
    one horizontal side (the fourth side is open)."""
    w, H, delta = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (w, H, delta)))
    return w * H - np.maximum(w - 2 * delta, 0.0) * np.maximum(H - delta, 0.0)


def layer_volume_quadtree(
    inside,
    dist,
    lo,
    hi,
    deltas,
    eta: float = 0.2,
    min_side: float | None = None,
    max_cells: int = 4_000_000,
) -> np.ndarray:
    """Layer volumes ``V(delta_k)`` of ``{inside} ∩ box`` by adaptive quadtree.

    A cell is refined until its half-diagonal is at most ``eta`` times the
    distance at its centre, or its side reaches ``min_side``; its area is then
    attributed to the centre distance.  ``dist`` must be 1-Lipschitz and vanish
    on the boundary of ``inside`` inside the box.
    """
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    deltas = np.sort(np.asarray(deltas, float))
    dmax = deltas[-1]
    side = float(np.max(hi - lo))
    d = lo.size
    min_side = deltas[0] / 8 if min_side is None else min_side
    offs = np.array(np.meshgrid(*[[0, 1]] * d, indexing="ij")).reshape(d, -1).T
    corners = lo[None, :].copy()
    s = side
    dist_acc, area_acc = [], []
    while len(corners):
        if len(corners) > max_cells:
            raise MemoryError("quadtree exceeded the cell budget")
        c = corners + 0.5 * s
        dc = dist(c)
        hd = 0.5 * s * math.sqrt(d)
        far = dc - hd > dmax
        leaf = ~far & ((hd <= eta * dc) | (s <= min_side))
        if leaf.any():
            ins = inside(c[leaf])
            dist_acc.append(dc[leaf][ins])
            area_acc.append(np.full(int(ins.sum()), s**d))
        refine = ~far & ~leaf
        s *= 0.5
        corners = (corners[refine][:, None, :] + s * offs[None]).reshape(-1, d)
    dd = np.concatenate(dist_acc) if dist_acc else np.zeros(0)
    aa = np.concatenate(area_acc) if area_acc else np.zeros(0)
    order = np.argsort(dd)
    cum = np.concatenate([[0.0], np.cumsum(aa[order])])
    return cum[np.searchsorted(dd[order], deltas, side="left")]


@dataclass
class MarcinkiewiczEstimate:
    side: str
    estimate: float
    bracket: tuple
    stderr: float
    window: tuple
    p_grid: list
    growth_slopes: list
    depth: int | None = None
    by_depth: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MetricReport:
    m_plus_closed: float | None
    m_minus_closed: float | None
    m_plus_numeric: dict
    m_minus_numeric: dict
    box_dimension: dict | None
    depth_used: int | None
    grid_resolution: int

    def to_dict(self) -> dict:
        return asdict(self)


def _shell_fit(deltas: np.ndarray, V: np.ndarray, p_grid: np.ndarray):
    """Growth slopes of the shell contributions and the transition bracket."""
    dV = V[1:] - V[:-1]
    mid = np.sqrt(deltas[1:] * deltas[:-1])
    ok = dV > 0
    if ok.sum() < 3:
        raise ValueError("layer volume is flat over the window; refine the window")
    x = np.log(1.0 / mid[ok])
    reg = stats.linregress(np.log(mid[ok]), np.log(dV[ok]))
    kappa, se = float(reg.slope), float(reg.stderr)
    slopes = []
    for p in p_grid:
        # growth of log J_k(p) in log(1/delta); equals p - kappa for exact power laws
        J = np.log(dV[ok]) - p * np.log(mid[ok])
        slopes.append(float(np.polyfit(x, J, 1)[0]))
    slopes = np.array(slopes)
    bounded = slopes < 0
    if bounded.all():
        bracket = (float(p_grid[-1]), math.inf)
    elif not bounded.any():
        bracket = (0.0, float(p_grid[0]))
    else:
        k = int(np.argmin(bounded))  # first p with growth
        bracket = (float(p_grid[max(k - 1, 0)]), float(p_grid[k]))
    return kappa, se, bracket, slopes


def _check_grid(p_grid, dim: int) -> np.ndarray:
    p = np.asarray(p_grid, dtype=float)
    if p.ndim != 1 or p.size < 2 or np.any(p <= 0) or np.any(p > dim) or np.any(np.diff(p) <= 0):
        raise ValueError(f"p_grid must be increasing values in (0, {dim}]")
    return p


def _tooth_layers(region: PolyrectRegion, side: str, deltas: np.ndarray) -> np.ndarray:
    V = np.zeros_like(deltas)
    for lv in region.levels:
        w = lv["B"] if side == "inner" else lv["a"] - lv["B"]
        V += lv["count"] * rect_layer_area(w, lv["H"], deltas)
    return V


def _bulk_layer(region: PolyrectRegion, radius: float, deltas: np.ndarray, eta: float) -> np.ndarray:
    """Outer layer outside the tooth envelope (quadtree, linear below its floor)."""
    poly = region.envelope_polygon()
    a, b = poly, np.roll(poly, -1, axis=0)
    dq = max(deltas[0], 2.0**-12)
    qd = deltas[deltas >= dq]
    if qd.size < 2:
        qd = np.array([dq, 2 * dq])

    def inside(x):
        return ~region.envelope_inside(x) & (np.linalg.norm(x, axis=1) < radius)

    Vq = layer_volume_quadtree(inside, lambda x: _general_seg_dist(x, a, b), [-radius] * 2, [radius] * 2, qd, eta=eta)
    # below the quadtree floor the band around a polygon is linear in delta
    return np.where(deltas >= qd[0], np.interp(deltas, qd, Vq), Vq[0] * deltas / qd[0])


def _window(region, side: str, lo_level: int, hi_level: int):
    lvs = region.levels
    if side == "inner":
        feats = [lv["B"] for lv in lvs]
    else:
        feats = [lv["a"] - lv["B"] for lv in lvs]
    return 0.5 * feats[hi_level - 1], 0.5 * feats[lo_level - 1]


def marcinkiewicz_numeric(
    region,
    side: str,
    p_grid=None,
    quad_resolution: int = 8,
    radius: float | None = None,
    window=None,
    eta: float = 0.2,
) -> MarcinkiewiczEstimate:
    """Bracket ``sup{p : I_p < inf}`` for the inner or outer side.

    Parameters
    ----------
    region : PolyrectRegion or Sphere
    side : {"inner", "outer"}
    p_grid : array_like
        Increasing exponents in ``(0, 2]``; default ``0.30, 0.31, ..., 1.10``.
    quad_resolution : int
        Shells per octave of ``delta``.
    radius : float
        Clipping radius of the outer domain; default twice the circumradius.
    window : (delta_min, delta_max), optional
        Distance window of the fit.  For tooth curves it defaults to half the
        feature widths of levels 2 and ``depth``.
    """
    if side not in ("inner", "outer"):
        raise ValueError("side must be 'inner' or 'outer'")
    p_grid = _check_grid(np.round(np.arange(0.30, 1.1001, 0.01), 10) if p_grid is None else p_grid, 2)
    if quad_resolution < 1:
        raise ValueError("quad_resolution must be positive")

    if isinstance(region, PolyrectRegion):
        circ = math.sqrt(2.0)
        radius = 2 * circ if radius is None else radius
        if radius <= circ:
            raise ValueError("clipping radius must enclose the curve")
        if window is None:
            if region.spec.depth < 3:
                raise ValueError("tooth-curve exponents need depth >= 3")
            window = _window(region, side, 2, region.spec.depth)
        deltas = _geom(window, quad_resolution)
        V = _tooth_layers(region, side, deltas)
        if side == "inner":
            # square part: distance to the square's own boundary is a lower bound
            V = V + 1.0 - np.maximum(1.0 - 2.0 * deltas, 0.0) ** 2
        else:
            V = V + _bulk_layer(region, radius, deltas, eta)
        depth = region.spec.depth
    elif isinstance(region, Sphere):
        if region.ambient_dim != 2:
            raise ValueError("numeric exponents are implemented for planar regions")
        R = region.radius
        radius = 2 * R if radius is None else radius
        window = (2.0**-10 * R, 2.0**-5 * R) if window is None else window
        deltas = _geom(window, quad_resolution)
        c = region.center
        if side == "inner":
            inside = region.inside
        else:
            def inside(x):
                r = np.linalg.norm(x - c, axis=1)
                return (r > R) & (r < radius)
        V = layer_volume_quadtree(inside, region.dist, c - radius, c + radius, deltas, eta=eta)
        depth = None
    else:
        raise TypeError("unsupported region type")

    kappa, se, bracket, slopes = _shell_fit(deltas, V, p_grid)
    log.debug("marcinkiewicz %s: kappa=%.4f se=%.4f bracket=%s", side, kappa, se, bracket)
    return MarcinkiewiczEstimate(
        side=side,
        estimate=kappa,
        bracket=bracket,
        stderr=se,
        window=(float(deltas[0]), float(deltas[-1])),
        p_grid=[float(p) for p in p_grid],
        growth_slopes=[float(s) for s in slopes],
        depth=depth,
    )


def _geom(window, per_octave: int) -> np.ndarray:
    lo, hi = float(window[0]), float(window[1])
    if not 0 < lo < hi:
        raise ValueError("window must satisfy 0 < lo < hi")
    n = max(4, int(math.ceil(per_octave * math.log2(hi / lo))) + 1)
    return np.geomspace(lo, hi, n)


def box_counting_dimension(polyline, scales=None, closed: bool = True) -> dict:
    """Least-squares slope of ``log N(delta)`` against ``log(1/delta)``.

    ``N(delta)`` counts grid boxes of side ``delta`` met by the polyline,
    which is sampled at ``delta / 4``.
    """
    poly = np.asarray(polyline, dtype=float)
    if poly.ndim != 2 or len(poly) < 2:
        raise ValueError("polyline needs at least two vertices")
    if np.all(np.ptp(poly, axis=0) == 0):
        raise ValueError("degenerate polyline")
    scales = 2.0 ** -np.arange(4, 11) if scales is None else np.asarray(scales, float)
    if scales.size < 4:
        raise ValueError("need at least 4 scales")
    counts = []
    for s in scales:
        pts = sample_polyline(poly, s / 4, closed=closed)
        keys = np.floor(pts / s).astype(np.int64)
        keys -= keys.min(axis=0)
        flat = keys[:, 0] * (int(keys[:, 1].max()) + 1) + keys[:, 1] if keys.shape[1] == 2 else keys
        counts.append(len(np.unique(flat, axis=0)))
    counts = np.array(counts, dtype=float)
    reg = stats.linregress(np.log(1 / scales), np.log(counts))
    resid = np.log(counts) - (reg.intercept + reg.slope * np.log(1 / scales))
    return {
        "dimension": float(reg.slope),
        "stderr": float(reg.stderr),
        "residual": float(np.sqrt(np.mean(resid**2))),
        "scales": scales.tolist(),
        "counts": counts.astype(int).tolist(),
        "conservative": True,
    }


def _safe_norm(v: np.ndarray) -> np.ndarray:
    """Row norms without underflow for tiny components (scales down to 1e-300)."""
    m = np.max(np.abs(v), axis=1)
    safe = np.where(m > 0, m, 1.0)
    return m * np.sqrt(np.sum((v / safe[:, None]) ** 2, axis=1))


def holder_sup_exponent(points, values, max_pairs: int = 2_500_000, n_fit_bins: int = 32, rng=None) -> dict:
    """Estimate the largest Hölder exponent of sampled data.

    Pairs are binned by ``log2 |x - y|``; the largest ``log |u(x) - u(y)|`` per
    bin traces the modulus of continuity, whose slope over the finest
    populated bins is the exponent.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    vals = np.asarray(values, dtype=float).reshape(len(pts), -1)
    n = len(pts)
    total = n * (n - 1) // 2
    if total < 1000:
        raise ValueError("need at least 1000 sample pairs")
    if total <= max_pairs:
        i, j = np.triu_indices(n, 1)
    else:
        rng = np.random.default_rng(0) if rng is None else rng
        i = rng.integers(0, n, max_pairs)
        j = rng.integers(0, n, max_pairs)
        keep = i != j
        i, j = i[keep], j[keep]
    dx = _safe_norm(pts[i] - pts[j])
    du = _safe_norm(vals[i] - vals[j])
    ok = dx > 0
    dx, du = dx[ok], du[ok]
    scale = max(1.0, float(np.max(np.abs(vals))))
    if np.all(du <= 1e-14 * scale):
        return {"exponent": 1.0, "stderr": 0.0, "degenerate": True, "bins": 0}
    pos = du > 0
    b = np.floor(np.log2(dx[pos])).astype(np.int64)
    lu = np.log(du[pos])
    uniq, inv = np.unique(b, return_inverse=True)
    env = np.full(len(uniq), -np.inf)
    np.maximum.at(env, inv, lu)
    # bin centre in log |dx|
    xc = (uniq + 0.5) * math.log(2.0)
    use = min(n_fit_bins, len(uniq))
    if use < 3:
        raise ValueError("too few distance scales for a fit")
    reg = stats.linregress(xc[:use], env[:use])
    return {
        "exponent": float(min(reg.slope, 1.0)),
        "raw_slope": float(reg.slope),
        "stderr": float(reg.stderr),
        "degenerate": False,
        "bins": int(use),
        "finest_scale": float(2.0 ** uniq[0]),
    }
