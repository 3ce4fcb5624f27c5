"""Degree-0 Whitney extension of Hölder data given on a finite point cloud.

The complement of the cloud inside a root cube is covered by dyadic cubes
satisfying ``diam Q <= dist(Q, E) <= 4 diam Q``.  Each cube carries a
tensor bump ``(1 - t^2)^3`` supported on the cube dilated by 9/8 and an
anchor (nearest sample to the cube centre); the extension is the
normalised bump average of the anchor values.  Cells still touching the
cloud at the maximal depth form the *collar*; they take part in the
partition of unity but values there are flagged as approximate.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

log = logging.getLogger(__name__)

EXPAND = 9.0 / 8.0
_KEY_BITS = 21

__all__ = [
    "CompactSample",
    "WhitneyDecomposition",
    "WhitneyExtension",
    "decompose",
    "extend",
    "gradient_bound_audit",
    "holder_seminorm",
]


def holder_seminorm(points, values, nu, max_pairs=200_000, rng=None) -> float:
    """Empirical ``max |u(x)-u(y)| / |x-y|^nu`` over all (or sampled) pairs."""
    pts = np.asarray(points, dtype=float)
    vals = np.asarray(values, dtype=float).reshape(len(pts), -1)
    n = len(pts)
    if n < 2:
        return 0.0
    if n * (n - 1) // 2 <= max_pairs:
        i, j = np.triu_indices(n, 1)
    else:
        rng = np.random.default_rng(0) if rng is None else rng
        i = rng.integers(0, n, max_pairs)
        j = rng.integers(0, n, max_pairs)
        keep = i != j
        i, j = i[keep], j[keep]
    dx = np.linalg.norm(pts[i] - pts[j], axis=1)
    du = np.linalg.norm(vals[i] - vals[j], axis=1)
    return float(np.max(du / dx**nu))


@dataclass(frozen=True)
class CompactSample:
    """Finite stand-in for a compact set E with data ``u: E -> R^K``."""

    points: np.ndarray
    values: np.ndarray
    nu: float = 1.0

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if len(pts) == 0:
            raise ValueError("sample needs at least one point")
        if len(vals) != len(pts):
            raise ValueError("one value per point required")
        if not 0.0 < self.nu <= 1.0:
            raise ValueError("Hölder exponent must lie in (0, 1]")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise ValueError("sample points must be pairwise distinct")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def seminorm(self, **kw) -> float:
        return holder_seminorm(self.points, self.values, self.nu, **kw)


@dataclass
class WhitneyDecomposition:
    """Dyadic cubes of the root cube ``origin + [0, root_side]^d``.

    Per-cube arrays: ``level``, integer ``index`` (corner = origin +
    index * side), exact ``dist`` to the cloud, ``anchor`` (sample index) and
    ``collar`` (True for unresolved cells at max depth).
    """

    origin: np.ndarray
    root_side: float
    max_depth: int
    level: np.ndarray
    index: np.ndarray
    dist: np.ndarray
    anchor: np.ndarray
    collar: np.ndarray
    points: np.ndarray

    @property
    def dim(self) -> int:
        return self.origin.size

    @property
    def side(self) -> np.ndarray:
        return self.root_side / 2.0**self.level

    @property
    def corner(self) -> np.ndarray:
        return self.origin + self.index * self.side[:, None]

    @property
    def center(self) -> np.ndarray:
        return self.corner + 0.5 * self.side[:, None]

    def __len__(self) -> int:
        return self.level.size

    def accepted(self) -> np.ndarray:
        return ~self.collar

    def proportionality(self) -> np.ndarray:
        """Per accepted cube: ``diam <= dist <= 4 diam``."""
        diam = np.sqrt(self.dim) * self.side[~self.collar]
        d = self.dist[~self.collar]
        return (d >= diam * (1 - 1e-12)) & (d <= 4 * diam * (1 + 1e-12))

    def collar_measure(self) -> float:
        return float(np.sum(self.side[self.collar] ** self.dim))

    def count_by_level(self) -> dict[int, int]:
        lv, cnt = np.unique(self.level[~self.collar], return_counts=True)
        return dict(zip(lv.tolist(), cnt.tolist()))

    def to_csv(self, path) -> None:
        cols = [f"corner{k}" for k in range(self.dim)] + ["side", "anchor", "collar"]
        data = np.column_stack([self.corner, self.side, self.anchor, self.collar.astype(int)])
        fmt = ["%.17g"] * (self.dim + 1) + ["%d", "%d"]
        np.savetxt(path, data, delimiter=",", header=",".join(cols), comments="", fmt=fmt)


def _box_dist(points_tree: cKDTree, pts: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Exact distance from each box ``[lo_i, hi_i]`` to the point cloud."""
    centers = 0.5 * (lo + hi)
    half_diag = 0.5 * np.linalg.norm(hi - lo, axis=1)
    dc, _ = points_tree.query(centers)
    out = np.empty(len(centers))
    # a box containing a sample is at distance 0
    radii = dc + half_diag * (1 + 1e-12)
    cand = points_tree.query_ball_point(centers, radii)
    lens = np.fromiter((len(c) for c in cand), dtype=np.int64, count=len(cand))
    owner = np.repeat(np.arange(len(cand)), lens)
    flat = np.fromiter(itertools.chain.from_iterable(cand), dtype=np.int64, count=int(lens.sum()))
    p = pts[flat]
    gap = np.maximum(0.0, np.maximum(lo[owner] - p, p - hi[owner]))
    d = np.linalg.norm(gap, axis=1)
    out[:] = np.inf
    np.minimum.at(out, owner, d)
    return out


def _nearest_lex(tree: cKDTree, x: np.ndarray, k: int = 4) -> np.ndarray:
    """Nearest sample index; exact ties go to the lexicographically first point."""
    k = min(k, tree.n)
    d, idx = tree.query(x, k=k)
    if k == 1:
        return np.asarray(idx)
    tie = d <= d[:, :1] * (1 + 1e-14) + 1e-300
    cand = np.where(tie, idx, np.iinfo(np.int64).max)
    return cand.min(axis=1)


def decompose(sample: CompactSample, bounding_box=None, max_depth: int = 12) -> WhitneyDecomposition:
    """Whitney decomposition of ``root cube \\ E`` down to ``max_depth`` levels.

    Parameters
    ----------
    sample : CompactSample
    bounding_box : (lo, hi), optional
        Box to cover; it is enlarged to a cube.  Defaults to the sample's
        bounding box grown by 50% on each side.
    max_depth : int
        Finest dyadic level (root cube is level 0).
    """
    if not 1 <= max_depth <= 20:
        raise ValueError("max_depth must lie in 1..20")
    # lexicographic order of the cloud fixes tie-breaking of anchors
    order = np.lexsort(sample.points.T[::-1])
    pts = sample.points[order]
    d = pts.shape[1]
    if bounding_box is None:
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        pad = 0.5 * max(float(np.max(hi - lo)), 1e-3)
        lo, hi = lo - pad, hi + pad
    else:
        lo, hi = (np.asarray(b, dtype=float) for b in bounding_box)
        if np.any(pts < lo) or np.any(pts > hi):
            raise ValueError("bounding box must contain every sample point")
    side = float(np.max(hi - lo))
    center = 0.5 * (lo + hi)
    origin = center - 0.5 * side

    tree = cKDTree(pts)
    levels, indices, dists, collar = [], [], [], []
    active = np.zeros((1, d), dtype=np.int64)
    for lev in range(max_depth + 1):
        if active.size == 0:
            break
        s = side / 2.0**lev
        c_lo = origin + active * s
        dist = _box_dist(tree, pts, c_lo, c_lo + s)
        diam = np.sqrt(d) * s
        ok = dist >= diam
        levels.append(np.full(int(ok.sum()), lev))
        indices.append(active[ok])
        dists.append(dist[ok])
        collar.append(np.zeros(int(ok.sum()), dtype=bool))
        rest = active[~ok]
        if lev == max_depth:
            levels.append(np.full(len(rest), lev))
            indices.append(rest)
            dists.append(dist[~ok])
            collar.append(np.ones(len(rest), dtype=bool))
            break
        offs = np.array(list(itertools.product((0, 1), repeat=d)), dtype=np.int64)
        active = (2 * rest[:, None, :] + offs[None, :, :]).reshape(-1, d)

    level = np.concatenate(levels)
    if not np.any(~np.concatenate(collar)):
        raise RuntimeError("no Whitney cube accepted; increase max_depth")
    index = np.concatenate(indices)
    sides = side / 2.0**level
    centers = origin + (index + 0.5) * sides[:, None]
    anchor_sorted = _nearest_lex(tree, centers)
    dec = WhitneyDecomposition(
        origin=origin,
        root_side=side,
        max_depth=max_depth,
        level=level,
        index=index,
        dist=np.concatenate(dists),
        anchor=order[anchor_sorted],
        collar=np.concatenate(collar),
        points=sample.points,
    )
    log.debug("whitney: %d cubes (%d collar), depth %d", len(dec), int(dec.collar.sum()), max_depth)
    return dec


def _bump(t: np.ndarray):
    inside = np.abs(t) < 1.0
    q = np.where(inside, 1.0 - t * t, 0.0)
    val = q**3
    dval = np.where(inside, -6.0 * t * q * q, 0.0)
    return val, dval


class WhitneyExtension:
    """Evaluator of the Whitney extension built from a decomposition."""

    def __init__(self, sample: CompactSample, dec: WhitneyDecomposition):
        if dec.points.shape != sample.points.shape or not np.array_equal(dec.points, sample.points):
            raise ValueError("decomposition was built from a different sample")
        self.sample = sample
        self.dec = dec
        self._tree = cKDTree(sample.points)
        self._cube_vals = sample.values[dec.anchor]
        self._levels = {}
        for lev in np.unique(dec.level):
            ids = np.flatnonzero(dec.level == lev)
            keys = self._encode(dec.index[ids])
            o = np.argsort(keys)
            self._levels[int(lev)] = (keys[o], ids[o])

    @staticmethod
    def _encode(idx: np.ndarray) -> np.ndarray:
        key = np.zeros(len(idx), dtype=np.int64)
        for k in range(idx.shape[1]):
            key |= (idx[:, k].astype(np.int64) + 1) << (_KEY_BITS * k)
        return key

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(x)[0]

    def evaluate(self, x, grad: bool = False, chunk: int = 65536, _table=None):
        """Values (N, K), gradients (N, d, K) or None, approximate-flag (N,)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        cube_vals, on_vals = (self._cube_vals, self.sample.values) if _table is None else _table
        parts = [self._evaluate(x[i : i + chunk], grad, cube_vals, on_vals) for i in range(0, len(x), chunk)]
        vals = np.concatenate([p[0] for p in parts]) if parts else np.zeros((0, cube_vals.shape[1]))
        grads = np.concatenate([p[1] for p in parts]) if grad and parts else None
        flags = np.concatenate([p[2] for p in parts]) if parts else np.zeros(0, dtype=bool)
        return vals, grads, flags

    def _evaluate(self, x: np.ndarray, grad: bool, cube_vals: np.ndarray, on_vals: np.ndarray):
        dec = self.dec
        d = dec.dim
        K = cube_vals.shape[1]
        npts = len(x)
        S = np.zeros(npts)
        N = np.zeros((npts, K))
        if grad:
            dS = np.zeros((npts, d))
            dN = np.zeros((npts, d, K))
        in_collar = np.zeros(npts, dtype=bool)
        offsets = np.array(list(itertools.product((-1, 0, 1), repeat=d)), dtype=np.int64)
        for lev, (keys, ids) in self._levels.items():
            s = dec.root_side / 2.0**lev
            base = np.floor((x - dec.origin) / s).astype(np.int64)
            half = 0.5 * EXPAND * s
            for off in offsets:
                idx = base + off
                inrange = np.all((idx >= 0) & (idx < (1 << lev)), axis=1)
                if not inrange.any():
                    continue
                q = self._encode(np.where(inrange[:, None], idx, 0))
                pos = np.searchsorted(keys, q)
                pos = np.minimum(pos, len(keys) - 1)
                hit = inrange & (keys[pos] == q)
                if not hit.any():
                    continue
                rows = np.flatnonzero(hit)
                cube = ids[pos[rows]]
                c = dec.origin + (dec.index[cube] + 0.5) * s
                t = (x[rows] - c) / half
                b, db = _bump(t)
                psi = np.prod(b, axis=1)
                live = psi > 0
                if not live.any():
                    continue
                rows, cube, psi, b, db = rows[live], cube[live], psi[live], b[live], db[live]
                S[rows] += psi
                N[rows] += psi[:, None] * cube_vals[cube]
                if not off.any() and dec.collar.any():
                    in_collar[rows] |= dec.collar[cube]
                if grad:
                    for k in range(d):
                        others = np.prod(np.delete(b, k, axis=1), axis=1)
                        g = db[:, k] * others / half
                        dS[rows, k] += g
                        dN[rows, k] += g[:, None] * cube_vals[cube]
        vals = np.empty((npts, K))
        covered = S > 0
        vals[covered] = N[covered] / S[covered, None]
        grads = None
        if grad:
            grads = np.zeros((npts, d, K))
            Sc = S[covered]
            grads[covered] = (dN[covered] * Sc[:, None, None] - N[covered][:, None, :] * dS[covered][:, :, None]) / (
                Sc[:, None, None] ** 2
            )
        # exact lookup on E; nearest-sample fallback outside the root cube
        dist, nn = self._tree.query(x)
        on_e = dist == 0.0
        vals[on_e] = on_vals[nn[on_e]]
        if grad:
            grads[on_e] = 0.0
        miss = ~covered & ~on_e
        vals[miss] = on_vals[nn[miss]]
        return vals, grads, (in_collar | miss) & ~on_e

    def partition_sum(self, x) -> np.ndarray:
        """``sum_Q phi_Q(x)`` computed term by term (1 on the covered region)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        table = (np.ones((len(self.dec), 1)), np.ones((len(self.sample.points), 1)))
        vals, _, _ = self.evaluate(x, _table=table)
        return vals[:, 0]

    def overlap_count(self, x) -> np.ndarray:
        """Number of dilated cubes whose bump is positive at each point."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        dec = self.dec
        count = np.zeros(len(x), dtype=np.int64)
        offsets = np.array(list(itertools.product((-1, 0, 1), repeat=dec.dim)), dtype=np.int64)
        for lev, (keys, ids) in self._levels.items():
            s = dec.root_side / 2.0**lev
            base = np.floor((x - dec.origin) / s).astype(np.int64)
            for off in offsets:
                idx = base + off
                inrange = np.all((idx >= 0) & (idx < (1 << lev)), axis=1)
                q = self._encode(np.where(inrange[:, None], idx, 0))
                pos = np.minimum(np.searchsorted(keys, q), len(keys) - 1)
                hit = inrange & (keys[pos] == q)
                c = dec.origin + (dec.index[ids[pos]] + 0.5) * s
                inside = np.all(np.abs(x - c) < 0.5 * EXPAND * s, axis=1)
                count += hit & inside
        return count

    def dist_to_sample(self, x) -> np.ndarray:
        return self._tree.query(np.atleast_2d(x))[0]


def extend(sample: CompactSample, dec: WhitneyDecomposition) -> WhitneyExtension:
    return WhitneyExtension(sample, dec)


def gradient_bound_audit(
    ext: WhitneyExtension, probes, nu: float | None = None, tol: float = 0.1, n_bins: int = 12
) -> dict:
    """Log-log regression of the finite-difference gradient against dist(x, E).

    Probes are binned by distance (geometric bins) and the largest gradient
    norm in each bin is regressed.  Passes when the fitted slope is at least ``nu - 1 - tol``.
    """
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    if len(probes) < 100:
        raise ValueError("gradient audit needs at least 100 probes")
    nu = ext.sample.nu if nu is None else nu
    dist = ext.dist_to_sample(probes)
    _, _, flagged = ext.evaluate(probes)
    keep = (dist > 0) & ~flagged
    p, dist = probes[keep], dist[keep]
    d = p.shape[1]
    step = 1e-3 * dist
    gnorm2 = np.zeros(len(p))
    for k in range(d):
        e = np.zeros(d)
        e[k] = 1.0
        up = ext(p + step[:, None] * e)
        dn = ext(p - step[:, None] * e)
        gnorm2 += np.sum(((up - dn) / (2 * step[:, None])) ** 2, axis=1)
    g = np.sqrt(gnorm2)
    # the bound is an upper envelope: regress the per-bin maximum, since the
    # 9/8-dilated bumps leave the extension locally constant inside most cubes
    edges = np.geomspace(dist.min(), dist.max() * (1 + 1e-12), n_bins + 1)
    which = np.clip(np.searchsorted(edges, dist, side="right") - 1, 0, n_bins - 1)
    env_d, env_g = [], []
    for b in range(n_bins):
        sel = (which == b) & (g > 0)
        if sel.any():
            env_d.append(np.sqrt(edges[b] * edges[b + 1]))
            env_g.append(g[sel].max())
    if len(env_d) < 2:
        return {"slope": 0.0, "constant": 0.0, "threshold": float(nu - 1 - tol), "passed": True,
                "n_probes": int(keep.sum()), "degenerate": True}
    slope, intercept = np.polyfit(np.log(env_d), np.log(env_g), 1)
    return {
        "slope": float(slope),
        "constant": float(np.exp(intercept)),
        "threshold": float(nu - 1 - tol),
        "passed": bool(slope >= nu - 1 - tol),
        "n_probes": int(keep.sum()),
        "degenerate": False,
    }
