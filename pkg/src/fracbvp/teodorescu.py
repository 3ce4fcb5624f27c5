"""Teodorescu transforms and the staircase form of the volume correction.

Two quadratures live here.

``teodorescu`` integrates a gridded density against the Cauchy kernel
with piecewise-constant cells; each cell integral of the kernel is taken in
closed form (planar and spatial boxes), so the cell holding the evaluation
point needs no special treatment.

``Staircase`` serves the boundary value solvers.  For a density of the form
``D phi`` with ``phi`` smooth on a union ``U`` of grid cells, the divergence
theorem turns each cell integral ``int_C K(y - x) D phi(y) dV`` into a
surface integral of ``K n phi`` over ``dC`` (minus ``phi(x)`` when ``x``
lies in ``C``); interior faces cancel, leaving the outer faces of ``U``.
This integrates ``D phi`` over ``U`` exactly up to face quadrature, using
only values of ``phi``.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings

import numpy as np

from .clifford import conj_arr, gp_arr
from .fields import MultivectorField, reduced_operator_coeffs, sphere_area
from .clifford import generator_arr

log = logging.getLogger(__name__)

__all__ = [
    "box_kernel_integrals",
    "kernel_coefficients",
    "operator_coefficients",
    "teodorescu",
    "Staircase",
    "build_staircase",
]


# ---------------------------------------------------------------------------
# closed-form box integrals of w_k / |w|^m


def _F2(u, v):
    """Antiderivative with mixed derivative ``u / (u^2 + v^2)``."""
    r2 = u * u + v * v
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(r2 > 0, 0.5 * v * np.log(np.where(r2 > 0, r2, 1.0)), 0.0)
        t2 = np.where(u != 0, u * np.arctan(v / np.where(u != 0, u, 1.0)), 0.0)
    return t1 + t2


def _log_plus(a, r, rest2):
    """``log(a + r)`` with ``r = sqrt(a^2 + rest2)``, stable for ``a < 0``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        pos = np.log(np.where(a >= 0, a + r, 1.0))
        neg = np.log(np.where((a < 0) & (rest2 > 0), rest2 / np.where(a < 0, r - a, 1.0), 1.0))
    return np.where(a >= 0, pos, neg)


def _F3(u, v, w):
    """Antiderivative with mixed third derivative ``u / |x|^3``."""
    r2 = u * u + v * v + w * w
    r = np.sqrt(r2)
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(v != 0, v * _log_plus(w, r, u * u + v * v), 0.0)
        t2 = np.where(w != 0, w * _log_plus(v, r, u * u + w * w), 0.0)
        den = np.where((u != 0) & (r > 0), u * r, 1.0)
        t3 = np.where((u != 0) & (r > 0), u * np.arctan(v * w / den), 0.0)
    return -(t1 + t2 - t3)


def box_kernel_integrals(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """``int_box w_k / |w|^m dw`` for boxes ``[lo, hi]`` (shape ``(..., m)``)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    m = lo.shape[-1]
    out = np.empty(lo.shape)
    corners = list(itertools.product((0, 1), repeat=m))
    for k in range(m):
        perm = [k] + [j for j in range(m) if j != k]
        acc = 0.0
        for c in corners:
            pt = [hi[..., p] if c[i] else lo[..., p] for i, p in enumerate(perm)]
            sgn = (-1) ** (m - sum(c))
            if m == 2:
                acc = acc + sgn * _F2(*pt)
            elif m == 3:
                acc = acc + sgn * _F3(*pt)
            else:
                raise NotImplementedError("closed forms exist for m = 2, 3")
        out[..., k] = acc
    return out


# ---------------------------------------------------------------------------
# kernels as linear combinations of w_k / |w|^m


def operator_coefficients(kind: str, m: int, i0: int = 1) -> list[np.ndarray]:
    """Per-axis coefficients ``c_k`` of the first-order operator ``sum c_k d_k``."""
    if kind == "vector":
        return [generator_arr(m, k + 1) for k in range(m)]
    if kind == "reduced":
        return reduced_operator_coeffs(m, i0)
    raise ValueError("kind must be 'vector' or 'reduced'")


def kernel_coefficients(kind: str, m: int, i0: int = 1) -> list[np.ndarray]:
    """``K(w) = sum_k kc_k w_k / (sigma_m |w|^m)`` with ``kc_k = conj(c_k)``."""
    return [conj_arr(c) for c in operator_coefficients(kind, m, i0)]


def _kind_for(field: MultivectorField) -> str:
    m, k = field.ambient_dim, field.clifford_dim
    if k == m:
        return "vector"
    if k == m - 1:
        return "reduced"
    raise ValueError(f"no Cauchy kernel for Cl({k}) values on R^{m}")


def teodorescu(field: MultivectorField, x, side: str = "left", i0: int = 1, chunk: int = 256) -> np.ndarray:
    """Left ``-int K(y-x) u(y) dV`` or right ``-int u(y) K(y-x) dV`` transform.

    Each node carries a cube of side ``h``; the kernel is integrated exactly
    over each cube and the density is taken constant on it.

    Returns
    -------
    ndarray, shape (N, 2**k)
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    m = field.ambient_dim
    kc = kernel_coefficients(_kind_for(field), m, i0)
    nodes = field.nodes().reshape(-1, m)
    dens = field.trailing().reshape(-1, field.values.shape[0])
    keep = field.valid.reshape(-1) & np.any(dens != 0, axis=1)
    nodes, dens = nodes[keep], dens[keep]
    support = np.ptp(nodes, axis=0).max() if len(nodes) > 1 else 0.0
    if len(nodes) and field.h > support / 8:
        warnings.warn("Teodorescu grid is coarse relative to the support", RuntimeWarning, stacklevel=2)
    sig = sphere_area(m)
    out = np.zeros((len(x), dens.shape[1]))
    if not len(nodes):
        return out
    half = 0.5 * field.h
    for s in range(0, len(x), chunk):
        xs = x[s : s + chunk]
        lo = nodes[None, :, :] - half - xs[:, None, :]
        I = box_kernel_integrals(lo, lo + field.h) / sig  # (X, C, m)
        for k in range(m):
            S = I[..., k] @ dens  # (X, K)
            out[s : s + chunk] += gp_arr(kc[k], S) if side == "left" else gp_arr(S, kc[k])
    return -out


# ---------------------------------------------------------------------------
# staircase surfaces


_GAUSS = {n: np.polynomial.legendre.leggauss(n) for n in (1, 2, 3, 4)}


class Staircase:
    """Outer faces of a cell union ``U`` next to a boundary, with quadrature.

    Attributes
    ----------
    points : (Q, m) quadrature nodes on the faces
    weights : (Q,) face-area weights
    axis : (Q,) index of the face normal's axis
    sign : (Q,) +1/-1, outward normal of ``U`` is ``sign * e_axis``
    h : cell size
    side : 'inner' or 'outer'
    """

    def __init__(self, points, weights, axis, sign, h, side, band):
        self.points = points
        self.weights = weights
        self.axis = axis
        self.sign = sign
        self.h = h
        self.side = side
        self.band = band

    def __len__(self) -> int:
        return len(self.points)

    def normal_coeffs(self, coeffs: list[np.ndarray]) -> np.ndarray:
        """Algebra normal ``sign * c_axis`` per node, shape (Q, 2**k)."""
        C = np.stack(coeffs)
        return self.sign[:, None] * C[self.axis]

    def cauchy_sum(self, densities: np.ndarray, x, kind: str, m: int, i0: int, side: str, chunk: int = 32) -> np.ndarray:
        """``sum_q K(y_q - x) n_q f_q w_q`` (left) or ``f_q n_q K(y_q - x) w_q`` (right).

        ``densities`` holds ``f`` at the nodes, shape (Q, 2**k).
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        opc = operator_coefficients(kind, m, i0)
        kc = [conj_arr(c) for c in opc]
        nrm = self.normal_coeffs(opc)
        if side == "left":
            A = gp_arr(nrm, densities) * self.weights[:, None]
        else:
            A = gp_arr(densities, nrm) * self.weights[:, None]
        sig = sphere_area(m)
        out = np.zeros((len(x), A.shape[1]))
        for s in range(0, len(x), chunk):
            w = self.points[None, :, :] - x[s : s + chunk, None, :]
            r = np.sqrt(np.sum(w * w, axis=-1))
            scale = 1.0 / (sig * r**m)
            for k in range(m):
                S = (w[..., k] * scale) @ A
                out[s : s + chunk] += gp_arr(kc[k], S) if side == "left" else gp_arr(S, kc[k])
        return out


def build_staircase(
    boundary, h: float, side: str, lo, hi, band: float = 3.0, gauss: int = 3, clearance: float = 0.0
) -> Staircase:
    """Faces separating cells of ``U`` from cells touching the boundary.

    ``U`` is the set of grid cells (side ``h``, grid anchored at ``lo``) on the
    requested side of the boundary whose centre is farther from the boundary
    than the cell's half-diagonal plus ``clearance * h``.  Only cells within ``band * h`` of the
    boundary are enumerated, by descending a dyadic tree.
    """
    if side not in ("inner", "outer"):
        raise ValueError("side must be 'inner' or 'outer'")
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    m = lo.size
    L = float(np.max(hi - lo))
    depth = max(0, int(math.ceil(math.log2(L / h))))
    offs = np.array(list(itertools.product((0, 1), repeat=m)), dtype=np.int64)
    idx = np.zeros((1, m), dtype=np.int64)
    s = h * 2**depth
    reach = (band + clearance) * h
    for lev in range(depth + 1):
        c = lo + (idx + 0.5) * s
        d = boundary.dist(c)
        keep = d - 0.5 * s * math.sqrt(m) < reach
        idx = idx[keep]
        if lev == depth:
            break
        s *= 0.5
        idx = (2 * idx[:, None, :] + offs[None]).reshape(-1, m)
    c = lo + (idx + 0.5) * h
    d = boundary.dist(c)
    within = d < reach
    idx, c, d = idx[within], c[within], d[within]
    ins = boundary.inside(c)
    hd = 0.5 * h * math.sqrt(m)
    in_u = (ins if side == "inner" else ~ins) & (d > hd + clearance * h)

    shift = np.int64(2**depth + 2)
    base = np.int64(2 * shift + 1)

    def enc(ii):
        key = np.zeros(len(ii), dtype=np.int64)
        for k in range(m):
            key = key * base + (ii[:, k] + shift)
        return key

    keys = enc(idx)
    order = np.argsort(keys)
    skeys, su = keys[order], in_u[order]
    gx, gw = _GAUSS[gauss]
    pts, wts, axs, sgs = [], [], [], []
    uidx, uc = idx[in_u], c[in_u]
    for k in range(m):
        for sgn in (-1, 1):
            nb = uidx.copy()
            nb[:, k] += sgn
            q = enc(nb)
            pos = np.minimum(np.searchsorted(skeys, q), len(skeys) - 1)
            found = skeys[pos] == q
            face = found & ~su[pos]
            if not face.any():
                continue
            fc = uc[face].copy()
            fc[:, k] += sgn * 0.5 * h
            others = [j for j in range(m) if j != k]
            grid = list(itertools.product(range(gauss), repeat=m - 1))
            for g in grid:
                p = fc.copy()
                w = np.full(len(fc), h ** (m - 1))
                for j, gi in zip(others, g):
                    p[:, j] += 0.5 * h * gx[gi]
                    w *= 0.5 * gw[gi]
                pts.append(p)
                wts.append(w)
                axs.append(np.full(len(fc), k))
                sgs.append(np.full(len(fc), float(sgn)))
    if not pts:
        raise RuntimeError("staircase is empty; grid too coarse for the boundary")
    st = Staircase(np.concatenate(pts), np.concatenate(wts), np.concatenate(axs), np.concatenate(sgs), h, side, reach)
    log.debug("staircase %s: %d nodes at h=%g", side, len(st), h)
    return st
