"""Multivector fields on uniform grids and first-order Clifford operators.

A :class:`MultivectorField` stores one Cl(k) element per node of a uniform
lattice in R^m, blade-major: ``values[blade, i_1, ..., i_m]``.  Derivatives
are second-order central differences; nodes whose stencil leaves the grid
(or touches a masked node) are flagged invalid rather than handled with
one-sided formulas.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .clifford import (
    beta_arr,
    blade_label,
    canonical_order,
    generator_arr,
    gp_arr,
    parse_blade_label,
    split_arr,
)

__all__ = [
    "MultivectorField",
    "sphere_area",
    "dirac_apply",
    "first_order_apply",
    "cauchy_riemann_apply",
    "reduced_operator_coeffs",
    "reduction_identity_residual",
    "fundamental_solution",
    "kernel_arr",
    "reduced_kernel_arr",
    "write_field",
    "read_field",
]


@dataclass(frozen=True)
class MultivectorField:
    """Cl(k)-valued samples on the lattice ``origin + h * index``.

    Attributes
    ----------
    origin : tuple of float
        Coordinates of node ``(0, ..., 0)``.
    h : float
        Grid spacing, identical along every axis.
    values : ndarray, shape (2**k, n_1, ..., n_m)
    mask : ndarray of bool, shape (n_1, ..., n_m), optional
        ``True`` marks valid nodes.
    """

    origin: tuple
    h: float
    values: np.ndarray
    mask: np.ndarray | None = field(default=None)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim < 2:
            raise ValueError("values must have a blade axis and at least one grid axis")
        if len(self.origin) != vals.ndim - 1:
            raise ValueError("origin length must match the number of grid axes")
        if not self.h > 0:
            raise ValueError("grid spacing must be positive")
        if min(vals.shape[1:]) < 3:
            raise ValueError("need at least 3 nodes per axis for central stencils")
        size = vals.shape[0]
        if size & (size - 1):
            raise ValueError("blade axis length must be a power of two")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        if self.mask is not None:
            m = np.asarray(self.mask, dtype=bool)
            if m.shape != vals.shape[1:]:
                raise ValueError("mask shape must match the grid")
            object.__setattr__(self, "mask", m)

    @property
    def ambient_dim(self) -> int:
        return self.values.ndim - 1

    @property
    def clifford_dim(self) -> int:
        return self.values.shape[0].bit_length() - 1

    @property
    def shape(self) -> tuple:
        return self.values.shape[1:]

    @property
    def valid(self) -> np.ndarray:
        return np.ones(self.shape, dtype=bool) if self.mask is None else self.mask

    def axes(self) -> list[np.ndarray]:
        return [o + self.h * np.arange(n) for o, n in zip(self.origin, self.shape)]

    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``(n_1, ..., n_m, m)``."""
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"), axis=-1)

    def trailing(self) -> np.ndarray:
        """Values with the blade axis moved last: ``(n_1, ..., n_m, 2**k)``."""
        return np.moveaxis(self.values, 0, -1)

    @classmethod
    def from_function(
        cls,
        fn: Callable[[np.ndarray], np.ndarray],
        origin: Sequence[float],
        h: float,
        shape: Sequence[int],
    ) -> "MultivectorField":
        """Sample ``fn(points) -> (N, 2**k)`` on the lattice."""
        axes = [o + h * np.arange(n) for o, n in zip(origin, shape)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(shape))
        vals = np.asarray(fn(pts), dtype=float)
        vals = vals.reshape(tuple(shape) + (vals.shape[-1],))
        return cls(tuple(origin), h, np.moveaxis(vals, -1, 0))

    def with_values(self, trailing_values: np.ndarray, mask: np.ndarray | None) -> "MultivectorField":
        return MultivectorField(self.origin, self.h, np.moveaxis(trailing_values, -1, 0), mask)

    def max_norm(self) -> float:
        """Largest pointwise coefficient norm over valid nodes."""
        norms = np.sqrt(np.sum(self.values**2, axis=0))
        v = norms[self.valid]
        return float(v.max()) if v.size else 0.0


def sphere_area(m: int) -> float:
    """Surface area of the unit sphere in R^m."""
    return 2.0 * math.pi ** (m / 2) / math.gamma(m / 2)


# ---------------------------------------------------------------------------
# differential operators


def _central_diff(f: MultivectorField, axis: int) -> tuple[np.ndarray, np.ndarray]:
    v = f.trailing()
    d = np.zeros_like(v)
    lo = [slice(None)] * f.ambient_dim
    hi = [slice(None)] * f.ambient_dim
    mid = [slice(None)] * f.ambient_dim
    lo[axis], mid[axis], hi[axis] = slice(0, -2), slice(1, -1), slice(2, None)
    d[tuple(mid)] = (v[tuple(hi)] - v[tuple(lo)]) / (2.0 * f.h)
    ok = np.zeros(f.shape, dtype=bool)
    valid = f.valid
    ok[tuple(mid)] = valid[tuple(mid)] & valid[tuple(lo)] & valid[tuple(hi)]
    return d, ok


def first_order_apply(f: MultivectorField, coeffs: Sequence[np.ndarray], side: str = "left") -> MultivectorField:
    """Apply ``sum_j c_j d/dx_j`` with constant multivector coefficients.

    ``side='left'`` computes ``c_j * df/dx_j``; ``side='right'`` computes
    ``df/dx_j * c_j``.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    if len(coeffs) != f.ambient_dim:
        raise ValueError("need one coefficient per grid axis")
    out = np.zeros(f.shape + (f.values.shape[0],))
    ok = np.ones(f.shape, dtype=bool)
    for axis, c in enumerate(coeffs):
        d, okj = _central_diff(f, axis)
        ok &= okj
        out += gp_arr(c, d) if side == "left" else gp_arr(d, c)
    out[~ok] = 0.0
    return f.with_values(out, ok)


def dirac_apply(f: MultivectorField, side: str = "left") -> MultivectorField:
    """Vectorial Dirac operator ``sum_j e_j d/dx^j`` (generators = grid axes)."""
    m, k = f.ambient_dim, f.clifford_dim
    if m != k:
        raise ValueError(f"Dirac operator needs Cl({m}) values on R^{m}, got Cl({k})")
    return first_order_apply(f, [generator_arr(k, j + 1) for j in range(m)], side)


def reduced_operator_coeffs(m: int, i0: int, conjugated: bool = False) -> list[np.ndarray]:
    """Per-axis coefficients of ``d/dx^i0 +- sum_{i != i0} e_i' d/dx^i`` in Cl(m-1)."""
    if not 1 <= i0 <= m:
        raise ValueError(f"pivot i0={i0} outside 1..{m}")
    k = m - 1
    sgn = -1.0 if conjugated else 1.0
    coeffs = []
    for i in range(1, m + 1):
        if i == i0:
            c = np.zeros(1 << k)
            c[0] = 1.0
        else:
            c = sgn * generator_arr(k, i if i < i0 else i - 1)
        coeffs.append(c)
    return coeffs


def cauchy_riemann_apply(
    f: MultivectorField, conjugated: bool = False, i0: int = 1, side: str = "left"
) -> MultivectorField:
    """Reduced Cauchy-Riemann operator acting on Cl(m-1)-valued fields on R^m."""
    m, k = f.ambient_dim, f.clifford_dim
    if k != m - 1:
        raise ValueError(f"reduced operator needs Cl({m - 1}) values on R^{m}, got Cl({k})")
    return first_order_apply(f, reduced_operator_coeffs(m, i0, conjugated), side)


def _primed_coeffs(n: int, i0: int, conjugated: bool) -> list[np.ndarray]:
    e0 = generator_arr(n, i0)
    sgn = -1.0 if conjugated else 1.0
    out = []
    for i in range(1, n + 1):
        if i == i0:
            c = np.zeros(1 << n)
            c[0] = 1.0
        else:
            c = sgn * gp_arr(e0, generator_arr(n, i))
        out.append(c)
    return out


def reduction_identity_residual(f: MultivectorField, i0: int) -> tuple[np.ndarray, float]:
    """Node-wise ``|d_n f - (-D'(f1) + e_i0 conj(D')(f0))|`` and its max.

    Both sides use identical stencils, so the residual is round-off for any
    field, monogenic or not.
    """
    n = f.ambient_dim
    if f.clifford_dim != n:
        raise ValueError("identity needs Cl(n)-valued fields on R^n")
    lhs = dirac_apply(f)
    f0, f1 = split_arr(f.trailing(), i0)
    F0 = f.with_values(f0, f.mask)
    F1 = f.with_values(f1, f.mask)
    d1 = first_order_apply(F1, _primed_coeffs(n, i0, False))
    d0 = first_order_apply(F0, _primed_coeffs(n, i0, True))
    rhs = -d1.trailing() + gp_arr(generator_arr(n, i0), d0.trailing())
    ok = lhs.valid & d0.valid & d1.valid
    res = np.sqrt(np.sum((lhs.trailing() - rhs) ** 2, axis=-1))
    res[~ok] = 0.0
    return res, float(res.max(initial=0.0))


def primed_operator_apply(f: MultivectorField, i0: int, conjugated: bool = False) -> MultivectorField:
    """``D'`` (or its conjugate) with coefficients ``e_i0 e_i`` in Cl(n)^+."""
    return first_order_apply(f, _primed_coeffs(f.ambient_dim, i0, conjugated))


def beta_field(f: MultivectorField, i0: int) -> MultivectorField:
    """Apply beta_{i0} node-wise to an even-valued field."""
    return f.with_values(beta_arr(f.trailing(), i0), f.mask)


# ---------------------------------------------------------------------------
# fundamental solutions


def kernel_arr(kind: str, m: int, x: np.ndarray) -> np.ndarray:
    """Fundamental solution sampled at points ``x`` (shape ``(..., m)``).

    ``kind='vector'``: Cl(m)-valued ``conj(x) / (sigma_m |x|^m)`` for the
    Dirac operator on R^m.  ``kind='paravector'``: Cl(m-1)-valued kernel of
    the Cauchy-Riemann operator with ``x = x^0 + sum x^j e_j``.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != m:
        raise ValueError(f"points must have {m} coordinates")
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0.0):
        raise ZeroDivisionError("fundamental solution is singular at the origin")
    scale = 1.0 / (sphere_area(m) * r**m)
    if kind == "vector":
        out = np.zeros(x.shape[:-1] + (1 << m,))
        for j in range(m):
            out[..., 1 << j] = -x[..., j] * scale
    elif kind == "paravector":
        out = np.zeros(x.shape[:-1] + (1 << (m - 1),))
        out[..., 0] = x[..., 0] * scale
        for j in range(1, m):
            out[..., 1 << (j - 1)] = -x[..., j] * scale
    else:
        raise ValueError("kind must be 'vector' or 'paravector'")
    return out


def reduced_kernel_arr(w: np.ndarray, i0: int) -> np.ndarray:
    """Paravector kernel composed with alpha_{i0}: ``conj(alpha(w)) / (sigma_n |w|^n)``."""
    w = np.asarray(w, dtype=float)
    n = w.shape[-1]
    order = [i0 - 1] + [i for i in range(n) if i != i0 - 1]
    return kernel_arr("paravector", n, w[..., order])


def fundamental_solution(kind: str, m: int, x: Sequence[float]):
    from .clifford import Multivector

    vals = kernel_arr(kind, m, np.asarray(x, dtype=float)[None, :])[0]
    return Multivector(vals.size.bit_length() - 1, vals)


# ---------------------------------------------------------------------------
# I/O: JSON header + CSV body


def write_field(f: MultivectorField, stem: str | Path) -> tuple[Path, Path]:
    """Write ``<stem>.json`` (grid metadata) and ``<stem>.csv`` (node rows)."""
    stem = Path(stem)
    k = f.clifford_dim
    order = canonical_order(k)
    header = {
        "ambient_dim": f.ambient_dim,
        "clifford_dim": k,
        "origin": list(f.origin),
        "h": f.h,
        "shape": list(f.shape),
        "blades": [blade_label(b) for b in order],
        "masked": f.mask is not None,
    }
    jpath = stem.with_suffix(".json")
    cpath = stem.with_suffix(".csv")
    jpath.write_text(json.dumps(header, indent=2))
    vals = f.trailing().reshape(-1, 1 << k)[:, list(order)]
    idx = np.indices(f.shape).reshape(f.ambient_dim, -1).T
    valid = f.valid.reshape(-1)
    with cpath.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"i{a}" for a in range(f.ambient_dim)] + ["valid"] + [f"e[{b}]" for b in header["blades"]])
        for row_idx, row_val, ok in zip(idx, vals, valid):
            w.writerow([*map(int, row_idx), int(ok), *(repr(float(v)) for v in row_val)])
    return jpath, cpath


def read_field(stem: str | Path) -> MultivectorField:
    stem = Path(stem)
    header = json.loads(stem.with_suffix(".json").read_text())
    shape = tuple(header["shape"])
    k = header["clifford_dim"]
    masks = [parse_blade_label(b) for b in header["blades"]]
    vals = np.zeros(shape + (1 << k,))
    valid = np.zeros(shape, dtype=bool)
    m = header["ambient_dim"]
    with stem.with_suffix(".csv").open() as fh:
        r = csv.reader(fh)
        next(r)
        for row in r:
            idx = tuple(int(t) for t in row[:m])
            valid[idx] = bool(int(row[m]))
            vals[idx + (masks,)] = [float(t) for t in row[m + 1 :]]
    return MultivectorField(
        tuple(header["origin"]), header["h"], np.moveaxis(vals, -1, 0), valid if header["masked"] else None
    )
