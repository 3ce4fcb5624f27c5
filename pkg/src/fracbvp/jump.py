"""Scalar additive jump problem ``Phi+ - Phi- = g`` on possibly fractal boundaries.

Pipeline
--------
1. Split the Cl(n)-valued datum into even part and odd cofactor and move
   both to Cl(n-1) with beta; the even branch carries the conjugated datum.
2. Whitney-extend both branch data from boundary samples.
3. For each branch pick an inner (``u chi+``) or outer (``-u chi* rho``)
   density ``phi`` and form ``Upsilon = phi + int K(y - x) D phi(y) dV``
   (right-sided for the even branch, left-sided for the odd one).  The volume
   term is integrated exactly on the cells resolved away from the boundary
   through their faces (see :mod:`fracbvp.teodorescu`).
4. Assemble ``Phi = beta^-1(conj Upsilon0) + e_i0 beta^-1(Upsilon1) + c``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .clifford import beta_arr, beta_inv_arr, conj_arr, recompose_arr, split_arr
from .fields import MultivectorField, cauchy_riemann_apply
from .fractal import PolyrectRegion, Sphere, cutoff_rho
from .metrics import marcinkiewicz_closed_form
from .teodorescu import Staircase, build_staircase
from .whitney import CompactSample, decompose, extend, holder_seminorm

log = logging.getLogger(__name__)

SIDES = ("inner", "outer")
STRICT_MARGIN = 1e-12

__all__ = [
    "JumpProblem",
    "SolutionVariant",
    "SolvedField",
    "Extrapolated",
    "NotCertifiedError",
    "check_solvability",
    "check_uniqueness_window",
    "boundary_exponents",
    "split_data",
    "solve",
    "jump_residual",
    "monogenicity_residual",
    "log_holder_example_g",
    "smooth_example_g",
    "holder_profile",
]


class NotCertifiedError(RuntimeError):
    """The requested variant is not covered by the solvability inequalities."""


def holder_profile(xi, beta: float) -> np.ndarray:
    """``|xi|^(beta/(beta+1)) log|xi|``, extended by 0 at the origin."""
    xi = np.abs(np.asarray(xi, dtype=float))
    nu = beta / (beta + 1.0)
    safe = np.where(xi > 0, xi, 1.0)
    return np.where(xi > 0, safe**nu * np.log(safe), 0.0)


def log_holder_example_g(beta: float) -> Callable[[np.ndarray], np.ndarray]:
    """``x1 x2 + (x1 + x2) e1 + (x1 - x2) e2 + f(x1) e12`` with the log-Hölder profile."""

    def g(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros((len(x), 4))
        out[:, 0] = x[:, 0] * x[:, 1]
        out[:, 1] = x[:, 0] + x[:, 1]
        out[:, 2] = x[:, 0] - x[:, 1]
        out[:, 3] = holder_profile(x[:, 0], beta)
        return out

    return g


def smooth_example_g(n: int) -> Callable[[np.ndarray], np.ndarray]:
    """Smooth test datum with every blade populated (n = 2 or 3)."""
    if n not in (2, 3):
        raise ValueError("smooth example defined for n = 2, 3")

    def g(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        x1, x2 = x[:, 0], x[:, 1]
        if n == 2:
            cols = [x1 * x2, x1 + x2, x1 - x2, np.sin(x1)]
        else:
            x3 = x[:, 2]
            cols = [x1 * x2, x1 + x2, x2 - x3, x3 * x1, np.sin(x1), x1 - x3, np.cos(x2), x1 * x2 * x3]
        return np.stack(cols, axis=1)

    return g


def boundary_exponents(boundary) -> tuple[float, float]:
    """Closed-form inner/outer Marcinkiewicz exponents of a supported boundary."""
    if isinstance(boundary, Sphere):
        return 1.0, 1.0
    if isinstance(boundary, PolyrectRegion):
        return marcinkiewicz_closed_form(boundary.spec.alpha, boundary.spec.beta)
    raise TypeError("unsupported boundary type")


@dataclass(frozen=True)
class SolutionVariant:
    """Inner or outer density for the even and the odd branch."""

    even: str = "inner"
    odd: str = "inner"

    def __post_init__(self):
        if self.even not in SIDES or self.odd not in SIDES:
            raise ValueError("variant sides must be 'inner' or 'outer'")

    @classmethod
    def all(cls) -> list["SolutionVariant"]:
        return [cls(a, b) for a in SIDES for b in SIDES]

    @property
    def label(self) -> str:
        return f"{self.even},{self.odd}"

    @classmethod
    def parse(cls, text: str) -> "SolutionVariant":
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 2:
            raise ValueError("variant must read 'even_side,odd_side'")
        return cls(*parts)


def check_solvability(nu_even: float, nu_odd: float, m_plus: float, m_minus: float, n: int) -> dict:
    """Evaluate the per-part, per-side inequalities ``nu_j > 1 - m^(+/-)/n``.

    The datum as a whole has exponent ``min(nu_even, nu_odd)``; the global
    test uses ``m = max(m+, m-)``.  Inequalities are strict (a margin of
    1e-12 keeps equality from passing through rounding).
    """
    thr = {"inner": 1.0 - m_plus / n, "outer": 1.0 - m_minus / n}
    parts = {"even": nu_even, "odd": nu_odd}
    per = {p: {s: bool(v > thr[s] + STRICT_MARGIN) for s in SIDES} for p, v in parts.items()}
    certified = [v.label for v in SolutionVariant.all() if per["even"][v.even] and per["odd"][v.odd]]
    nu = min(nu_even, nu_odd)
    m = max(m_plus, m_minus)
    return {
        "n": n,
        "nu": nu,
        "nu_even": nu_even,
        "nu_odd": nu_odd,
        "m_plus": m_plus,
        "m_minus": m_minus,
        "threshold_inner": thr["inner"],
        "threshold_outer": thr["outer"],
        "solvable_by_inner": bool(nu > thr["inner"] + STRICT_MARGIN),
        "solvable_by_outer": bool(nu > thr["outer"] + STRICT_MARGIN),
        "solvable": bool(nu > 1.0 - m / n + STRICT_MARGIN),
        "parts": per,
        "certified_variants": certified,
    }


def check_uniqueness_window(dim_upper: float, nu: float, m: float, n: int) -> dict:
    """Open interval ``(dim - (n-1), 1 - n(1-nu)/m)`` of admissible Hölder classes."""
    if dim_upper < n - 1:
        raise ValueError("dimension bound below the topological dimension")
    lo = dim_upper - (n - 1)
    hi = 1.0 - n * (1.0 - nu) / m
    return {
        "lower": lo,
        "upper": hi,
        "nonempty": bool(hi > lo),
        "distinct_solutions_possible": bool(lo >= hi),
        "dimension_is_upper_bound": True,
    }


def split_data(g_vals: np.ndarray, i0: int) -> tuple[np.ndarray, np.ndarray]:
    """Branch data in Cl(n-1): ``(conj beta(even part), beta(odd cofactor))``."""
    a0, a1 = split_arr(g_vals, i0)
    return conj_arr(beta_arr(a0, i0)), beta_arr(a1, i0)


def assemble(ups0: np.ndarray, ups1: np.ndarray, i0: int) -> np.ndarray:
    """``beta^-1(conj Upsilon0) + e_i0 beta^-1(Upsilon1)``."""
    return recompose_arr(beta_inv_arr(conj_arr(ups0), i0), beta_inv_arr(ups1, i0), i0)


@dataclass
class JumpProblem:
    """Jump datum ``g`` on the boundary of a Jordan region in R^n.

    Parameters
    ----------
    n : ambient dimension (values in Cl(n))
    boundary : Sphere or PolyrectRegion
    g : callable mapping points (N, n) to Cl(n) coefficients (N, 2**n)
    nu : asserted Hölder exponent of ``g``
    pivot : index i0 of the distinguished generator
    c : value at infinity, Cl(n) coefficients
    nu_even, nu_odd : asserted exponents of the two parts (default ``nu``);
        ``nu`` must equal their minimum
    """

    n: int
    boundary: object
    g: Callable[[np.ndarray], np.ndarray]
    nu: float
    pivot: int = 1
    c: np.ndarray | None = None
    nu_even: float | None = None
    nu_odd: float | None = None
    label: str = "custom"

    def __post_init__(self):
        if self.boundary.ambient_dim != self.n:
            raise ValueError("boundary dimension differs from n")
        if not 1 <= self.pivot <= self.n:
            raise ValueError("pivot outside 1..n")
        if not 0 < self.nu <= 1:
            raise ValueError("nu must lie in (0, 1]")
        self.nu_even = self.nu if self.nu_even is None else self.nu_even
        self.nu_odd = self.nu if self.nu_odd is None else self.nu_odd
        if abs(min(self.nu_even, self.nu_odd) - self.nu) > 1e-12:
            raise ValueError("nu must equal min(nu_even, nu_odd)")
        c = np.zeros(1 << self.n) if self.c is None else np.asarray(self.c, dtype=float)
        if c.shape != (1 << self.n,):
            raise ValueError("c must have 2**n coefficients")
        self.c = c
        lo, hi = self.boundary.bbox
        probe = np.stack(np.meshgrid(*[np.linspace(a, b, 9) for a, b in zip(lo, hi)], indexing="ij"), -1)
        if not self.boundary.inside(probe.reshape(-1, self.n)).any():
            raise ValueError("boundary encloses no interior")

    def samples(self, spacing: float) -> CompactSample:
        pts = self.boundary.boundary_samples(spacing)
        pts = np.unique(pts, axis=0)
        return CompactSample(pts, self.g(pts), self.nu)

    def holder_check(self, spacing: float = 0.02, max_pairs: int = 200_000) -> dict:
        s = self.samples(spacing)
        M = holder_seminorm(s.points, s.values, self.nu, max_pairs=max_pairs)
        return {"seminorm": M, "finite": bool(np.isfinite(M)), "n_samples": len(s.points)}

    def exponents(self) -> tuple[float, float]:
        return boundary_exponents(self.boundary)

    def solvability(self) -> dict:
        mp, mm = self.exponents()
        return check_solvability(self.nu_even, self.nu_odd, mp, mm, self.n)


@dataclass
class SolvedField:
    """Evaluators of ``Phi`` and of the reduced pair ``(Upsilon0, Upsilon1)``."""

    problem: JumpProblem
    variant: SolutionVariant
    staircases: dict
    densities: dict
    h: float
    provenance: dict = field(default_factory=dict)

    @property
    def i0(self) -> int:
        return self.problem.pivot

    def _branch(self, which: str, x: np.ndarray) -> np.ndarray:
        side = self.variant.even if which == "even" else self.variant.odd
        st: Staircase = self.staircases[side]
        dens = self.densities[(which, side)]
        n = self.problem.n
        hand = "right" if which == "even" else "left"
        val = st.cauchy_sum(dens, x, "reduced", n, self.i0, hand)
        return val if side == "inner" else -val

    def valid(self, x) -> np.ndarray:
        """Points clear of the unresolved band next to the boundary."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        gap = math.sqrt(self.problem.n) + self.provenance.get("clearance", 0.0)
        return self.problem.boundary.dist(x) > 1.01 * gap * self.h

    def upsilon(self, x):
        """``(Upsilon0, Upsilon1, valid)`` at points ``x``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self._branch("even", x), self._branch("odd", x), self.valid(x)

    def evaluate(self, x):
        """``(Phi, valid)`` with ``Phi`` of shape (N, 2**n)."""
        u0, u1, ok = self.upsilon(x)
        return assemble(u0, u1, self.i0) + self.problem.c, ok

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(x)[0]


@dataclass
class Extrapolated:
    """Two-level Richardson combination ``2 F(h) - F(2h)`` of a solution.

    The unresolved band next to the boundary contributes an error linear in
    the cell size; combining two nested grids removes that term.
    """

    fine: object
    coarse: object

    @property
    def problem(self):
        return self.fine.problem

    @property
    def h(self) -> float:
        return self.fine.h

    @property
    def i0(self) -> int:
        return self.fine.i0

    @property
    def provenance(self) -> dict:
        return {"richardson": True, "fine": self.fine.provenance, "coarse": self.coarse.provenance}

    def valid(self, x) -> np.ndarray:
        return self.fine.valid(x) & self.coarse.valid(x)

    def upsilon(self, x):
        f0, f1, okf = self.fine.upsilon(x)
        c0, c1, okc = self.coarse.upsilon(x)
        return 2.0 * f0 - c0, 2.0 * f1 - c1, okf & okc

    def evaluate(self, x):
        f, okf = self.fine.evaluate(x)
        c, okc = self.coarse.evaluate(x)
        return 2.0 * f - c, okf & okc

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(x)[0]


def _grid_box(boundary, h: float, pad: float):
    lo, hi = boundary.bbox
    lo = np.asarray(lo, float) - pad
    hi = np.asarray(hi, float) + pad
    L = h * 2 ** math.ceil(math.log2(float(np.max(hi - lo)) / h))
    centre = 0.5 * (lo + hi)
    # snap so that grid lines are reproducible multiples of h
    lo = np.floor((centre - 0.5 * L) / h) * h
    return lo, lo + L


def _build(
    boundary,
    n: int,
    i0: int,
    points: np.ndarray,
    branch0: np.ndarray,
    branch1: np.ndarray,
    variant: SolutionVariant,
    h: float,
    nu: float,
    spacing: float,
    whitney_depth: int | None,
    gauss: int,
    clearance: float,
):
    """Whitney-extend branch data and integrate them over staircases."""
    k = branch0.shape[1]
    lo, hi = _grid_box(boundary, h, pad=0.5)
    root = float(np.max(hi - lo))
    depth = whitney_depth or max(4, min(20, int(math.ceil(math.log2(root / (0.5 * h))))))
    wsample = CompactSample(points, np.concatenate([branch0, branch1], axis=1), nu)
    dec = decompose(wsample, (lo, hi), depth)
    ext = extend(wsample, dec)
    lo_b, hi_b = (np.asarray(b, dtype=float) for b in boundary.bbox)
    centre = 0.5 * (lo_b + hi_b)
    circ = float(0.5 * np.linalg.norm(hi_b - lo_b))
    rho = cutoff_rho(centre, 1.25 * circ, 1.75 * circ)
    staircases, densities = {}, {}
    collar_hits = 0
    for side in sorted({variant.even, variant.odd}):
        st = build_staircase(boundary, h, side, lo, hi, gauss=gauss, clearance=clearance)
        vals, _, flags = ext.evaluate(st.points)
        collar_hits += int(flags.sum())
        if side == "outer":
            vals = vals * rho(st.points)[:, None]
        staircases[side] = st
        densities[("even", side)] = vals[:, :k]
        densities[("odd", side)] = vals[:, k:]
    prov = {
        "variant": variant.label,
        "resolution": h,
        "sample_spacing": spacing,
        "n_samples": int(len(points)),
        "whitney_depth": depth,
        "whitney_cubes": int(len(dec)),
        "collar_nodes": collar_hits,
        "staircase_nodes": {s: int(len(staircases[s])) for s in sorted(staircases)},
        "rho_radii": [1.25 * circ, 1.75 * circ],
        "clearance": clearance,
    }
    return staircases, densities, ext, prov


def solve(
    problem: JumpProblem,
    variant: SolutionVariant,
    resolution: float = 2.0**-10,
    sample_spacing: float | None = None,
    whitney_depth: int | None = None,
    unsafe: bool = False,
    gauss: int = 3,
    clearance: float = 0.0,
    richardson: bool = False,
) -> SolvedField | Extrapolated:
    """Build the solution evaluator for one variant.

    Parameters
    ----------
    resolution : cell size ``h`` of the grid resolving the region away from S
    sample_spacing : boundary sampling for the Whitney extension (default h/2)
    whitney_depth : dyadic depth (default: finest cube about h/2)
    unsafe : skip the solvability certificate
    clearance : extra gap, in cells, between the staircase and the boundary
    richardson : also solve at ``2 h`` and return the extrapolated combination
    """
    if richardson:
        args = dict(whitney_depth=whitney_depth, unsafe=unsafe, gauss=gauss, clearance=clearance)
        fine = solve(problem, variant, resolution, sample_spacing, **args)
        coarse = solve(problem, variant, 2.0 * resolution, sample_spacing, **args)
        return Extrapolated(fine, coarse)
    cert = problem.solvability()
    if not unsafe and variant.label not in cert["certified_variants"]:
        raise NotCertifiedError(f"variant {variant.label} is not certified: {cert['parts']}")
    h = float(resolution)
    spacing = 0.5 * h if sample_spacing is None else sample_spacing
    sample = problem.samples(spacing)
    b0, b1 = split_data(sample.values, problem.pivot)
    staircases, densities, _, prov = _build(
        problem.boundary, problem.n, problem.pivot, sample.points, b0, b1, variant, h, problem.nu, spacing,
        whitney_depth, gauss, clearance,
    )
    prov["certified"] = variant.label in cert["certified_variants"]
    log.debug("solve %s: %s", variant.label, prov)
    return SolvedField(problem, variant, staircases, densities, h, prov)


def _norm(v: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(v * v, axis=-1))


def jump_residual(
    sol: SolvedField,
    probes=None,
    eps: float = 0.05,
    n_probes: int = 256,
    extrapolate: bool = True,
    seed: int = 0,
) -> dict:
    """``|Phi(x+) - Phi(x-) - g(x)|`` for boundary points pushed ``eps`` along the normal.

    With ``extrapolate`` the one-sided limits are estimated linearly from the
    offsets ``eps`` and ``eps/2`` (``2 J(eps/2) - J(eps)``), removing the
    first-order term of the normal Taylor expansion.
    """
    bd = sol.problem.boundary
    if probes is None:
        pts = bd.boundary_samples(max(eps, 1e-3))
        rng = np.random.default_rng(seed)
        pts = pts[np.sort(rng.choice(len(pts), size=min(n_probes, len(pts)), replace=False))]
    else:
        pts = np.atleast_2d(np.asarray(probes, dtype=float))
    nrm = bd.normals(pts)

    def jump(e):
        xp, xm = pts - e * nrm, pts + e * nrm
        ok = bd.inside(xp) & ~bd.inside(xm)
        ok &= (bd.dist(xp) > 0.9 * e) & (bd.dist(xm) > 0.9 * e)
        ok &= np.linalg.norm(nrm, axis=1) > 0
        fp, okp = sol.evaluate(xp)
        fm, okm = sol.evaluate(xm)
        return fp - fm, ok & okp & okm

    J1, ok1 = jump(eps)
    gv = sol.problem.g(pts)
    raw = _norm(J1 - gv)
    if extrapolate:
        J2, ok2 = jump(0.5 * eps)
        J = 2.0 * J2 - J1
        ok = ok1 & ok2
    else:
        J, ok = J1, ok1
    res = _norm(J - gv)[ok]
    return {
        "eps": eps,
        "extrapolated": extrapolate,
        "max": float(res.max()) if res.size else math.nan,
        "median": float(np.median(res)) if res.size else math.nan,
        "raw_max": float(raw[ok].max()) if ok.any() else math.nan,
        "n_used": int(ok.sum()),
        "n_skipped": int((~ok).sum()),
    }


def monogenicity_residual(sol: SolvedField, centres, spacings=(0.04, 0.02, 0.01)) -> dict:
    """Discrete Cauchy-Riemann residuals of ``Upsilon0`` (right) and ``Upsilon1`` (left).

    A 5-point-per-axis stencil patch of spacing ``hp`` is centred at each
    probe; the maximum residual at the patch centre is recorded per spacing
    and the observed order is the log2 ratio between successive spacings.
    """
    centres = np.atleast_2d(np.asarray(centres, dtype=float))
    n = sol.problem.n
    bd = sol.problem.boundary
    need = 4 * max(spacings)
    ok = bd.dist(centres) >= max(need, 4 * sol.h)
    centres = centres[ok]
    if not len(centres):
        raise ValueError("no probe centre is far enough from the boundary")
    offs = np.arange(-2, 3)
    res = []
    for hp in spacings:
        worst = 0.0
        for c in centres:
            axes = [c[j] + hp * offs for j in range(n)]
            grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, n)
            u0, u1, _ = sol.upsilon(grid)
            shape = (5,) * n
            origin = tuple(a[0] for a in axes)
            f0 = MultivectorField(origin, hp, np.moveaxis(u0.reshape(shape + (-1,)), -1, 0))
            f1 = MultivectorField(origin, hp, np.moveaxis(u1.reshape(shape + (-1,)), -1, 0))
            r0 = cauchy_riemann_apply(f0, i0=sol.i0, side="right").trailing()
            r1 = cauchy_riemann_apply(f1, i0=sol.i0, side="left").trailing()
            mid = (2,) * n
            worst = max(worst, float(_norm(r0[mid])), float(_norm(r1[mid])))
        res.append(worst)
    res = np.array(res)
    with np.errstate(divide="ignore", invalid="ignore"):
        orders = np.log(res[:-1] / res[1:]) / np.log(np.array(spacings[:-1]) / np.array(spacings[1:]))
    return {
        "spacings": list(map(float, spacings)),
        "residuals": res.tolist(),
        "orders": orders.tolist(),
        "slope": float(np.polyfit(np.log(spacings), np.log(np.maximum(res, 1e-300)), 1)[0]),
        "n_centres": int(len(centres)),
    }
