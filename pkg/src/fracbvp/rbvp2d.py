"""Planar Riemann problems with an even (odd-part-free) Clifford coefficient.

With ``n = 2`` and a coefficient ``G`` whose odd part vanishes, the reduced
system splits into two scalar complex problems sharing the coefficient
``conj(G0)``, where ``G0`` is the complex image of ``G`` (``1 -> 1``,
``e1 e2 -> i`` through beta).  Each is reduced to a jump problem by the
canonical functions ``X+ = exp(Gamma)`` and ``X- = (z - z0)^k exp(Gamma)``,
``k`` the winding number of ``G0`` and ``z0`` an interior point.

Boundary traces on the curve come from the staircase representation: with
``phi`` the Whitney extension restricted to one side, the evaluator at a
point of the curve equals the one-sided limit from the opposite side, and
adding ``phi`` there gives the other limit.  The staircase keeps a gap of
half a cell from the curve so these traces are well resolved.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .clifford import beta_arr, beta_inv_arr, split_arr
from .jump import (
    Extrapolated,
    JumpProblem,
    NotCertifiedError,
    SolutionVariant,
    SolvedField,
    _build,
    assemble,
    split_data,
)
from .oracles import from_complex, reduced_coordinate, to_complex
from .teodorescu import Staircase, operator_coefficients

log = logging.getLogger(__name__)

__all__ = [
    "UndersamplingError",
    "BranchError",
    "even_to_complex",
    "complex_to_even",
    "winding_index",
    "unwrap_log",
    "CoefficientProblem",
    "CanonicalPair",
    "gamma_solve",
    "moment_conditions",
    "RBVPSolution",
    "solve_rbvp",
    "rbvp_residual",
]

TRACE_CLEARANCE = 0.5


class UndersamplingError(ValueError):
    """Consecutive phase steps of the sampled coefficient reach pi/2."""


class BranchError(ValueError):
    """The logarithm does not close up along the curve."""


def even_to_complex(a: np.ndarray, i0: int = 1, atol: float = 1e-12) -> np.ndarray:
    """Complex image of even Cl(2) coefficients (raises on odd content)."""
    a0, a1 = split_arr(a, i0)
    if np.max(np.abs(a1), initial=0.0) > atol * max(1.0, float(np.max(np.abs(a), initial=0.0))):
        raise ValueError("coefficient has a nonzero odd part")
    return to_complex(beta_arr(a0, i0))


def complex_to_even(w, i0: int = 1) -> np.ndarray:
    return beta_inv_arr(from_complex(w), i0)


def winding_index(values, orientation: int = 1) -> tuple[int, int]:
    """Winding number of closed-curve samples of a nonvanishing function.

    ``values`` are ordered along the curve (closing step implied);
    ``orientation`` is -1 when that order is negative in the z-plane.
    Returns ``(k, -k)``, the index and the index of the conjugate.
    """
    w = np.asarray(values, dtype=complex)
    if np.any(w == 0):
        raise ValueError("function vanishes on the curve")
    steps = np.angle(np.roll(w, -1) / w)
    if np.any(np.abs(steps) >= 0.5 * np.pi):
        raise UndersamplingError(f"phase step {np.abs(steps).max():.3f} >= pi/2; sample more densely")
    k = int(np.rint(orientation * steps.sum() / (2 * np.pi)))
    return k, -k


def unwrap_log(values) -> np.ndarray:
    """Continuous logarithm along ordered samples, anchored at the first principal value."""
    w = np.asarray(values, dtype=complex)
    steps = np.angle(np.roll(w, -1) / w)
    if np.any(np.abs(steps) >= 0.5 * np.pi):
        raise UndersamplingError("phase step >= pi/2 while unwrapping")
    if abs(steps.sum()) > np.pi:
        raise BranchError(f"argument changes by {steps.sum():.3f} around the curve")
    arg = np.angle(w[0]) + np.concatenate([[0.0], np.cumsum(steps[:-1])])
    return np.log(np.abs(w)) + 1j * arg


def _orientation(z: np.ndarray) -> int:
    """+1 if the ordered closed polygon ``z`` is counterclockwise."""
    area = np.sum((z.conj() * np.roll(z, -1)).imag)
    return 1 if area > 0 else -1


def _interior_point(boundary, n_grid: int = 65) -> np.ndarray:
    lo, hi = (np.asarray(b, dtype=float) for b in boundary.bbox)
    axes = [np.linspace(a, b, n_grid) for a, b in zip(lo, hi)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(lo))
    pts = pts[boundary.inside(pts)]
    return pts[int(np.argmax(boundary.dist(pts)))]


@dataclass
class CoefficientProblem:
    """``Phi+ = G Phi- + g`` on a planar curve with ``G`` free of odd part.

    Parameters
    ----------
    boundary : planar Sphere or PolyrectRegion
    G, g : callables mapping points (N, 2) to Cl(2) coefficients (N, 4)
    nu : asserted Hölder exponent of ``G`` and ``g``
    min_modulus : lower bound required for ``|G0|`` on the samples
    nu_even, nu_odd : asserted exponents of the parts of ``g`` (default ``nu``)
    """

    boundary: object
    G: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    nu: float
    pivot: int = 1
    c: np.ndarray | None = None
    min_modulus: float = 1e-8
    label: str = "custom"
    nu_even: float | None = None
    nu_odd: float | None = None

    def __post_init__(self):
        if self.boundary.ambient_dim != 2:
            raise ValueError("planar problems only")
        self._jump = JumpProblem(
            2, self.boundary, self.g, self.nu, self.pivot, self.c, self.nu_even, self.nu_odd, label=self.label
        )

    @property
    def jump_problem(self) -> JumpProblem:
        return self._jump

    def coefficient(self, points) -> np.ndarray:
        """Complex image of ``G`` at points, checked against the invariants."""
        w = even_to_complex(self.G(np.atleast_2d(points)), self.pivot)
        if np.min(np.abs(w), initial=np.inf) < self.min_modulus:
            raise ValueError("coefficient vanishes (|G0| below min_modulus) on the curve")
        return w

    def ordered_samples(self, spacing: float) -> np.ndarray:
        """Curve samples in traversal order, consecutive duplicates removed."""
        pts = self.boundary.boundary_samples(spacing)
        keep = np.ones(len(pts), dtype=bool)
        keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
        pts = pts[keep]
        if len(pts) > 1 and np.all(pts[0] == pts[-1]):
            pts = pts[:-1]
        return pts

    def index(self, spacing: float = 0.01) -> tuple[int, int]:
        pts = self.ordered_samples(spacing)
        z = reduced_coordinate(pts, self.pivot)
        return winding_index(self.coefficient(pts), _orientation(z))


@dataclass
class CanonicalPair:
    """``X+ = exp(Gamma)`` inside, ``X- = (z - z0)^k exp(Gamma)`` outside."""

    boundary: object
    pivot: int
    aleph: int
    z0: complex
    staircase: Staircase
    density: np.ndarray
    side: str
    h: float
    provenance: dict = field(default_factory=dict)

    def _sum(self, x) -> np.ndarray:
        val = self.staircase.cauchy_sum(self.density, x, "reduced", 2, self.pivot, "left")
        return to_complex(val if self.side == "inner" else -val)

    def gamma(self, x) -> np.ndarray:
        """``Gamma`` at points clear of the boundary band."""
        return self._sum(np.atleast_2d(x))

    def gamma_traces(self, t, log_data) -> tuple[np.ndarray, np.ndarray]:
        """One-sided limits ``(Gamma+, Gamma-)`` at curve points with their log data."""
        e = self._sum(np.atleast_2d(t))
        log_data = np.asarray(log_data, dtype=complex)
        if self.side == "inner":
            return e + log_data, e
        return e, e - log_data

    def plus(self, x) -> np.ndarray:
        return np.exp(self.gamma(x))

    def minus(self, x) -> np.ndarray:
        z = reduced_coordinate(x, self.pivot)
        return (z - self.z0) ** self.aleph * np.exp(self.gamma(x))

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        z = reduced_coordinate(x, self.pivot)
        gam = np.exp(self.gamma(x))
        return np.where(self.boundary.inside(x), gam, (z - self.z0) ** self.aleph * gam)

    def valid(self, x) -> np.ndarray:
        x = np.atleast_2d(x)
        if not self.density.any():
            # zero log data: Gamma vanishes identically, no unresolved band
            return np.ones(len(x), dtype=bool)
        return self.boundary.dist(x) > 1.01 * (math.sqrt(2) + TRACE_CLEARANCE) * self.h


def gamma_solve(
    boundary,
    points: np.ndarray,
    log_data: np.ndarray,
    pivot: int,
    aleph: int,
    z0: complex,
    h: float,
    nu: float,
    side: str = "inner",
    spacing: float | None = None,
    whitney_depth: int | None = None,
    gauss: int = 3,
) -> CanonicalPair:
    """Solve ``Gamma+ - Gamma- = log_data`` and wrap it as canonical functions.

    ``log_data`` must be a continuous branch of the logarithm (complex values
    at ``points``).
    """
    L = from_complex(np.asarray(log_data, dtype=complex))
    var = SolutionVariant(side, side)
    st, dens, _, prov = _build(
        boundary, 2, pivot, points, L, L, var, h, nu, spacing or 0.5 * h, whitney_depth, gauss, TRACE_CLEARANCE
    )
    return CanonicalPair(boundary, pivot, aleph, complex(z0), st[side], dens[("odd", side)], side, h, prov)


def _staircase_weights(st: Staircase, dens: np.ndarray, pivot: int) -> np.ndarray:
    """Complex face weights ``n_q f_q w_q`` of a staircase sum."""
    nrm = to_complex(st.normal_coeffs(operator_coefficients("reduced", 2, pivot)))
    return nrm * to_complex(dens) * st.weights


def moment_conditions(st: Staircase, dens: np.ndarray, aleph: int, z0: complex, pivot: int = 1, sign: float = 1.0):
    """Coefficients of ``(z - z0)^-k``, ``k = 1..aleph-1``, of the particular solution at infinity.

    The particular solution is ``sign * sum_q A_q / (2 pi (zeta_q - z))``, so
    ``M_k = -sign / (2 pi) * sum_q A_q (zeta_q - z0)^(k-1)``, which equals
    ``-(1/pi) int dbar(phi) (zeta - z0)^(k-1) dA`` over the resolved cells.
    """
    if aleph <= 1:
        return []
    A = _staircase_weights(st, dens, pivot)
    zeta = reduced_coordinate(st.points, pivot) - z0
    out = []
    pw = np.ones_like(zeta)
    for _ in range(1, aleph):
        out.append(complex(-sign / (2 * np.pi) * np.sum(A * pw)))
        pw = pw * zeta
    return out


@dataclass
class RBVPSolution:
    """Solution family ``Upsilon_i = X (Phi0_i + P_i)`` and its diagnostics."""

    problem: CoefficientProblem
    canonical: CanonicalPair
    particular: SolvedField
    polynomials: tuple[np.ndarray, np.ndarray]
    moments: dict
    solvable: bool
    report: dict

    @property
    def aleph(self) -> int:
        return self.canonical.aleph

    @property
    def h(self) -> float:
        return self.particular.h

    @property
    def i0(self) -> int:
        return self.problem.pivot

    @property
    def provenance(self) -> dict:
        return self.report

    def valid(self, x) -> np.ndarray:
        return self.canonical.valid(x) & self.particular.valid(x)

    def upsilon(self, x):
        """``(Upsilon0, Upsilon1, valid)`` as Cl(1) coefficient arrays."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        p0, p1, _ = self.particular.upsilon(x)
        X = self.canonical(x)
        z = reduced_coordinate(x, self.problem.pivot)
        out = []
        for p, coef in zip((p0, p1), self.polynomials):
            poly = np.polynomial.polynomial.polyval(z, coef) if len(coef) else 0.0
            out.append(from_complex(X * (to_complex(p) + poly)))
        return out[0], out[1], self.valid(x)

    def evaluate(self, x):
        u0, u1, ok = self.upsilon(x)
        return assemble(u0, u1, self.problem.pivot) + self.problem.jump_problem.c, ok

    def __call__(self, x) -> np.ndarray:
        return self.evaluate(x)[0]


def _poly_coeffs(poly, aleph: int) -> tuple[np.ndarray, np.ndarray]:
    deg = -aleph
    if poly is None:
        zero = np.zeros(deg + 1, dtype=complex) if deg >= 0 else np.zeros(0, dtype=complex)
        return zero, zero.copy()
    p0, p1 = (np.asarray(p, dtype=complex).ravel() for p in poly)
    if deg < 0 and (p0.size or p1.size):
        raise ValueError("no polynomial freedom for index >= 1")
    if p0.size > deg + 1 or p1.size > deg + 1:
        raise ValueError(f"polynomials must have degree <= {deg}")
    return p0, p1


def solve_rbvp(
    problem: CoefficientProblem,
    variant: SolutionVariant,
    resolution: float = 2.0**-10,
    sample_spacing: float | None = None,
    whitney_depth: int | None = None,
    gamma_side: str = "inner",
    polynomials=None,
    moment_tol: float = 1e-3,
    unsafe: bool = False,
    gauss: int = 3,
    richardson: bool = False,
) -> RBVPSolution | Extrapolated:
    """Canonical functions, particular solutions, polynomial family and conditions.

    Parameters
    ----------
    variant : densities of the two particular solutions (as in the jump solver)
    gamma_side : density side used for ``Gamma``
    polynomials : pair of ascending complex coefficient arrays in ``z`` (index <= 0)
    moment_tol : a moment counts as vanishing below ``moment_tol`` times the
        largest modulus of the branch data
    richardson : also solve at ``2 h`` and return the extrapolated combination
        (the fine solution's report is at ``result.fine.report``)
    """
    if richardson:
        args = dict(whitney_depth=whitney_depth, gamma_side=gamma_side, polynomials=polynomials,
                    moment_tol=moment_tol, unsafe=unsafe, gauss=gauss)
        fine = solve_rbvp(problem, variant, resolution, sample_spacing, **args)
        coarse = solve_rbvp(problem, variant, 2.0 * resolution, sample_spacing, **args)
        return Extrapolated(fine, coarse)
    jp = problem.jump_problem
    cert = jp.solvability()
    if not unsafe and variant.label not in cert["certified_variants"]:
        raise NotCertifiedError(f"variant {variant.label} is not certified: {cert['parts']}")
    h = float(resolution)
    spacing = 0.5 * h if sample_spacing is None else sample_spacing
    i0 = problem.pivot

    ordered = problem.ordered_samples(spacing)
    zc = reduced_coordinate(ordered, i0)
    G0 = problem.coefficient(ordered)
    aleph, _ = winding_index(G0, _orientation(zc))
    z0 = complex(reduced_coordinate(_interior_point(problem.boundary), i0)[0])
    logd = unwrap_log((zc - z0) ** aleph * np.conj(G0))

    # Whitney sample set shared with the jump pipeline
    sample = jp.samples(spacing)
    _, first = np.unique(ordered, axis=0, return_index=True)
    if len(first) != len(sample.points):
        raise RuntimeError("ordered and sorted boundary samples disagree")
    log_pts = logd[first]
    canon = gamma_solve(problem.boundary, sample.points, log_pts, i0, aleph, z0, h, problem.nu, gamma_side,
                        spacing, whitney_depth, gauss)
    gp, gm = canon.gamma_traces(sample.points, log_pts)
    Xp = np.exp(gp)
    b0, b1 = split_data(sample.values, i0)
    d0 = from_complex(to_complex(b0) / Xp)
    d1 = from_complex(to_complex(b1) / Xp)
    st, dens, _, prov = _build(problem.boundary, 2, i0, sample.points, d0, d1, variant, h, problem.nu, spacing,
                               whitney_depth, gauss, 0.0)
    prov["certified"] = variant.label in cert["certified_variants"]
    particular = SolvedField(jp, variant, st, dens, h, prov)

    moments = {}
    scale = max(float(np.max(np.abs(to_complex(d0)))), float(np.max(np.abs(to_complex(d1)))), 1e-300)
    for which, side in (("even", variant.even), ("odd", variant.odd)):
        sgn = 1.0 if side == "inner" else -1.0
        moments[which] = moment_conditions(st[side], dens[(which, side)], aleph, z0, i0, sgn)
    failed = [
        {"branch": b, "k": k + 1, "value": [m.real, m.imag], "modulus": abs(m)}
        for b, ms in moments.items()
        for k, m in enumerate(ms)
        if abs(m) > moment_tol * scale
    ]
    solvable = not failed
    polys = _poly_coeffs(polynomials, aleph)
    n_complex = max(aleph - 1, 0)
    ref = (reduced_coordinate(sample.points, i0) - z0) ** aleph
    ratio_err = float(np.max(np.abs(np.exp(gp - gm) / ref - np.conj(problem.coefficient(sample.points)))))
    report = {
        "index": aleph,
        "conjugate_index": -aleph,
        "z0": [z0.real, z0.imag],
        "gamma_side": gamma_side,
        "polynomial_degree": -aleph if aleph <= 0 else None,
        "free_real_parameters": 2 * 2 * (1 - aleph) if aleph <= 0 else 0,
        "conditions_complex_per_branch": n_complex,
        "conditions_real_per_branch": 2 * n_complex,
        "conditions_complex_total": 2 * n_complex,
        "moment_normalization": "M_k = -(1/pi) int dbar(phi) (zeta - z0)^(k-1) dA",
        "moment_tolerance": moment_tol * scale,
        "moments": {b: [[m.real, m.imag] for m in ms] for b, ms in moments.items()},
        "failed_moments": failed,
        "solvable": solvable,
        "trace_ratio_max_error": ratio_err,
        "gamma": canon.provenance,
        "particular": prov,
    }
    if not solvable:
        log.warning("solvability conditions violated: %s", failed)
    return RBVPSolution(problem, canon, particular, polys, moments, solvable, report)


def rbvp_residual(sol, eps: float = 0.05, n_probes: int = 128, seed: int = 0) -> dict:
    """``|Upsilon+ - conj(G0) Upsilon- - data|`` per branch at boundary probes.

    One-sided limits are extrapolated linearly from the normal offsets
    ``eps`` and ``eps/2``; probes whose offsets leave the resolved region or
    land on the wrong side are skipped.
    """
    prob = sol.problem
    bd = prob.boundary
    pts = bd.boundary_samples(max(eps, 1e-3))
    rng = np.random.default_rng(seed)
    pts = pts[np.sort(rng.choice(len(pts), size=min(n_probes, len(pts)), replace=False))]
    nrm = bd.normals(pts)
    ok = np.linalg.norm(nrm, axis=1) > 0

    def limit(sign):
        near, far = pts + 0.5 * sign * eps * nrm, pts + sign * eps * nrm
        a0, a1, oka = sol.upsilon(near)
        b0, b1, okb = sol.upsilon(far)
        good = oka & okb & (bd.inside(near) == (sign < 0)) & (bd.inside(far) == (sign < 0))
        good &= (bd.dist(near) > 0.45 * eps) & (bd.dist(far) > 0.9 * eps)
        return to_complex(2 * a0 - b0), to_complex(2 * a1 - b1), good

    p0, p1, okp = limit(-1.0)
    m0, m1, okm = limit(1.0)
    ok &= okp & okm
    G0c = np.conj(prob.coefficient(pts))
    d0, d1 = (to_complex(b) for b in split_data(prob.g(pts), prob.pivot))
    r0 = np.abs(p0 - G0c * m0 - d0)[ok]
    r1 = np.abs(p1 - G0c * m1 - d1)[ok]
    worst = np.maximum(r0, r1)
    return {
        "eps": eps,
        "max": float(worst.max()) if worst.size else math.nan,
        "median": float(np.median(worst)) if worst.size else math.nan,
        "max_even": float(r0.max()) if r0.size else math.nan,
        "max_odd": float(r1.max()) if r1.size else math.nan,
        "n_used": int(ok.sum()),
        "n_skipped": int((~ok).sum()),
    }
