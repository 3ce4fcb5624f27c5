"""Independent reference solutions by one-variable complex analysis.

For ``n = 2`` the reduced algebra Cl(1) is the complex field (``e1 -> i``) and
the reduced coordinate is ``z = x_i0 + i x_other``.  Both branches of the
jump problem are then Cauchy integrals over the boundary curve, computed
here by the trapezoid rule on a smooth parametrisation (spectrally
accurate away from the curve).
"""

from __future__ import annotations

import numpy as np

from .jump import assemble, split_data

__all__ = ["to_complex", "from_complex", "reduced_coordinate", "cauchy_integral", "circle_jump_oracle", "index_one_coefficient", "circle_index_one_oracle"]


def to_complex(a: np.ndarray) -> np.ndarray:
    """Cl(1) coefficients ``(..., 2)`` to complex numbers."""
    a = np.asarray(a, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def from_complex(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.stack([z.real, z.imag], axis=-1)


def reduced_coordinate(x: np.ndarray, i0: int = 1) -> np.ndarray:
    """``x_i0 + i x_other`` for planar points."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    other = 1 if i0 == 1 else 0
    return x[:, i0 - 1] + 1j * x[:, other]


def cauchy_integral(t: np.ndarray, dt: np.ndarray, f: np.ndarray, z: np.ndarray, chunk: int = 512) -> np.ndarray:
    """``(1/2 pi i) sum f(t_k) dt_k / (t_k - z)`` for a positively oriented closed curve."""
    out = np.empty(len(z), dtype=complex)
    w = f * dt / (2j * np.pi)
    for s in range(0, len(z), chunk):
        out[s : s + chunk] = (w[None, :] / (t[None, :] - z[s : s + chunk, None])).sum(axis=1)
    return out


def _unit_circle(i0: int, n_nodes: int):
    theta = 2 * np.pi * np.arange(n_nodes) / n_nodes
    pts = np.column_stack([np.cos(theta), np.sin(theta)])
    t = reduced_coordinate(pts, i0)
    dt = reduced_coordinate(np.column_stack([-np.sin(theta), np.cos(theta)]) * (2 * np.pi / n_nodes), i0)
    orient = np.sign(np.sum((t.conj() * dt).imag))
    return pts, t, orient * dt


def circle_jump_oracle(g, x, i0: int = 1, radius: float = 1.0, n_nodes: int = 4096) -> np.ndarray:
    """Cl(2) solution of the jump problem on the circle via complex Cauchy integrals."""
    theta = 2 * np.pi * np.arange(n_nodes) / n_nodes
    pts = radius * np.column_stack([np.cos(theta), np.sin(theta)])
    d0, d1 = split_data(g(pts), i0)
    t = reduced_coordinate(pts, i0)
    dpts = radius * np.column_stack([-np.sin(theta), np.cos(theta)]) * (2 * np.pi / n_nodes)
    dt = reduced_coordinate(dpts, i0)
    # orientation in the z-plane: the planar CCW traversal may be CW there
    orient = np.sign(np.sum((t.conj() * dt).imag))
    z = reduced_coordinate(x, i0)
    u0 = cauchy_integral(t, orient * dt, to_complex(d0), z)
    u1 = cauchy_integral(t, orient * dt, to_complex(d1), z)
    return assemble(from_complex(u0), from_complex(u1), i0)


ROOT_IN = -2.0 + np.sqrt(3.0)
ROOT_OUT = -2.0 - np.sqrt(3.0)


def index_one_coefficient(z) -> np.ndarray:
    """``z (2 + Re z)``: index one on the unit circle, where its conjugate is
    ``(z - ROOT_IN)(z - ROOT_OUT) / (2 z^2)``."""
    z = np.asarray(z, dtype=complex)
    return z * (2.0 + z.real)


def circle_index_one_oracle(g, x, i0: int = 1, n_nodes: int = 4096):
    """Reference solution of ``Phi+ = G Phi- + g`` on the unit circle for
    ``G = index_one_coefficient`` (complex image of the even coefficient).

    The canonical pair factorises in closed form,
    ``X+ = (z - ROOT_OUT) / 2`` inside and ``X- = z^2 / (z - ROOT_IN)`` outside,
    and each branch is ``X C[f / X+]`` with ``C`` the Cauchy integral.

    Returns
    -------
    (Phi, X) : Cl(2) coefficients (N, 4) and complex canonical values (N,)
    """
    pts, t, dt = _unit_circle(i0, n_nodes)
    d0, d1 = split_data(g(pts), i0)
    xp_t = (t - ROOT_OUT) / 2.0
    z = reduced_coordinate(x, i0)
    X = np.where(np.abs(z) < 1.0, (z - ROOT_OUT) / 2.0, z**2 / (z - ROOT_IN))
    u = [X * cauchy_integral(t, dt, to_complex(d) / xp_t, z) for d in (d0, d1)]
    return assemble(from_complex(u[0]), from_complex(u[1]), i0), X
