"""Real Clifford algebra Cl(n) with the negative-definite signature.

Multivectors are stored densely: ``2**n`` real coefficients indexed by the
bitmask of the blade (bit ``i-1`` set means generator ``e_i`` is a factor).
Generators obey ``e_i e_j + e_j e_i = -2 delta_ij``.

Besides the algebra itself the module provides the even/odd splitting
``a = a0 + e_i0 a1`` and the two isomorphisms used to trade a vectorial
problem in Cl(n) for a pair of paravectorial problems in Cl(n-1):

* ``beta_iso``: algebra isomorphism Cl(n)^+ -> Cl(n-1), ``e_i0 e_i -> e_i'``;
* ``alpha_iso``: vector-space isomorphism Cl(n)^(1) -> paravectors of Cl(n-1).

Array-level helpers (suffix ``_arr``) act on the trailing axis of an ndarray
so that whole grids of multivectors can be processed at once.
"""

from __future__ import annotations

import functools
import json
from typing import Iterable, Sequence

import numpy as np

MAX_DIM = 12

__all__ = [
    "Multivector",
    "GradedParts",
    "blade_mask",
    "mask_indices",
    "blade_label",
    "parse_blade_label",
    "canonical_order",
    "geometric_product",
    "conjugate",
    "split_even_odd",
    "recompose",
    "beta_iso",
    "beta_iso_inv",
    "alpha_iso",
    "alpha_iso_inv",
    "gp_arr",
    "conj_arr",
    "split_arr",
    "recompose_arr",
    "beta_arr",
    "beta_inv_arr",
    "generator_arr",
]


# ---------------------------------------------------------------------------
# blade bookkeeping


def blade_mask(indices: Iterable[int]) -> int:
    """Bitmask of the blade ``e_{i1} ... e_{ik}`` (indices are 1-based)."""
    mask = 0
    for i in indices:
        if i < 1:
            raise ValueError(f"generator index must be >= 1, got {i}")
        bit = 1 << (i - 1)
        if mask & bit:
            raise ValueError(f"repeated generator {i} in blade")
        mask |= bit
    return mask


def mask_indices(mask: int) -> tuple[int, ...]:
    """Ascending generator indices of a blade bitmask."""
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def blade_label(mask: int) -> str:
    """Serialization label: ``""`` for the scalar, ``"1,2"`` for e1e2."""
    return ",".join(str(i) for i in mask_indices(mask))


def parse_blade_label(label: str) -> int:
    label = label.strip()
    if not label:
        return 0
    return blade_mask(int(tok) for tok in label.split(","))


@functools.lru_cache(maxsize=None)
def canonical_order(n: int) -> tuple[int, ...]:
    """Blade masks sorted by grade, then lexicographically by indices."""
    return tuple(sorted(range(1 << n), key=lambda m: (bin(m).count("1"), mask_indices(m))))


@functools.lru_cache(maxsize=None)
def _grades(n: int) -> np.ndarray:
    return np.bitwise_count(np.arange(1 << n, dtype=np.uint32)).astype(np.int64)


@functools.lru_cache(maxsize=None)
def _sign_table(n: int) -> np.ndarray:
    """sign[a, b] such that e_a e_b = sign[a, b] e_{a ^ b}."""
    size = 1 << n
    a = np.arange(size, dtype=np.uint32)[:, None]
    b = np.arange(size, dtype=np.uint32)[None, :]
    swaps = np.zeros((size, size), dtype=np.int64)
    shifted = a >> 1
    for _ in range(n):
        swaps += np.bitwise_count(shifted & b)
        shifted = shifted >> 1
    swaps += np.bitwise_count(a & b)  # e_i^2 = -1
    table = np.where(swaps % 2 == 0, 1.0, -1.0)
    table.flags.writeable = False
    return table


@functools.lru_cache(maxsize=None)
def _conj_signs(n: int) -> np.ndarray:
    k = _grades(n)
    s = np.where((k * (k + 1) // 2) % 2 == 0, 1.0, -1.0)
    s.flags.writeable = False
    return s


def _check_dim(n: int) -> None:
    if not 0 <= n <= MAX_DIM:
        raise ValueError(f"Clifford dimension must be in [0, {MAX_DIM}], got {n}")


def _dim_of(arr: np.ndarray) -> int:
    size = arr.shape[-1]
    n = size.bit_length() - 1
    if 1 << n != size:
        raise ValueError(f"trailing axis {size} is not a power of two")
    return n


# ---------------------------------------------------------------------------
# array-level kernels


def gp_arr(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Geometric product along the trailing axis (broadcasting leading axes)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape[-1] != b.shape[-1]:
        raise ValueError("dimension mismatch in geometric product")
    n = _dim_of(a)
    size = 1 << n
    sign = _sign_table(n)
    shape = np.broadcast_shapes(a.shape[:-1], b.shape[:-1]) + (size,)
    out = np.zeros(shape)
    idx = np.arange(size)
    for i in range(size):
        ai = a[..., i : i + 1]
        if not np.any(ai):
            continue
        out[..., idx ^ i] += ai * b * sign[i]
    return out


def conj_arr(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    return a * _conj_signs(_dim_of(a))


def split_arr(a: np.ndarray, i0: int) -> tuple[np.ndarray, np.ndarray]:
    """Even part and odd cofactor of ``a = a0 + e_i0 a1`` along the trailing axis."""
    a = np.asarray(a, dtype=float)
    n = _dim_of(a)
    if not 1 <= i0 <= n:
        raise ValueError(f"pivot i0={i0} outside 1..{n}")
    even = _grades(n) % 2 == 0
    a0 = np.where(even, a, 0.0)
    odd = np.where(even, 0.0, a)
    a1 = -gp_arr(generator_arr(n, i0), odd)
    return a0, a1


def recompose_arr(a0: np.ndarray, a1: np.ndarray, i0: int) -> np.ndarray:
    n = _dim_of(np.asarray(a0))
    return np.asarray(a0, dtype=float) + gp_arr(generator_arr(n, i0), a1)


def generator_arr(n: int, i: int) -> np.ndarray:
    v = np.zeros(1 << n)
    v[1 << (i - 1)] = 1.0
    return v


def _reindex(i: int, i0: int) -> int:
    return i if i < i0 else i - 1


@functools.lru_cache(maxsize=None)
def _beta_matrix(n: int, i0: int) -> np.ndarray:
    """Signed permutation matrix of beta_{i0}: Cl(n)^+ -> Cl(n-1), shape (2^(n-1), 2^n)."""
    if n < 1:
        raise ValueError("beta isomorphism needs n >= 1")
    if not 1 <= i0 <= n:
        raise ValueError(f"pivot i0={i0} outside 1..{n}")
    m = n - 1
    sign_m = _sign_table(m)
    mat = np.zeros((1 << m, 1 << n))
    for mask in range(1 << n):
        idx = mask_indices(mask)
        if len(idx) % 2:
            continue
        sgn, img = 1.0, 0
        for a, b in zip(idx[::2], idx[1::2]):
            if a == i0:
                ps, pm = 1.0, 1 << (_reindex(b, i0) - 1)
            elif b == i0:
                ps, pm = -1.0, 1 << (_reindex(a, i0) - 1)
            else:
                ma, mb = 1 << (_reindex(a, i0) - 1), 1 << (_reindex(b, i0) - 1)
                ps, pm = sign_m[ma, mb], ma ^ mb
            sgn *= sign_m[img, pm] * ps
            img ^= pm
        mat[img, mask] = sgn
    mat.flags.writeable = False
    return mat


def _odd_content(a: np.ndarray) -> float:
    n = _dim_of(a)
    odd = _grades(n) % 2 == 1
    return float(np.max(np.abs(a[..., odd]), initial=0.0))


def beta_arr(a: np.ndarray, i0: int, atol: float = 1e-12) -> np.ndarray:
    """beta_{i0} on the trailing axis; rejects input with odd-grade content."""
    a = np.asarray(a, dtype=float)
    n = _dim_of(a)
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    if _odd_content(a) > atol * scale:
        raise ValueError("beta isomorphism is defined on the even subalgebra only")
    return a @ _beta_matrix(n, i0).T


def beta_inv_arr(b: np.ndarray, i0: int) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    m = _dim_of(b)
    return b @ _beta_matrix(m + 1, i0)


# ---------------------------------------------------------------------------
# value type


class Multivector:
    """Immutable element of Cl(n) with dense coefficients.

    Parameters
    ----------
    n : int
        Number of generators, ``0 <= n <= 12``.
    coeffs : array_like or mapping, optional
        Either a length ``2**n`` array indexed by blade bitmask, or a mapping
        from blade (tuple of indices, bitmask or label string) to coefficient.
    """

    __slots__ = ("n", "_c")

    def __init__(self, n: int, coeffs=None):
        _check_dim(n)
        c = np.zeros(1 << n)
        if coeffs is None:
            pass
        elif isinstance(coeffs, dict):
            for key, val in coeffs.items():
                c[_as_mask(key)] += float(val)
        else:
            arr = np.asarray(coeffs, dtype=float)
            if arr.shape != (1 << n,):
                raise ValueError(f"expected {1 << n} coefficients, got shape {arr.shape}")
            c[:] = arr
        c.flags.writeable = False
        self.n = n
        self._c = c

    # construction helpers
    @classmethod
    def scalar(cls, n: int, value: float = 1.0) -> "Multivector":
        return cls(n, {0: value})

    @classmethod
    def blade(cls, n: int, indices: Sequence[int], value: float = 1.0) -> "Multivector":
        mask = blade_mask(indices)
        if mask >> n:
            raise ValueError(f"blade {tuple(indices)} not in Cl({n})")
        return cls(n, {mask: value})

    @classmethod
    def vector(cls, coords: Sequence[float]) -> "Multivector":
        n = len(coords)
        return cls(n, {1 << i: x for i, x in enumerate(coords)})

    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    def __getitem__(self, key) -> float:
        return float(self._c[_as_mask(key)])

    def grade(self, k: int) -> "Multivector":
        return Multivector(self.n, np.where(_grades(self.n) == k, self._c, 0.0))

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self._c**2)))

    def conjugate(self) -> "Multivector":
        return conjugate(self)

    def allclose(self, other, rtol: float = 1e-12, atol: float = 1e-14) -> bool:
        other = _coerce(other, self.n)
        return bool(np.allclose(self._c, other._c, rtol=rtol, atol=atol))

    # arithmetic
    def __add__(self, other):
        other = _coerce(other, self.n)
        return Multivector(self.n, self._c + other._c)

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other, self.n)
        return Multivector(self.n, self._c - other._c)

    def __rsub__(self, other):
        return _coerce(other, self.n) - self

    def __neg__(self):
        return Multivector(self.n, -self._c)

    def __mul__(self, other):
        if isinstance(other, Multivector):
            return geometric_product(self, other)
        return Multivector(self.n, self._c * float(other))

    def __rmul__(self, other):
        if isinstance(other, Multivector):
            return geometric_product(other, self)
        return Multivector(self.n, self._c * float(other))

    def __truediv__(self, scalar):
        return Multivector(self.n, self._c / float(scalar))

    def __eq__(self, other):
        if not isinstance(other, Multivector):
            return NotImplemented
        return self.n == other.n and bool(np.array_equal(self._c, other._c))

    def __hash__(self):
        return hash((self.n, self._c.tobytes()))

    def __repr__(self):
        terms = []
        for m in canonical_order(self.n):
            v = self._c[m]
            if v != 0.0:
                terms.append(f"{v:g}" if m == 0 else f"{v:g}*e{''.join(map(str, mask_indices(m)))}")
        return f"Multivector(n={self.n}, {' + '.join(terms) or '0'})"

    # serialization
    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "coeffs": {blade_label(m): float(self._c[m]) for m in canonical_order(self.n) if self._c[m] != 0.0},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "Multivector":
        n = int(doc["n"])
        return cls(n, {parse_blade_label(k): v for k, v in doc.get("coeffs", {}).items()})

    @classmethod
    def from_json(cls, text: str) -> "Multivector":
        return cls.from_dict(json.loads(text))


def _as_mask(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key)
    if isinstance(key, str):
        return parse_blade_label(key)
    return blade_mask(key)


def _coerce(x, n: int) -> Multivector:
    if isinstance(x, Multivector):
        if x.n != n:
            raise ValueError(f"dimension mismatch: Cl({x.n}) vs Cl({n})")
        return x
    return Multivector.scalar(n, float(x))


# ---------------------------------------------------------------------------
# operations on Multivector values


def geometric_product(a: Multivector, b: Multivector) -> Multivector:
    if a.n != b.n:
        raise ValueError(f"dimension mismatch: Cl({a.n}) vs Cl({b.n})")
    return Multivector(a.n, gp_arr(a.coeffs, b.coeffs))


def conjugate(a: Multivector) -> Multivector:
    return Multivector(a.n, conj_arr(a.coeffs))


class GradedParts:
    """Pair ``(even, odd_cofactor)`` with ``a = even + e_pivot * odd_cofactor``."""

    __slots__ = ("even", "odd_cofactor", "pivot")

    def __init__(self, even: Multivector, odd_cofactor: Multivector, pivot: int):
        self.even = even
        self.odd_cofactor = odd_cofactor
        self.pivot = pivot

    def __iter__(self):
        yield self.even
        yield self.odd_cofactor

    def recompose(self) -> Multivector:
        return recompose(self)

    def __repr__(self):
        return f"GradedParts(even={self.even!r}, odd_cofactor={self.odd_cofactor!r}, pivot={self.pivot})"


def split_even_odd(a: Multivector, i0: int) -> GradedParts:
    a0, a1 = split_arr(a.coeffs, i0)
    return GradedParts(Multivector(a.n, a0), Multivector(a.n, a1), i0)


def recompose(parts: GradedParts) -> Multivector:
    n = parts.even.n
    return Multivector(n, recompose_arr(parts.even.coeffs, parts.odd_cofactor.coeffs, parts.pivot))


def beta_iso(a: Multivector, i0: int) -> Multivector:
    if a.n < 2:
        raise ValueError("beta isomorphism needs n >= 2")
    return Multivector(a.n - 1, beta_arr(a.coeffs, i0))


def beta_iso_inv(b: Multivector, i0: int) -> Multivector:
    return Multivector(b.n + 1, beta_inv_arr(b.coeffs, i0))


def alpha_iso(x: Multivector, i0: int, atol: float = 1e-12) -> Multivector:
    """Send ``sum x^i e_i`` to ``x^i0 + sum_{i != i0} x^i e_i'`` in Cl(n-1)."""
    n = x.n
    if not 1 <= i0 <= n:
        raise ValueError(f"pivot i0={i0} outside 1..{n}")
    g = _grades(n)
    scale = max(1.0, x.norm())
    if np.max(np.abs(x.coeffs[g != 1]), initial=0.0) > atol * scale:
        raise ValueError("alpha isomorphism is defined on vectors (grade 1) only")
    out = np.zeros(1 << (n - 1))
    for i in range(1, n + 1):
        xi = x.coeffs[1 << (i - 1)]
        if i == i0:
            out[0] = xi
        else:
            out[1 << (_reindex(i, i0) - 1)] = xi
    return Multivector(n - 1, out)


def alpha_iso_inv(y: Multivector, i0: int, atol: float = 1e-12) -> Multivector:
    m = y.n
    n = m + 1
    g = _grades(m)
    scale = max(1.0, y.norm())
    if np.max(np.abs(y.coeffs[g > 1]), initial=0.0) > atol * scale:
        raise ValueError("alpha inverse expects a paravector")
    out = np.zeros(1 << n)
    for i in range(1, n + 1):
        if i == i0:
            out[1 << (i - 1)] = y.coeffs[0]
        else:
            out[1 << (i - 1)] = y.coeffs[1 << (_reindex(i, i0) - 1)]
    return Multivector(n, out)
