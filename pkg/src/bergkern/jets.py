"""Truncated Taylor jets in the Wirtinger variables (z, zbar).

A jet of order ``p`` at a base point z0 stores the coefficients

    c[alpha, beta] = d^alpha_z d^beta_zbar f(z0) / (alpha! beta!)

for all multi-indices with |alpha| + |beta| <= p, as a dense array with one
axis per holomorphic variable followed by one axis per antiholomorphic
variable.  Leading axes are batch axes, so a single jet object can carry the
Taylor data of many base points at once and every operation broadcasts.

The module-level functions ``exp``, ``log``, ``conj``, ``abs2``, ``cos`` and
``sqrt`` dispatch on their argument, so chart functions written against them
evaluate on plain complex arrays as well as on jets.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def _degree_grid(nvars: int, order: int) -> np.ndarray:
    grids = np.indices((order + 1,) * nvars)
    return grids.sum(axis=0)


@lru_cache(maxsize=None)
def _mask(nvars: int, order: int) -> np.ndarray:
    return _degree_grid(nvars, order) <= order


@lru_cache(maxsize=None)
def _multi_indices(nvars: int, order: int) -> tuple:
    """All index tuples with total degree <= order, sorted by degree."""
    out = [idx for idx in itertools.product(range(order + 1), repeat=nvars)
           if sum(idx) <= order]
    out.sort(key=lambda t: (sum(t), t))
    return tuple(out)


class WirtingerJet:
    """Truncated Taylor polynomial in (z - z0, zbar - conj(z0))."""

    __slots__ = ("coeffs", "n", "order", "base_point")
    __array_priority__ = 1000

    def __init__(self, coeffs, n: int, order: int, base_point=None):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.ndim < 2 * n or coeffs.shape[coeffs.ndim - 2 * n:] != (order + 1,) * (2 * n):
            raise ValueError(f"coefficient array shape {coeffs.shape} does not match n={n}, order={order}")
        self.coeffs = np.where(_mask(2 * n, order), coeffs, 0.0)
        self.n = n
        self.order = order
        self.base_point = base_point

    @classmethod
    def _trusted(cls, coeffs, n: int, order: int, base_point=None) -> "WirtingerJet":
        # internal constructor for arrays already zero above the order
        obj = object.__new__(cls)
        obj.coeffs, obj.n, obj.order, obj.base_point = coeffs, n, order, base_point
        return obj

    # -- construction ----------------------------------------------------
    @classmethod
    def constant(cls, value, n: int, order: int, base_point=None) -> "WirtingerJet":
        value = np.asarray(value, dtype=complex)
        c = np.zeros(value.shape + (order + 1,) * (2 * n), dtype=complex)
        c[(...,) + (0,) * (2 * n)] = value
        return cls._trusted(c, n, order, base_point)

    @classmethod
    def variable(cls, j: int, z0, order: int, conjugate: bool = False) -> "WirtingerJet":
        """Jet of z_j (or conj(z_j)) at the base point(s) z0 of shape (..., n)."""
        z0 = np.asarray(z0, dtype=complex)
        n = z0.shape[-1]
        c = np.zeros(z0.shape[:-1] + (order + 1,) * (2 * n), dtype=complex)
        zero = (0,) * (2 * n)
        c[(...,) + zero] = np.conj(z0[..., j]) if conjugate else z0[..., j]
        if order >= 1:
            idx = [0] * (2 * n)
            idx[j + n if conjugate else j] = 1
            c[(...,) + tuple(idx)] = 1.0
        return cls(c, n, order, z0)

    @classmethod
    def from_coefficients(cls, entries: dict, n: int, order: int, base_point=None) -> "WirtingerJet":
        """Build an unbatched jet from ``{(alpha, beta): c}``."""
        c = np.zeros((order + 1,) * (2 * n), dtype=complex)
        for (alpha, beta), val in entries.items():
            if sum(alpha) + sum(beta) <= order:
                c[tuple(alpha) + tuple(beta)] = val
        return cls(c, n, order, base_point)

    # -- access ----------------------------------------------------------
    @property
    def nvars(self) -> int:
        return 2 * self.n

    @property
    def batch_shape(self) -> tuple:
        return self.coeffs.shape[: self.coeffs.ndim - self.nvars]

    @property
    def value(self):
        return self.coeffs[(...,) + (0,) * self.nvars]

    def coeff(self, alpha, beta):
        alpha, beta = tuple(alpha), tuple(beta)
        if sum(alpha) + sum(beta) > self.order:
            raise IndexError("bidegree exceeds jet order")
        return self.coeffs[(...,) + alpha + beta]

    def derivative(self, alpha, beta):
        """d^alpha_z d^beta_zbar f at the base point."""
        fact = math.prod(math.factorial(a) for a in tuple(alpha) + tuple(beta))
        return self.coeff(alpha, beta) * fact

    def items(self):
        """Iterate ``((alpha, beta), c)`` over the stored bidegrees."""
        n = self.n
        for idx in _multi_indices(self.nvars, self.order):
            yield (idx[:n], idx[n:]), self.coeffs[(...,) + idx]

    def __repr__(self) -> str:
        return f"WirtingerJet(n={self.n}, order={self.order}, batch={self.batch_shape})"

    # -- structural ops --------------------------------------------------
    def truncate(self, order: int) -> "WirtingerJet":
        if order > self.order:
            raise ValueError("cannot raise jet order by truncation")
        if order == self.order:
            return self
        sl = (...,) + (slice(0, order + 1),) * self.nvars
        return WirtingerJet._trusted(self.coeffs[sl], self.n, order, self.base_point)

    def conj(self) -> "WirtingerJet":
        n = self.n
        nb = len(self.batch_shape)
        perm = list(range(nb)) + [nb + n + i for i in range(n)] + [nb + i for i in range(n)]
        return WirtingerJet._trusted(np.conj(self.coeffs).transpose(perm), n, self.order, self.base_point)

    def dz(self, j: int) -> "WirtingerJet":
        return self._diff(j)

    def dzbar(self, j: int) -> "WirtingerJet":
        return self._diff(self.n + j)

    def _diff(self, axis: int) -> "WirtingerJet":
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        nb = len(self.batch_shape)
        p = self.order
        sl = [slice(0, p)] * self.nvars
        sl[axis] = slice(1, p + 1)
        c = self.coeffs[(...,) + tuple(sl)]
        shape = [1] * (nb + self.nvars)
        shape[nb + axis] = p
        c = c * np.arange(1, p + 1).reshape(shape)
        return WirtingerJet._trusted(c, self.n, p - 1, self.base_point)

    def holomorphic_part(self) -> "WirtingerJet":
        """Keep only the pure-z coefficients c[alpha, 0]."""
        anti = _degree_grid(self.n, self.order)
        keep = anti[(None,) * self.n + (...,)] == 0
        return WirtingerJet(np.where(keep, self.coeffs, 0.0), self.n, self.order, self.base_point)

    def antiholomorphic_part(self) -> "WirtingerJet":
        """Keep only the pure-zbar coefficients c[0, beta]."""
        hol = _degree_grid(self.n, self.order)
        keep = hol[(...,) + (None,) * self.n] == 0
        return WirtingerJet(np.where(keep, self.coeffs, 0.0), self.n, self.order, self.base_point)

    def __call__(self, dz, dzbar=None):
        """Evaluate the polynomial at a displacement (dz, dzbar); unbatched only."""
        dz = np.asarray(dz, dtype=complex)
        dzbar = np.conj(dz) if dzbar is None else np.asarray(dzbar, dtype=complex)
        total = 0.0 + 0.0j
        for (alpha, beta), c in self.items():
            if c != 0:
                total += c * np.prod(dz ** np.array(alpha)) * np.prod(dzbar ** np.array(beta))
        return total

    # -- arithmetic ------------------------------------------------------
    def _coerce(self, other) -> "WirtingerJet":
        if isinstance(other, WirtingerJet):
            if other.n != self.n:
                raise ValueError("jets over different numbers of variables")
            return other
        return WirtingerJet.constant(other, self.n, self.order, self.base_point)

    def _aligned(self, other):
        other = self._coerce(other)
        p = min(self.order, other.order)
        return self.truncate(p), other.truncate(p), p

    def __add__(self, other):
        a, b, p = self._aligned(other)
        return WirtingerJet._trusted(a.coeffs + b.coeffs, self.n, p, self.base_point)

    __radd__ = __add__

    def __neg__(self):
        return WirtingerJet._trusted(-self.coeffs, self.n, self.order, self.base_point)

    def __sub__(self, other):
        a, b, p = self._aligned(other)
        return WirtingerJet._trusted(a.coeffs - b.coeffs, self.n, p, self.base_point)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, WirtingerJet):
            val = np.asarray(other, dtype=complex)
            return WirtingerJet._trusted(self.coeffs * val[(...,) + (None,) * self.nvars],
                                         self.n, self.order, self.base_point)
        a, b, p = self._aligned(other)
        return WirtingerJet._trusted(_truncated_product(a.coeffs, b.coeffs, a.nvars, p), self.n, p,
                                     self.base_point)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, WirtingerJet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=complex))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, exponent):
        if isinstance(exponent, WirtingerJet):
            return exp(log(self) * exponent)
        if float(exponent).is_integer() and exponent >= 0:
            return self._int_power(int(exponent))
        if float(exponent).is_integer():
            return self._int_power(-int(exponent)).reciprocal()
        return self._compose(_pow_series(exponent))

    def _int_power(self, m: int) -> "WirtingerJet":
        result = WirtingerJet.constant(np.ones(self.batch_shape), self.n, self.order, self.base_point)
        base = self
        while m:
            if m & 1:
                result = result * base
            m >>= 1
            if m:
                base = base * base
        return result

    def reciprocal(self) -> "WirtingerJet":
        return self._compose(lambda c, p: [(-1.0) ** m / c ** (m + 1) for m in range(p + 1)])

    # -- univariate composition -------------------------------------------
    def _compose(self, series) -> "WirtingerJet":
        """f(self) from the Taylor coefficients d_m = f^(m)(c)/m! at c = value."""
        c0 = self.value
        d = series(c0, self.order)
        h = self - WirtingerJet.constant(c0, self.n, self.order, self.base_point)
        res = WirtingerJet.constant(d[self.order], self.n, self.order, self.base_point)
        for m in range(self.order - 1, -1, -1):
            res = res * h + WirtingerJet.constant(d[m], self.n, self.order, self.base_point)
        return res


def _truncated_product(a: np.ndarray, b: np.ndarray, nvars: int, order: int) -> np.ndarray:
    batch = np.broadcast_shapes(a.shape[: a.ndim - nvars], b.shape[: b.ndim - nvars])
    out = np.zeros(batch + (order + 1,) * nvars, dtype=complex)
    # iterate over the sparser operand
    if np.count_nonzero(a) > np.count_nonzero(b):
        a, b = b, a
    nb_a = a.ndim - nvars
    support = np.any(a != 0, axis=tuple(range(nb_a))) if nb_a else (a != 0)
    for idx in zip(*np.nonzero(support)):
        s = sum(idx)
        if s > order:
            continue
        tgt = tuple(slice(i, order + 1) for i in idx)
        src = tuple(slice(0, order + 1 - i) for i in idx)
        coef = a[(...,) + tuple(idx)]
        out[(...,) + tgt] += coef[(...,) + (None,) * nvars] * b[(...,) + src]
    out *= _mask(nvars, order)
    return out


def _exp_series(c, p):
    e = np.exp(c)
    return [e / math.factorial(m) for m in range(p + 1)]


def _log_series(c, p):
    out = [np.log(c)]
    for m in range(1, p + 1):
        out.append((-1.0) ** (m + 1) / (m * c ** m))
    return out


def _pow_series(s: float):
    def series(c, p):
        out = [c ** s]
        coef = 1.0
        for m in range(1, p + 1):
            coef *= (s - m + 1) / m
            out.append(coef * c ** (s - m))
        return out
    return series


# -- dispatching elementary functions ---------------------------------------

def exp(x):
    if isinstance(x, WirtingerJet):
        return x._compose(_exp_series)
    return np.exp(x)


def log(x):
    if isinstance(x, WirtingerJet):
        return x._compose(_log_series)
    return np.log(x)


def sqrt(x):
    if isinstance(x, WirtingerJet):
        return x ** 0.5
    return np.sqrt(x)


def conj(x):
    if isinstance(x, WirtingerJet):
        return x.conj()
    return np.conj(x)


def abs2(x):
    if isinstance(x, WirtingerJet):
        return x * x.conj()
    return (np.conj(x) * x).real if np.iscomplexobj(x) else np.asarray(x) ** 2


def cos(x):
    if isinstance(x, WirtingerJet):
        return 0.5 * (exp(1j * x) + exp(-1j * x))
    return np.cos(x)


def real_part(x):
    if isinstance(x, WirtingerJet):
        return 0.5 * (x + x.conj())
    return np.real(x)


# -- jet matrices -----------------------------------------------------------

def det(matrix):
    """Determinant of a square nested list of jets/scalars (Leibniz expansion)."""
    n = len(matrix)
    total = 0
    for perm in itertools.permutations(range(n)):
        sign = _perm_sign(perm)
        term = sign
        for i, j in enumerate(perm):
            term = term * matrix[i][j]
        total = total + term
    return total


def inverse(matrix):
    """Inverse via adjugate; entries may be jets."""
    n = len(matrix)
    d = det(matrix)
    dinv = 1.0 / d
    out = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [[matrix[r][c] for c in range(n) if c != i] for r in range(n) if r != j]
            cof = det(minor) if n > 1 else 1.0
            out[i][j] = ((-1) ** (i + j)) * cof * dinv
    return out


def _perm_sign(perm) -> int:
    sign = 1
    perm = list(perm)
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def laplacian_power_at_origin(jet: WirtingerJet, lam, power: int):
    """(sum_j lam_j^{-1} d_j dbar_j)^power applied to the jet, evaluated at the base point."""
    lam = np.asarray(lam, dtype=float)
    n = jet.n
    if 2 * power > jet.order:
        raise ValueError(f"jet of order {jet.order} cannot carry {power} Laplacian powers")
    total = 0.0
    for gamma in itertools.product(range(power + 1), repeat=n):
        if sum(gamma) != power:
            continue
        weight = math.factorial(power) * math.prod(math.factorial(g) for g in gamma)
        weight *= math.prod(float(l) ** (-g) for l, g in zip(lam, gamma))
        total = total + weight * jet.coeff(gamma, gamma)
    return total
