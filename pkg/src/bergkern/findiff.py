"""Finite-difference Wirtinger derivatives.

Mixed derivatives d^alpha_z d^beta_zbar are expanded into real partials via
d_z = (d_x - i d_y)/2, d_zbar = (d_x + i d_y)/2; each real partial is a
tensor product of fourth-order central stencils, followed by one Richardson
step (h, h/2).
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

from .errors import OutOfChart, StepUnderflow

EPS = np.finfo(float).eps


@lru_cache(maxsize=None)
def central_stencil(m: int):
    """Offsets and weights of the 4th-order central stencil for d^m/dx^m."""
    if m == 0:
        return np.array([0.0]), np.array([1.0])
    half = (m + 1) // 2 + 1
    offsets = np.arange(-half, half + 1, dtype=float)
    vander = np.vander(offsets, increasing=True).T
    rhs = np.zeros(len(offsets))
    rhs[m] = math.factorial(m)
    weights = np.linalg.solve(vander, rhs)
    return offsets, weights


def _wirtinger_to_real(alpha, beta):
    """Coefficients of d^alpha d^beta_bar as a map {real multi-index: complex}."""
    terms = {(): 1.0 + 0j}
    for a, b in zip(alpha, beta):
        # (dx - i dy)^a (dx + i dy)^b / 2^(a+b) as a polynomial in (dx, dy)
        poly = np.zeros((a + b + 1, a + b + 1), dtype=complex)
        poly[0, 0] = 1.0
        for factor in [(1.0, -1j)] * a + [(1.0, 1j)] * b:
            new = np.zeros_like(poly)
            new[1:, :] += factor[0] * poly[:-1, :]
            new[:, 1:] += factor[1] * poly[:, :-1]
            poly = new
        poly /= 2.0 ** (a + b)
        nxt = {}
        for key, c in terms.items():
            for px, py in zip(*np.nonzero(poly)):
                nxt[key + (int(px), int(py))] = nxt.get(key + (int(px), int(py)), 0) + c * poly[px, py]
        terms = nxt
    return terms


def default_step(z0, order: int) -> float:
    # balances eps/h^m roundoff against the h^6 error left after Richardson
    scale = max(1.0, float(np.max(np.abs(z0))) if np.size(z0) else 1.0)
    return EPS ** (1.0 / (order + 6)) * scale


def wirtinger_fd(f, z0, alpha, beta, h=None, chart=None):
    """d^alpha_z d^beta_zbar f(z0) by central differences with Richardson extrapolation.

    ``f`` takes a list of n complex arrays and returns an array of values.
    """
    z0 = np.asarray(z0, dtype=complex)
    n = z0.shape[-1]
    order = sum(alpha) + sum(beta)
    if order == 0:
        return complex(np.asarray(f([z0[j] for j in range(n)])))
    scale = max(1.0, float(np.max(np.abs(z0))))
    if h is None:
        h = default_step(z0, order)
    if h < 64 * EPS * scale:
        raise StepUnderflow(f"finite-difference step {h:g} below 64*eps*scale")
    terms = _wirtinger_to_real(alpha, beta)
    coarse = _real_combination(f, z0, terms, h, chart)
    fine = _real_combination(f, z0, terms, h / 2, chart)
    return (16.0 * fine - coarse) / 15.0


def _real_combination(f, z0, terms, h, chart):
    n = len(z0)
    x0 = np.empty(2 * n)
    x0[0::2] = z0.real
    x0[1::2] = z0.imag
    nodes = []
    weights = []
    for midx, c in terms.items():
        stencils = [central_stencil(m) for m in midx]
        hpow = h ** sum(midx)
        for combo in itertools.product(*[range(len(s[0])) for s in stencils]):
            w = c / hpow
            x = x0.copy()
            for axis, (s, i) in enumerate(zip(stencils, combo)):
                w *= s[1][i]
                x[axis] += s[0][i] * h
            if w != 0:
                nodes.append(x)
                weights.append(w)
    nodes = np.array(nodes)
    zs = nodes[:, 0::2] + 1j * nodes[:, 1::2]
    if chart is not None and not np.all(chart.contains(zs)):
        raise OutOfChart("finite-difference stencil leaves the chart")
    vals = np.asarray(f([zs[:, j] for j in range(n)]), dtype=complex)
    vals = np.broadcast_to(vals, (len(weights),))
    # fixed summation order keeps results reproducible
    return complex(np.sum(np.array(weights) * vals))
