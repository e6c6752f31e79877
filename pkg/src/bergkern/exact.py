"""Exact Bergman kernel functions from orthonormalized section bases.

Supported section spaces:

* rotation-invariant weights on C (cp1_fs and radial chart expressions):
  monomials are orthogonal, so the Gram matrix is diagonal and each entry
  is a one-dimensional radial integral;
* fock in any dimension: a product of one-dimensional radial factors;
* torus: theta functions of level k*d, Gram by the periodic trapezoid rule;
* other weights on C: monomials with a polar (or box) tensor rule and a
  full Gram matrix factorized by pivoted Cholesky after equilibration.

All section values are handled in log space so that large k does not
overflow: a basis reports log(s_i(z) e^{-k phi(z)}), and Gram matrices are
stored as a unit-diagonal equilibrated matrix plus log scale factors.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.special
import scipy.stats
from scipy.linalg import lapack

from . import geometry as geo
from .errors import FitDegenerate, IllConditioned, QuadratureNotConverged, UnsupportedFamily

EPS = np.finfo(float).eps
MAX_BASIS = 4000
CHUNK = 4096


@dataclass(frozen=True)
class QuadratureSpec:
    """Quadrature settings.

    ``order`` is the node count per direction for tensor rules (None picks
    it from the basis size); ``epsrel`` drives the adaptive radial rule.
    """

    order: Optional[int] = None
    epsrel: float = 1e-13
    radius: Optional[float] = None
    threads: int = 1


DEFAULT_QUAD = QuadratureSpec()


# -- radial profiles --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RadialProfile:
    """phi and V_Theta as functions of t = |z|^2 on [0, t_max)."""

    weight: Callable
    density: Callable
    t_max: float = math.inf


def radial_profile(geom: geo.ModelGeometry) -> RadialProfile:
    def weight(t):
        return geom.phi_values(np.sqrt(t)[..., None].astype(complex))

    def density(t):
        return geom.theta_values(np.sqrt(t)[..., None].astype(complex))[..., 0, 0].real

    return RadialProfile(weight, density, geom.chart.radius ** 2)


def _linear_profile(lam: float) -> RadialProfile:
    return RadialProfile(lambda t: lam * t, lambda t: np.ones_like(t))


def _angular_proxy(geom: geo.ModelGeometry, nangle: int = 64) -> RadialProfile:
    """Angle-averaged profile, used only to size non-radial bases."""
    ang = np.exp(2j * np.pi * np.arange(nangle) / nangle)

    def weight(t):
        z = np.sqrt(t)[..., None] * ang
        return geom.phi_values(z[..., None]).mean(axis=-1)

    def density(t):
        z = np.sqrt(t)[..., None] * ang
        return np.real(np.linalg.det(geom.theta_values(z[..., None]))).mean(axis=-1)

    return RadialProfile(weight, density, geom.chart.radius ** 2)


_U_GRID = np.unique(np.concatenate([np.logspace(-14, -3, 240), np.linspace(1e-3, 1 - 1e-3, 2048),
                                    1 - np.logspace(-3, -14, 240)]))


def _transform(profile, u):
    # nodes that round onto u = 1 carry no measure
    u = np.minimum(u, 1.0 - EPS)
    if math.isinf(profile.t_max):
        t = u / (1.0 - u)
        return t, -2.0 * np.log1p(-u)
    return profile.t_max * u, np.full_like(u, math.log(profile.t_max))


def _log_integrand(profile, k, ms, u):
    t, logjac = _transform(profile, u)
    with np.errstate(divide="ignore", invalid="ignore"):
        base = -2.0 * k * profile.weight(t) + np.log(profile.density(t)) + logjac
        logt = np.log(t)
        mlogt = np.where(ms[:, None] == 0, 0.0, ms[:, None] * logt[None, :])
    return mlogt + base[None, :]


def radial_log_gram(profile: RadialProfile, k: float, ms, epsrel: float = 1e-13):
    """log of 2 pi int_0^tmax t^m e^{-2k f(t)} V(t) dt for each m, plus an error estimate.

    The integral is taken in u = t/(1+t) (or t/tmax) by adaptive
    Gauss-Kronrod, one vector-valued integration for all m; each component
    is scaled by its peak and by a grid estimate so that all integrals are
    of order one.
    """
    ms = np.asarray(ms, dtype=float)
    if ms.size == 0:
        return np.zeros(0), 0.0
    grid = _log_integrand(profile, k, ms, _U_GRID)
    if not np.all(np.isfinite(grid) | (grid == -np.inf)):
        raise QuadratureNotConverged("weight or density is not finite on the radial grid")
    lmax = grid.max(axis=1)
    if np.any(grid[:, -1] > grid[:, -2] + 1e-3) and np.any(grid[:, -1] >= lmax - 1e-12):
        raise QuadratureNotConverged("sections are not square integrable for this weight")
    scaled = np.exp(grid - lmax[:, None])
    norm = np.trapezoid(scaled, _U_GRID, axis=1)
    peaks = _U_GRID[np.argmax(grid, axis=1)]
    pts = np.unique(peaks[(peaks > 1e-10) & (peaks < 1 - 1e-10)])
    if pts.size > 400:
        pts = np.unique(np.quantile(pts, np.linspace(0, 1, 400)))

    def integrate(scale):
        def f(u):
            val = _log_integrand(profile, k, ms, np.atleast_1d(u))[:, 0]
            return np.exp(val - lmax) / scale
        res, err = scipy.integrate.quad_vec(f, 0.0, 1.0, epsabs=0.1 * epsrel, epsrel=epsrel, norm="max",
                                            points=list(pts), limit=20000)
        return np.asarray(res), float(err)

    res, err = integrate(norm)
    if np.any(res <= 0) or not np.all(np.isfinite(res)):
        raise QuadratureNotConverged("radial Gram integral vanished or diverged")
    if np.any((res < 0.1) | (res > 10.0)):
        res2, err = integrate(norm * res)
        res = res * res2
    return math.log(2 * math.pi) + lmax + np.log(norm) + np.log(res), err


# -- section bases ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SectionBasis:
    model: geo.ModelGeometry
    k: int
    kind: str                      # "monomial_radial", "monomial_chart", "theta", "product", "empty"
    exponents: tuple
    truncation_bound: int
    tail_bound: float
    radius: float
    scale: complex = 1.0
    factors: tuple = ()
    profile: Optional[RadialProfile] = field(default=None, repr=False)
    cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dim(self) -> int:
        if self.kind == "product":
            return math.prod(f.dim for f in self.factors)
        return len(self.exponents)


def section_basis(model: geo.ModelGeometry, k: int, radius: float = 2.0, tol: float = 1e-12,
                  scale: complex = 1.0, quad: QuadratureSpec = DEFAULT_QUAD) -> SectionBasis:
    """Holomorphic sections of L^k, truncated so that P_k is accurate on |z| <= radius."""
    if int(k) != k or k < 0:
        raise ValueError("tensor power must be a non-negative integer")
    k = int(k)
    fam = model.family
    if fam == "fock":
        lam = model.params["lam"]
        factors = tuple(_fock_factor(model, k, l, radius, tol, scale if j == 0 else 1.0)
                        for j, l in enumerate(lam))
        if model.n == 1:
            return factors[0]
        return SectionBasis(model, k, "product", (), max(f.truncation_bound for f in factors),
                            sum(f.tail_bound for f in factors), radius, scale, factors)
    if model.n != 1:
        raise UnsupportedFamily("exact kernels beyond fock need complex dimension 1")
    if fam == "cp1_fs":
        top = k * model.params["sign"]
        if top < 0:
            return SectionBasis(model, k, "empty", (), -1, 0.0, radius, scale)
        ex = tuple((m,) for m in range(top + 1))
        return SectionBasis(model, k, "monomial_radial", ex, top, 0.0, radius, scale,
                            profile=radial_profile(model))
    if fam == "torus":
        d = model.params["degree"]
        if d <= 0:
            raise UnsupportedFamily("theta-function bases need a positive degree")
        n_sec = k * d
        return SectionBasis(model, k, "theta", tuple((j,) for j in range(n_sec)), n_sec - 1, 0.0,
                            radius, scale)
    if model.radial:
        prof = radial_profile(model)
        top, tail = _adaptive_truncation(prof, k, radius, tol, quad)
        ex = tuple((m,) for m in range(top + 1))
        return SectionBasis(model, k, "monomial_radial", ex, top, tail, radius, scale, profile=prof)
    prof = _angular_proxy(model)
    top, tail = _adaptive_truncation(prof, k, radius, tol, quad)
    ex = tuple((m,) for m in range(top + 1))
    return SectionBasis(model, k, "monomial_chart", ex, top, tail, radius, scale, profile=prof)


def _fock_factor(model, k, lam, radius, tol, scale):
    if lam <= 0:
        return SectionBasis(model, k, "empty", (), -1, 0.0, radius, scale)
    mu = 2.0 * k * lam * radius ** 2
    top = math.ceil(6 * k * lam * radius ** 2) + 10
    # P_k truncated at degree N equals (k lam / pi) * P[Poisson(mu) <= N]
    while scipy.special.gammainc(top + 1, mu) >= tol:
        top = int(top * 1.25) + 1
    tail = float(scipy.special.gammainc(top + 1, mu))
    ex = tuple((m,) for m in range(top + 1))
    return SectionBasis(model, k, "monomial_radial", ex, top, tail, radius, scale,
                        profile=_linear_profile(lam))


def _adaptive_truncation(profile, k, radius, tol, quad, block=32):
    """Smallest degree N after which the terms |z|^{2m} e^{-2k phi}/G_m at |z| = radius are negligible."""
    logs = []
    t_r = min(radius ** 2, profile.t_max * (1 - 1e-12))
    f_r = float(profile.weight(np.array([t_r]))[0])
    m0 = 0
    while True:
        ms = np.arange(m0, m0 + block)
        lg, _ = radial_log_gram(profile, k, ms, 1e-8)
        logs.extend(ms * math.log(t_r) - 2 * k * f_r - lg if t_r > 0 else np.where(ms == 0, -lg, -np.inf))
        arr = np.array(logs)
        peak = int(np.argmax(arr))
        last = arr[-block:]
        if peak < len(arr) - block and np.all(np.diff(last) < 0) and last[-1] < arr[peak] + math.log(tol):
            cut = int(np.nonzero(arr[peak:] < arr[peak] + math.log(tol))[0][0]) + peak
            ratio = math.exp(min(0.0, arr[cut] - arr[cut - 1]))
            tail = math.exp(arr[cut] - arr[peak]) / max(1e-300, 1.0 - ratio)
            return cut, float(tail)
        m0 += block
        if m0 > MAX_BASIS:
            raise QuadratureNotConverged("section basis truncation did not settle")


def _log_sections(basis: SectionBasis, z) -> np.ndarray:
    """log(s_i(z) e^{-k phi(z)}) for points z of shape (npts,) (n = 1)."""
    z = np.asarray(z, dtype=complex).reshape(-1)
    k = basis.k
    if basis.kind == "theta":
        return _theta_log_sections(basis, z)
    model = basis.model
    ms = np.array([e[0] for e in basis.exponents], dtype=float)
    if basis.profile is not None and model.family == "fock":
        phi = basis.profile.weight(np.abs(z) ** 2)
    else:
        phi = model.phi_values(z[:, None])
    with np.errstate(divide="ignore", invalid="ignore"):
        logz = np.log(z)
        mlog = np.where(ms[None, :] == 0, 0.0, ms[None, :] * logz[:, None])
    return mlog - k * phi[:, None] + np.log(complex(basis.scale))


def _theta_log_sections(basis, z):
    p = basis.model.params
    tau = p["tau_im"]
    nsec = len(basis.exponents)
    x = np.mod(z.real, 1.0)
    y = np.mod(z.imag, tau)
    half = math.ceil(math.sqrt(45.0 / (math.pi * nsec * tau))) + 2
    ms = np.arange(-half - 1, half + 2)
    mu = np.arange(nsec)[:, None] / nsec + ms[None, :]               # (nsec, M)
    out = np.empty((len(z), nsec), dtype=complex)
    for s in range(0, len(z), CHUNK):
        xs, ys = x[s:s + CHUNK, None, None], y[s:s + CHUNK, None, None]
        ex = -(math.pi * nsec / tau) * (tau * mu + ys) ** 2 + 2j * math.pi * nsec * mu * xs
        shift = ex.real.max(axis=-1, keepdims=True)
        val = np.exp(ex - shift).sum(axis=-1)
        with np.errstate(divide="ignore"):
            out[s:s + CHUNK] = np.log(val) + shift[..., 0]
    out += -basis.k * p["eps"] * np.cos(2 * math.pi * x)[:, None]
    return out + np.log(complex(basis.scale))


# -- Gram matrices ----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GramResult:
    """G = D E D with D = diag(exp(log_scale)) and E Hermitian with unit diagonal."""

    equilibrated: Optional[np.ndarray]
    log_scale: np.ndarray
    chol: Optional[np.ndarray]
    perm: Optional[np.ndarray]
    cond: float
    error_estimate: float
    meta: dict
    factors: tuple = ()

    @property
    def diagonal(self) -> bool:
        return self.chol is None

    def matrix(self) -> np.ndarray:
        """Unscaled Gram matrix (may overflow for large k)."""
        d = np.exp(self.log_scale)
        e = np.eye(len(d)) if self.equilibrated is None else self.equilibrated
        return d[:, None] * e * d[None, :]


def gram_matrix(basis: SectionBasis, quad: QuadratureSpec = DEFAULT_QUAD) -> GramResult:
    key = ("gram", quad)
    if key in basis.cache:
        return basis.cache[key]
    if basis.kind == "product":
        parts = tuple(gram_matrix(f, quad) for f in basis.factors)
        res = GramResult(None, np.zeros(0), None, None, math.prod(p.cond for p in parts),
                         max(p.error_estimate for p in parts), {"rule": "product", "parts": len(parts)}, parts)
    elif basis.kind == "empty":
        res = GramResult(np.zeros((0, 0)), np.zeros(0), None, None, 1.0, 0.0, {"rule": "none"})
    elif basis.kind == "monomial_radial":
        ms = np.array([e[0] for e in basis.exponents])
        lg, err = radial_log_gram(basis.profile, basis.k, ms, quad.epsrel)
        lg = lg + 2 * math.log(abs(complex(basis.scale)))
        res = GramResult(None, 0.5 * lg, None, None, 1.0, err,
                         {"rule": "radial_adaptive_gauss_kronrod", "epsrel": quad.epsrel, "terms": len(ms)})
    else:
        res = _tensor_gram(basis, quad)
    basis.cache[key] = res
    return res


def _tensor_nodes(basis, level_order):
    """Nodes, Lebesgue weights and rule name for the non-radial bases (n = 1)."""
    model = basis.model
    if basis.kind == "theta":
        nx = level_order
        tau = model.params["tau_im"]
        ny = max(32, int(math.ceil(nx * tau)))
        xs = np.arange(nx) / nx
        ys = tau * np.arange(ny) / ny
        z = (xs[:, None] + 1j * ys[None, :]).reshape(-1)
        w = np.full(z.shape, tau / (nx * ny))
        return z, w, "periodic_trapezoid"
    chart = model.chart
    if chart.box is not None:
        (x0, x1), (y0, y1) = chart.box
        gx, wx = np.polynomial.legendre.leggauss(level_order)
        xs = 0.5 * (x1 - x0) * (gx + 1) + x0
        ys = 0.5 * (y1 - y0) * (gx + 1) + y0
        z = (xs[:, None] + 1j * ys[None, :]).reshape(-1)
        w = (0.25 * (x1 - x0) * (y1 - y0) * wx[:, None] * wx[None, :]).reshape(-1)
        return z, w, "tensor_gauss_legendre_box"
    rq = _quad_radius(basis)
    gr, wr = np.polynomial.legendre.leggauss(level_order)
    r = 0.5 * rq * (gr + 1)
    nth = level_order
    th = 2 * np.pi * np.arange(nth) / nth
    z = (r[:, None] * np.exp(1j * th)[None, :]).reshape(-1)
    w = (0.5 * rq * wr * r)[:, None] * np.full(nth, 2 * np.pi / nth)[None, :]
    return z, w.reshape(-1), "polar_gauss_legendre_trapezoid"


def _quad_radius(basis):
    model = basis.model
    if not math.isinf(model.chart.radius):
        return model.chart.radius
    top = basis.truncation_bound
    ms = np.array([0.0, float(top)])
    lg = _log_integrand(basis.profile, basis.k, ms, _U_GRID)
    rel = lg - lg.max(axis=1, keepdims=True)
    beyond = [np.nonzero((rel[i] < -45) & (_U_GRID > _U_GRID[np.argmax(lg[i])]))[0] for i in range(2)]
    idx = max(b[0] if b.size else len(_U_GRID) - 1 for b in beyond)
    t, _ = _transform(basis.profile, _U_GRID[idx:idx + 1])
    return float(math.sqrt(t[0]))


def _auto_order(basis):
    top = basis.truncation_bound
    if basis.kind == "theta":
        eps = abs(basis.model.params["eps"])
        return 2 * (top + 1) + 48 + int(math.ceil(6 * basis.k * eps))
    return 2 * top + 2 + 64


def _assemble(basis, order, threads):
    z, w, rule = _tensor_nodes(basis, order)
    vt = np.real(np.linalg.det(basis.model.theta_values(z[:, None])))
    logw = 0.5 * np.log(2.0 * vt * w)
    starts = range(0, len(z), CHUNK)

    def column_max(s):
        e = _log_sections(basis, z[s:s + CHUNK]) + logw[s:s + CHUNK, None]
        return e.real.max(axis=0)

    def partial(s, cmax):
        e = _log_sections(basis, z[s:s + CHUNK]) + logw[s:s + CHUNK, None] - cmax[None, :]
        a = np.exp(e)
        return a.T @ np.conj(a)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        cmax = np.max(np.array(list(pool.map(column_max, starts))), axis=0)
        parts = list(pool.map(lambda s: partial(s, cmax), starts))
    g = parts[0]
    for p in parts[1:]:   # fixed summation order, independent of thread count
        g = g + p
    g = 0.5 * (g + g.conj().T)
    diag = np.real(np.diag(g))
    if np.any(diag <= 0):
        raise IllConditioned("a basis section has zero quadrature norm")
    d = np.sqrt(diag)
    eq = g / d[:, None] / d[None, :]
    return eq, cmax + np.log(d), rule, len(z)


def _tensor_gram(basis, quad):
    order = quad.order or _auto_order(basis)
    eq, ls, rule, nodes = _assemble(basis, order, quad.threads)
    eq2, ls2, _, nodes2 = _assemble(basis, 2 * order, quad.threads)
    err = float(max(np.max(np.abs(eq2 - eq)), np.max(np.abs(ls2 - ls))))
    eq, ls = eq2, ls2
    cond = float(np.linalg.cond(eq))
    if cond > 1.0 / (100 * EPS):
        raise IllConditioned(f"Gram condition number {cond:.3g} exceeds 1/(100 eps)")
    c, piv, rank, info = lapack.zpstrf(eq, tol=-1.0, lower=1)
    if info < 0 or rank < eq.shape[0]:
        raise IllConditioned(f"pivoted Cholesky stopped at rank {rank} of {eq.shape[0]}")
    chol = np.tril(c)
    meta = {"rule": rule, "order": 2 * order, "nodes": nodes2, "coarse_order": order}
    return GramResult(eq, ls, chol, piv - 1, cond, err, meta)


# -- kernel evaluation ------------------------------------------------------

def _coords(basis, z):
    z = np.asarray(z, dtype=complex)
    n = basis.model.n
    if n == 1:
        return z.reshape(-1, 1) if z.ndim <= 1 or z.shape[-1] != 1 else z.reshape(-1, 1)
    return z.reshape(-1, n)


def _orthonormal_values(basis, gram, z):
    """(values of orthonormalized sections / e^{shift}, shift) at points z (n = 1)."""
    e = _log_sections(basis, z) - gram.log_scale[None, :]
    shift = e.real.max(axis=1)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    v = np.exp(e - shift[:, None])
    if gram.diagonal:
        return v, shift
    y = scipy.linalg.solve_triangular(gram.chol, v[:, gram.perm].T, lower=True).T
    return y, shift


def bergman_kernel_function(basis: SectionBasis, z, quad: QuadratureSpec = DEFAULT_QUAD):
    """P_k at points z (shape (n,) for one point or (npts, n)); returns float or array."""
    gram = gram_matrix(basis, quad)
    pts = _coords(basis, z)
    out = _kernel_values(basis, gram, pts)
    return float(out[0]) if np.asarray(z).ndim <= 1 and len(out) == 1 else out


def _kernel_values(basis, gram, pts):
    if basis.kind == "product":
        out = np.ones(len(pts))
        for j, (f, g) in enumerate(zip(basis.factors, gram.factors)):
            out = out * _kernel_values(f, g, pts[:, j:j + 1])
        return out
    if basis.kind == "empty":
        return np.zeros(len(pts))
    y, shift = _orthonormal_values(basis, gram, pts[:, 0])
    return np.sum(np.abs(y) ** 2, axis=1) * np.exp(2 * shift)


def offdiag_modulus(basis: SectionBasis, z, w, quad: QuadratureSpec = DEFAULT_QUAD):
    """|P_k(z, w)| with the symmetric gauge e^{-k phi(z) - k phi(w)}."""
    gram = gram_matrix(basis, quad)
    zp, wp = _coords(basis, z), _coords(basis, w)
    zp, wp = np.broadcast_arrays(zp, wp)
    out = _offdiag_values(basis, gram, zp, wp)
    return float(out[0]) if np.asarray(z).ndim <= 1 and len(out) == 1 else out


def _offdiag_values(basis, gram, zp, wp):
    if basis.kind == "product":
        out = np.ones(len(zp))
        for j, (f, g) in enumerate(zip(basis.factors, gram.factors)):
            out = out * _offdiag_values(f, g, zp[:, j:j + 1], wp[:, j:j + 1])
        return out
    if basis.kind == "empty":
        return np.zeros(len(zp))
    yz, sz = _orthonormal_values(basis, gram, zp[:, 0])
    yw, sw = _orthonormal_values(basis, gram, wp[:, 0])
    return np.abs(np.sum(yz * np.conj(yw), axis=1)) * np.exp(sz + sw)


def closed_form_kernel(model: geo.ModelGeometry, k: int, z=None) -> float:
    if model.family == "fock":
        lam = np.array(model.params["lam"])
        if np.any(lam <= 0):
            return 0.0
        return float((k / math.pi) ** model.n * np.prod(lam))
    if model.family == "cp1_fs" and model.params["eps"] == 0 and model.params["sign"] == 1:
        return (k + 1) / (2 * math.pi)
    raise UnsupportedFamily(f"no closed-form kernel for {model.family} with params {dict(model.params)}")


@dataclass(frozen=True, eq=False)
class KernelEvaluation:
    k: int
    gram: GramResult
    cond: float
    points: np.ndarray
    values: np.ndarray
    offdiag_values: Optional[np.ndarray]
    quadrature_meta: dict

    def csv_rows(self):
        pts = np.atleast_2d(self.points)
        for p, v in zip(pts, self.values):
            yield [*np.real(p), *np.imag(p), float(v), self.k]


def evaluate_kernel(model, k, points, quad: QuadratureSpec = DEFAULT_QUAD, pairs=None, radius=None,
                    scale: complex = 1.0) -> KernelEvaluation:
    pts = np.asarray(points, dtype=complex).reshape(-1, model.n)
    if radius is None:
        radius = max(1.0, float(np.max(np.linalg.norm(pts, axis=1))) if pts.size else 1.0)
        if pairs is not None:
            radius = max(radius, float(np.max(np.abs(np.asarray(pairs)))))
    basis = section_basis(model, k, radius=radius, scale=scale, quad=quad)
    gram = gram_matrix(basis, quad)
    vals = _kernel_values(basis, gram, _coords(basis, pts))
    off = None
    if pairs is not None:
        pr = np.asarray(pairs, dtype=complex).reshape(-1, 2, model.n)
        off = _offdiag_values(basis, gram, pr[:, 0], pr[:, 1])
    meta = dict(gram.meta)
    meta.update(error_estimate=gram.error_estimate, truncation_bound=basis.truncation_bound,
                tail_bound=basis.tail_bound, dim=basis.dim)
    return KernelEvaluation(int(k), gram, gram.cond, pts, vals, off, meta)


# -- phase model --------------------------------------------------------------

def eikonal_residual(model: geo.ModelGeometry, z, w, psi_jet_order: int = 2, delta: float = 0.0) -> float:
    """|sum_j (i Z_j Psi + Z_j phi)(-i Zbar_j Psi + Zbar_j phi)| at (z, w) with Z_j = d/dzbar_j.

    Psi(z, w) = i sum |lam_j||z_j - w_j|^2 + i sum lam_j (zbar_j w_j - z_j wbar_j),
    optionally perturbed by delta |z - w|^3 to exercise the check.
    """
    if model.family != "fock":
        raise UnsupportedFamily("the phase function is only constructed for the fock model")
    if psi_jet_order < 1:
        raise ValueError("the residual needs first derivatives of the phase")
    from . import jets
    lam = np.asarray(model.params["lam"], dtype=float)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    n = model.n
    zeta = [jets.WirtingerJet.variable(j, z, 1) for j in range(n)]
    psi = 0
    for j in range(n):
        d = zeta[j] - w[j]
        psi = psi + 1j * abs(lam[j]) * jets.abs2(d) + 1j * lam[j] * (jets.conj(zeta[j]) * w[j] - zeta[j] * np.conj(w[j]))
    dist2 = float(np.sum(np.abs(z - w) ** 2))
    if delta and dist2 > 0:
        r2 = sum(jets.abs2(zeta[j] - w[j]) for j in range(n))
        psi = psi + delta * r2 ** 1.5
    phi = model.phi(zeta)
    total = 0j
    for j in range(n):
        zpsi, zphi = psi.dzbar(j).value, phi.dzbar(j).value
        zbpsi, zbphi = psi.dz(j).value, phi.dz(j).value
        total += (1j * zpsi + zphi) * (-1j * zbpsi + zbphi)
    return float(abs(total))


# -- expansion fitting --------------------------------------------------------

@dataclass(frozen=True)
class FitReport:
    k_list: tuple
    values: tuple
    predicted_b: tuple
    fitted_b: tuple
    residuals: tuple
    slope: float
    slope_stderr: float
    design_cond: float

    def as_dict(self) -> dict:
        return {"k_list": list(self.k_list), "values": list(self.values), "predicted_b": list(self.predicted_b),
                "fitted_b": list(self.fitted_b), "residuals": list(self.residuals), "slope": self.slope,
                "slope_stderr": self.slope_stderr, "design_cond": self.design_cond}


def expansion_fit(model, k_list, z, coeffs, extra_terms: int = 0, quad: QuadratureSpec = DEFAULT_QUAD,
                  max_cond: float = 1e12, values=None) -> FitReport:
    """Compare exact P_k(z) with b0 k^n + b1 k^{n-1} + b2 k^{n-2}.

    ``coeffs`` is a CoefficientSet or a (b0, b1, b2) triple.  The free fit
    uses k^n, ..., k^{n-2-extra_terms}; only the first three fitted
    coefficients are reported.
    """
    ks = np.asarray(sorted(k_list), dtype=float)
    if len(ks) < 3 + extra_terms:
        raise FitDegenerate("not enough tensor powers for the requested fit")
    n = model.n
    b = (coeffs.b0, coeffs.b1, coeffs.b2) if hasattr(coeffs, "b0") else tuple(coeffs)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if values is None:
        values = [float(evaluate_kernel(model, int(k), z[None, :], quad).values[0]) for k in ks]
    p = np.asarray(values, dtype=float)
    pred = b[0] * ks ** n + b[1] * ks ** (n - 1) + b[2] * ks ** (n - 2)
    rho = p - pred
    design = np.stack([ks ** (n - j) for j in range(3 + extra_terms)], axis=1)
    colscale = np.max(np.abs(design), axis=0)
    cond = float(np.linalg.cond(design / colscale))
    if cond > max_cond:
        raise FitDegenerate(f"design matrix condition {cond:.3g} exceeds {max_cond:.3g}")
    sol, *_ = np.linalg.lstsq(design / colscale, p, rcond=None)
    fitted = tuple(float(x) for x in (sol / colscale)[:3])
    mask = rho != 0
    if np.count_nonzero(mask) >= 3:
        reg = scipy.stats.linregress(np.log(ks[mask]), np.log(np.abs(rho[mask])))
        slope, stderr = float(reg.slope), float(reg.stderr)
    else:
        slope, stderr = float("nan"), float("nan")
    return FitReport(tuple(int(k) for k in ks), tuple(map(float, p)), tuple(map(float, b)), fitted,
                     tuple(map(float, rho)), slope, stderr, cond)


# -- degeneracy scan ----------------------------------------------------------

@dataclass(frozen=True)
class DegeneracyRow:
    k: int
    point: tuple
    density: float          # P_k(x) / k^n
    b0: float


def degeneracy_scan(model, k_list, points, quad: QuadratureSpec = DEFAULT_QUAD):
    """P_k(x)/k^n on points approaching (or away from) a degenerate locus."""
    pts = np.asarray(points, dtype=complex).reshape(-1, model.n)
    b0s = []
    for p in pts:
        eig, stratum = geo.classify_stratum(model, p)
        b0s.append(0.0 if stratum.degenerate else (2 * math.pi) ** (-model.n) * abs(float(np.prod(eig))))
    rows = []
    for k in k_list:
        ev = evaluate_kernel(model, int(k), pts, quad)
        for p, v, b0 in zip(pts, ev.values, b0s):
            rows.append(DegeneracyRow(int(k), tuple(complex(x) for x in p), float(v) / k ** model.n, b0))
    return rows


def decreasing_at(rows, point) -> bool:
    seq = [r.density for r in sorted(rows, key=lambda r: r.k) if np.allclose(r.point, point)]
    return all(b < a for a, b in zip(seq, seq[1:]))
