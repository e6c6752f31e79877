"""Model complex manifolds with Hermitian line-bundle weights.

A geometry is a chart in C^n carrying a real weight phi (so that a local
frame has |s|^2 = exp(-2 phi)) and a positive Hermitian matrix Theta_{jk}(z)
for the base metric.  Everything downstream is computed from Taylor jets of
phi and Theta in the Wirtinger variables, either by exact jet arithmetic
("exact_closed_form") or by finite differences.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional

import numpy as np
import scipy.linalg

from . import expr as _expr
from . import jets
from .errors import NotHermitian, NotPositive, OutOfChart, SingularTheta, JetOrderTooLow
from .findiff import wirtinger_fd
from .jets import WirtingerJet

FAMILIES = ("fock", "cp1_fs", "torus", "chart_expression")
DERIVATIVE_MODES = ("exact_closed_form", "finite_difference")
MAX_ORDER = 8
DEFAULT_TAU = 1e-8
HERMITIAN_RTOL = 1e-12


@dataclass(frozen=True)
class Chart:
    """Coordinate domain: an open ball of given radius or an axis-aligned box.

    ``box`` lists (lo, hi) for the real coordinates x_1, y_1, x_2, y_2, ...
    """

    radius: float = math.inf
    box: Optional[tuple] = None

    def contains(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if self.box is not None:
            x = np.stack([z.real, z.imag], axis=-1).reshape(z.shape[:-1] + (-1,))
            lo = np.array([b[0] for b in self.box])
            hi = np.array([b[1] for b in self.box])
            return np.all((x >= lo) & (x <= hi), axis=-1)
        return np.linalg.norm(z, axis=-1) < self.radius


@dataclass(frozen=True, eq=False)
class ModelGeometry:
    """Immutable chart model; build with the family constructors below."""

    n: int
    family: str
    params: Mapping = field(default_factory=dict)
    chart: Chart = field(default_factory=Chart)
    derivative_mode: str = "exact_closed_form"
    phi: Callable = field(default=None, repr=False)
    theta: Callable = field(default=None, repr=False)
    radial: bool = False
    compact: bool = False
    chern_number: Optional[int] = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("complex dimension must be positive")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.derivative_mode not in DERIVATIVE_MODES:
            raise ValueError(f"unknown derivative mode {self.derivative_mode!r}")

    def with_mode(self, mode: str) -> "ModelGeometry":
        return _replace(self, derivative_mode=mode)

    # numeric evaluation on arrays of points of shape (..., n)
    def phi_values(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        val = np.asarray(self.phi([z[..., j] for j in range(self.n)]))
        return np.broadcast_to(np.real(val), z.shape[:-1]).astype(float)

    def theta_values(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        rows = self.theta([z[..., j] for j in range(self.n)])
        out = np.empty(z.shape[:-1] + (self.n, self.n), dtype=complex)
        for j in range(self.n):
            for k in range(self.n):
                out[..., j, k] = rows[j][k]
        return out

    def vtheta(self, z):
        """det Theta as a chart function (works on arrays and jets)."""
        return jets.det(self.theta(z))


def _replace(geom, **changes):
    kw = {f: getattr(geom, f) for f in geom.__dataclass_fields__}
    kw.update(changes)
    return ModelGeometry(**kw)


# -- families ---------------------------------------------------------------

def fock(lam, mode: str = "exact_closed_form") -> ModelGeometry:
    """C^n with phi = sum lam_j |z_j|^2 and the flat metric Theta = I."""
    lam = tuple(float(x) for x in np.atleast_1d(lam))
    n = len(lam)

    def phi(z):
        return sum(l * jets.abs2(zj) for l, zj in zip(lam, z))

    return ModelGeometry(n=n, family="fock", params={"lam": lam}, derivative_mode=mode,
                         phi=phi, theta=_flat_theta(n), radial=(n == 1))


def cp1_fs(eps: float = 0.0, sigma: float = 1.0, sign: int = 1, radius: float = math.inf,
           mode: str = "exact_closed_form") -> ModelGeometry:
    """O(sign) on CP^1 in the affine chart with the Fubini-Study base metric.

    phi = sign * log(1 + |z|^2) / 2 + eps * exp(-|z|^2 / sigma^2); the
    perturbation is a smooth function on CP^1 centred at the origin, so it
    changes the metric on the bundle but not the bundle.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")

    def phi(z):
        t = jets.abs2(z[0])
        out = 0.5 * sign * jets.log(1.0 + t)
        if eps:
            out = out + eps * jets.exp(-t / sigma ** 2)
        return out

    def theta(z):
        return [[(1.0 + jets.abs2(z[0])) ** -2]]

    return ModelGeometry(n=1, family="cp1_fs",
                         params={"eps": float(eps), "sigma": float(sigma), "sign": int(sign)},
                         chart=Chart(radius=radius), derivative_mode=mode, phi=phi, theta=theta,
                         radial=True, compact=True, chern_number=int(sign))


def torus(degree: int = 1, tau_im: float = 1.0, eps: float = 0.0,
          mode: str = "exact_closed_form") -> ModelGeometry:
    """Degree-d bundle on C / (Z + i tau_im Z) with flat base metric.

    phi = a |z|^2 + eps cos(2 pi Re z), a = pi d / (2 tau_im), so the Chern
    form integrates to d over the fundamental rectangle.
    """
    a = math.pi * degree / (2.0 * tau_im)

    def phi(z):
        out = a * jets.abs2(z[0])
        if eps:
            out = out + eps * jets.cos(2.0 * math.pi * jets.real_part(z[0]))
        return out

    box = ((0.0, 1.0), (0.0, float(tau_im)))
    return ModelGeometry(n=1, family="torus",
                         params={"degree": int(degree), "tau_im": float(tau_im), "eps": float(eps)},
                         chart=Chart(box=box), derivative_mode=mode, phi=phi, theta=_flat_theta(1),
                         compact=True, chern_number=int(degree))


def chart_expression(phi: str, n: int = 1, theta: Optional[str] = None, radius: float = math.inf,
                     box=None, mode: str = "exact_closed_form") -> ModelGeometry:
    """Weight given by an expression string; optional scalar Theta expression for n = 1."""
    phi_expr = _expr.parse(phi, n)
    if theta is None:
        theta_fn = _flat_theta(n)
        theta_radial = True
    else:
        if n != 1:
            raise ValueError("theta expressions are supported for n = 1 only")
        theta_expr = _expr.parse(theta, n)
        theta_fn = lambda z: [[theta_expr(z)]]  # noqa: E731
        theta_radial = theta_expr.is_radial
    geom = ModelGeometry(n=n, family="chart_expression",
                         params={"phi": phi, "theta": theta},
                         chart=Chart(radius=radius, box=None if box is None else tuple(map(tuple, box))),
                         derivative_mode=mode, phi=phi_expr, theta=theta_fn,
                         radial=phi_expr.is_radial and theta_radial and box is None)
    _check_real_weight(geom)
    return geom


def custom(n: int, phi: Callable, theta: Optional[Callable] = None, chart: Chart = Chart(),
           radial: bool = False, mode: str = "exact_closed_form", params=None) -> ModelGeometry:
    """Geometry from arbitrary chart callables written against :mod:`bergkern.jets`."""
    return ModelGeometry(n=n, family="chart_expression", params=dict(params or {}), chart=chart,
                         derivative_mode=mode, phi=phi, theta=theta or _flat_theta(n), radial=radial)


def pullback(geom: ModelGeometry, c: complex) -> ModelGeometry:
    """Pull the model back along z -> c z (phi o c, |c|^2 Theta o c)."""
    c = complex(c)

    def phi(z):
        return geom.phi([c * zj for zj in z])

    def theta(z):
        rows = geom.theta([c * zj for zj in z])
        return [[abs(c) ** 2 * e for e in row] for row in rows]

    chart = Chart(radius=geom.chart.radius / abs(c))
    return custom(geom.n, phi, theta, chart=chart, radial=geom.radial, mode=geom.derivative_mode,
                  params={"pullback_of": geom.family, "c": c})


def _flat_theta(n):
    def theta(z):
        return [[1.0 if j == k else 0.0 for k in range(n)] for j in range(n)]
    return theta


def _check_real_weight(geom: ModelGeometry, samples: int = 7):
    rng = np.random.default_rng(0)
    r = min(1.0, 0.5 * geom.chart.radius)
    z = r * (rng.uniform(-1, 1, (samples, geom.n)) + 1j * rng.uniform(-1, 1, (samples, geom.n)))
    with np.errstate(all="ignore"):
        val = np.asarray(geom.phi([z[:, j] for j in range(geom.n)]), dtype=complex)
    finite = np.isfinite(val)
    if np.any(np.abs(val.imag[finite]) > 1e-12 * np.maximum(1.0, np.abs(val.real[finite]))):
        raise ValueError("weight expression is not real-valued")


# -- derivatives and jets ---------------------------------------------------

def _check_point(geom, z0):
    z0 = np.asarray(z0, dtype=complex)
    if z0.shape[-1] != geom.n:
        raise ValueError(f"point has {z0.shape[-1]} coordinates, expected {geom.n}")
    if not np.all(geom.chart.contains(z0)):
        raise OutOfChart("point lies outside the chart")
    return z0


def wirtinger_derivative(geom: ModelGeometry, f: Callable, z0, alpha, beta,
                         max_order: int = MAX_ORDER, h: Optional[float] = None) -> complex:
    """d^alpha_z d^beta_zbar f(z0)."""
    z0 = _check_point(geom, z0)
    order = sum(alpha) + sum(beta)
    if order > max_order:
        raise JetOrderTooLow(f"derivative order {order} exceeds configured maximum {max_order}")
    if geom.derivative_mode == "finite_difference":
        return wirtinger_fd(f, z0, tuple(alpha), tuple(beta), h=h, chart=geom.chart)
    return complex(np.asarray(jet(geom, f, z0, order).derivative(alpha, beta)))


def jet(geom: ModelGeometry, f: Callable, z0, order: int, max_order: int = MAX_ORDER) -> WirtingerJet:
    """Taylor jet of a chart function at z0 (z0 may carry leading batch axes in exact mode)."""
    z0 = _check_point(geom, z0)
    if order > max_order:
        raise JetOrderTooLow(f"jet order {order} exceeds configured maximum {max_order}")
    if geom.derivative_mode == "finite_difference":
        if z0.ndim != 1:
            raise ValueError("finite-difference jets are unbatched")
        entries = {}
        for idx in jets._multi_indices(2 * geom.n, order):
            alpha, beta = idx[: geom.n], idx[geom.n:]
            d = wirtinger_fd(f, z0, alpha, beta, chart=geom.chart)
            fact = math.prod(math.factorial(i) for i in idx)
            entries[(alpha, beta)] = d / fact
        return WirtingerJet.from_coefficients(entries, geom.n, order, z0)
    return _exact_jet(geom.n, f, z0, order)


def _exact_jet(n, f, z0, order):
    zv = [WirtingerJet.variable(j, z0, order) for j in range(n)]
    out = f(zv)
    if not isinstance(out, WirtingerJet):
        out = WirtingerJet.constant(np.broadcast_to(out, z0.shape[:-1]), n, order, z0)
    return out


def theta_jets(geom: ModelGeometry, z0, order: int):
    """Theta_{jk} as a nested list of jets."""
    if geom.derivative_mode == "finite_difference":
        out = []
        for j in range(geom.n):
            row = []
            for k in range(geom.n):
                row.append(jet(geom, lambda z, j=j, k=k: _entry(geom.theta(z)[j][k], z), z0, order))
            out.append(row)
        return out
    z0 = _check_point(geom, z0)
    zv = [WirtingerJet.variable(j, z0, order) for j in range(geom.n)]
    rows = geom.theta(zv)
    return [[_as_jet(e, geom.n, order, z0) for e in row] for row in rows]


def _entry(e, z):
    if isinstance(e, (int, float, complex)):
        return np.full(np.shape(z[0]), e, dtype=complex)
    return e


def _as_jet(e, n, order, z0):
    if isinstance(e, WirtingerJet):
        return e
    return WirtingerJet.constant(np.broadcast_to(np.asarray(e, dtype=complex), z0.shape[:-1]), n, order, z0)


def levi_form(geom: ModelGeometry, z) -> np.ndarray:
    """Phi_{jk} = d^2 phi / dz_j dzbar_k at points of shape (..., n)."""
    z = _check_point(geom, z)
    pj = jet(geom, geom.phi, z, 2)
    out = np.empty(z.shape[:-1] + (geom.n, geom.n), dtype=complex)
    for j in range(geom.n):
        for k in range(geom.n):
            out[..., j, k] = pj.dz(j).dzbar(k).value
    return out


# -- pointwise curvature ----------------------------------------------------

@dataclass(frozen=True)
class Stratum:
    """Signature class of the curvature: M(q), or degenerate when q is None."""

    q: Optional[int]

    @property
    def degenerate(self) -> bool:
        return self.q is None

    def __str__(self) -> str:
        return "degenerate" if self.q is None else f"M({self.q})"


def _hermitian_check(mat, what):
    scale = max(1.0, float(np.max(np.abs(mat))))
    if np.max(np.abs(mat - np.conj(np.swapaxes(mat, -1, -2)))) > HERMITIAN_RTOL * scale:
        raise NotHermitian(f"{what} is not Hermitian")


def curvature_endomorphism(geom: ModelGeometry, z) -> np.ndarray:
    """Rdot = 2 Theta^{-1} Phi in the coordinate frame."""
    phi2 = levi_form(geom, z)
    th = geom.theta_values(z)
    _hermitian_check(th, "Theta")
    _hermitian_check(phi2, "Levi form")
    if np.any(np.abs(np.linalg.det(th)) < 1e-300):
        raise SingularTheta("Theta is singular")
    return 2.0 * np.linalg.solve(th, phi2)


def classify_eigenvalues(eigenvalues, tau: float = DEFAULT_TAU) -> Stratum:
    a = np.asarray(eigenvalues, dtype=float)
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if np.any(np.abs(a) <= tau * scale):
        return Stratum(None)
    return Stratum(int(np.count_nonzero(a < 0)))


def classify_stratum(geom: ModelGeometry, z, tau: float = DEFAULT_TAU):
    """Sorted eigenvalues of Rdot (generalized eigenvalues of (2 Phi, Theta)) and the stratum."""
    phi2 = levi_form(geom, z)
    th = geom.theta_values(z)
    _hermitian_check(th, "Theta")
    _hermitian_check(phi2, "Levi form")
    a = scipy.linalg.eigh(2.0 * phi2, th, eigvals_only=True)
    return np.sort(a), classify_eigenvalues(a, tau)


def rdot_eigenvalues_batch(geom: ModelGeometry, z) -> np.ndarray:
    """Eigenvalues of Rdot at many points, shape (..., n); exact mode only."""
    z = np.asarray(z, dtype=complex)
    phi2 = levi_form(geom, z)
    th = geom.theta_values(z)
    if geom.n == 1:
        return (2.0 * phi2[..., 0, 0].real / th[..., 0, 0].real)[..., None]
    # Theta = L L^H; eigenvalues of L^{-1} (2 Phi) L^{-H}
    chol = np.linalg.cholesky(th)
    linv = np.linalg.inv(chol)
    m = linv @ (2.0 * phi2) @ np.conj(np.swapaxes(linv, -1, -2))
    return np.linalg.eigvalsh(m)


@dataclass(frozen=True)
class CurvatureReport:
    point: np.ndarray
    rdot: np.ndarray
    eigenvalues: np.ndarray
    stratum: Stratum
    omega: np.ndarray
    v_theta: float
    v_omega: float
    r: Optional[float] = None
    r_hat: Optional[float] = None
    ric_norm2: Optional[float] = None
    rdet_norm2: Optional[float] = None
    ric_rdet_pairing: Optional[float] = None
    rtm_norm2: Optional[float] = None
    lap_r: Optional[float] = None
    lap_r_hat: Optional[float] = None

    @property
    def n(self) -> int:
        return len(self.eigenvalues)

    @property
    def det_rdot(self) -> float:
        return float(np.prod(self.eigenvalues))

    @property
    def complete(self) -> bool:
        return self.r is not None

    def as_dict(self) -> dict:
        def enc(x):
            if isinstance(x, np.ndarray):
                if np.iscomplexobj(x):
                    return {"re": x.real.tolist(), "im": x.imag.tolist()}
                return x.tolist()
            if isinstance(x, Stratum):
                return str(x)
            return x
        return {k: enc(getattr(self, k)) for k in self.__dataclass_fields__}


class LocalCurvature:
    """Curvature fields as jets, built from jets of phi and Theta at a point.

    With phi given to order p the fields r, r_hat are jets of order p - 4.
    """

    def __init__(self, phi_jet: WirtingerJet, theta_jets):
        self.n = n = phi_jet.n
        p = phi_jet.order
        if p < 4:
            raise JetOrderTooLow("curvature fields need phi to order >= 4")
        self.order = p
        self.levi = [[phi_jet.dz(j).dzbar(k) for k in range(n)] for j in range(n)]
        self.theta = [[t.truncate(p - 2) for t in row] for row in theta_jets]
        self.omega = [[e * (1.0 / math.pi) for e in row] for row in self.levi]
        self.v_theta = jets.det(self.theta)
        self.v_omega = jets.det(self.omega)
        self.det_rdot = (2.0 ** n) * jets.det(self.levi) / self.v_theta
        self.log_v_omega = jets.log(self.v_omega)
        self.log_v_theta = jets.log(self.v_theta)
        self.omega_inv = jets.inverse(self.omega)
        self.r = self.laplacian(self.log_v_omega)
        self.r_hat = self.laplacian(self.log_v_theta)

    def laplacian(self, f: WirtingerJet) -> WirtingerJet:
        """-2 sum_{jk} h^{jk} d_j dbar_k f with h = omega^T, i.e. -2 tr(omega^{-1} F)."""
        out = 0
        for j in range(self.n):
            for k in range(self.n):
                out = out + self.omega_inv[k][j] * f.dz(j).dzbar(k)
        return -2.0 * out

    def b1_jet(self) -> WirtingerJet:
        n = self.n
        return (2 * math.pi) ** (-n) * self.det_rdot * (self.r_hat * (1 / (4 * math.pi))
                                                         - self.r * (1 / (8 * math.pi)))


def _values(matrix_of_jets):
    n = len(matrix_of_jets)
    return np.array([[np.asarray(matrix_of_jets[j][k].value) for k in range(n)] for j in range(n)])


def _frame(omega_val):
    """P with P^T omega conj(P) = I (columns: omega-orthonormal frame)."""
    chol = np.linalg.cholesky(omega_val)
    return np.linalg.inv(chol).T


def _form_in_frame(a, pmat):
    return pmat.T @ a @ np.conj(pmat)


def chern_curvature_tensor(omega_jets) -> np.ndarray:
    """R_{a b c d} = -d_a dbar_b g_{cd} + g^{pq} d_a g_{cq} dbar_b g_{pd} for the Kaehler metric g = omega."""
    n = len(omega_jets)
    g = _values(omega_jets)
    ginv = np.linalg.inv(g)
    dg = np.empty((n, n, n), dtype=complex)       # d_a g_{cd}
    dbg = np.empty((n, n, n), dtype=complex)      # dbar_b g_{cd}
    ddg = np.empty((n, n, n, n), dtype=complex)   # d_a dbar_b g_{cd}
    for c in range(n):
        for d in range(n):
            e = omega_jets[c][d]
            for a in range(n):
                dg[a, c, d] = e.dz(a).value
                dbg[a, c, d] = e.dzbar(a).value
                for b in range(n):
                    ddg[a, b, c, d] = e.dz(a).dzbar(b).value
    # g^{p qbar} = ginv[q, p]
    corr = np.einsum("qp,acq,bpd->abcd", ginv, dg, dbg)
    return -ddg + corr


def curvature_report(geom: ModelGeometry, z, tau: float = DEFAULT_TAU,
                     require_positive: bool = True) -> CurvatureReport:
    """Pointwise curvature package at a single point z."""
    z = _check_point(geom, z)
    if z.ndim != 1:
        raise ValueError("curvature_report takes a single point")
    n = geom.n
    eig, stratum = classify_stratum(geom, z, tau)
    rdot = curvature_endomorphism(geom, z)
    th = geom.theta_values(z)
    phi2 = levi_form(geom, z)
    omega = phi2 / math.pi
    v_theta = float(np.linalg.det(th).real)
    v_omega = float(np.linalg.det(omega).real)
    base = dict(point=z, rdot=rdot, eigenvalues=eig, stratum=stratum, omega=omega,
                v_theta=v_theta, v_omega=v_omega)
    if stratum.q != 0:
        if require_positive:
            raise NotPositive(f"omega is not positive definite at {z} (stratum {stratum})")
        return CurvatureReport(**base)

    phi_jet = jet(geom, geom.phi, z, 6)
    loc = LocalCurvature(phi_jet, theta_jets(geom, z, 4))
    om = _values(loc.omega)
    pmat = _frame(om)
    ric = _values([[loc.log_v_omega.dz(j).dzbar(k) for k in range(n)] for j in range(n)])
    rdet = _values([[loc.log_v_theta.dz(j).dzbar(k) for k in range(n)] for j in range(n)])
    ric_f = _form_in_frame(ric, pmat)
    rdet_f = _form_in_frame(rdet, pmat)
    rtm = chern_curvature_tensor([[e.truncate(2) for e in row] for row in loc.omega])
    rtm_f = np.einsum("abcd,ai,bj,ck,dl->ijkl", rtm, pmat, np.conj(pmat), pmat, np.conj(pmat))
    pairing = np.sum(ric_f * np.conj(rdet_f))
    return CurvatureReport(
        **base,
        r=float(np.real(loc.r.value)),
        r_hat=float(np.real(loc.r_hat.value)),
        ric_norm2=float(np.sum(np.abs(ric_f) ** 2)),
        rdet_norm2=float(np.sum(np.abs(rdet_f) ** 2)),
        ric_rdet_pairing=float(pairing.real),
        rtm_norm2=float(np.sum(np.abs(rtm_f) ** 2)),
        lap_r=float(np.real(loc.laplacian(loc.r).value)),
        lap_r_hat=float(np.real(loc.laplacian(loc.r_hat).value)),
    )
