"""Expansion coefficients b0, b1, b2 of the Bergman kernel function.

Two independent routes are provided:

* closed-form curvature formulas evaluated on a :class:`CurvatureReport`;
* the stationary-phase self-consistency relations in normal coordinates,
  evaluated by exact jet algebra with the operator
  Delta_0 = sum_j lam_j^{-1} d_j dbar_j at the origin.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np

from . import geometry as geo
from . import jets
from .errors import JetOrderTooLow, NotNormalForm, StratumMismatch
from .jets import WirtingerJet, laplacian_power_at_origin

NORMAL_FORM_TOL = 1e-10
PI = math.pi


@dataclass(frozen=True)
class CoefficientSet:
    point: tuple
    q: int
    b0: float
    negative_directions: tuple = ()
    b1: Optional[float] = None
    b2: Optional[float] = None
    b0_km: Optional[float] = None
    b1_km: Optional[float] = None
    b2_km: Optional[float] = None
    method: str = "closed_form"

    def as_record(self) -> dict:
        rec = asdict(self)
        rec["point"] = [[complex(z).real, complex(z).imag] for z in self.point]
        rec["negative_directions"] = list(self.negative_directions)
        return rec


def _require(report, q):
    if report.stratum.q != q:
        raise StratumMismatch(f"point lies in {report.stratum}, not M({q})")


def _prefactor(report) -> float:
    """(2 pi)^{-n} det Rdot."""
    return (2 * PI) ** (-report.n) * report.det_rdot


def _require_full(report):
    _require(report, 0)
    if not report.complete:
        raise StratumMismatch("curvature report lacks the omega-dependent fields")


def b0_coeff(report, q: int = 0):
    """(2 pi)^{-n} |det Rdot| and the indices of negative eigen-directions."""
    _require(report, q)
    neg = tuple(int(j) for j in np.flatnonzero(np.asarray(report.eigenvalues) < 0))
    return abs(_prefactor(report)), neg


def b1_coeff(report) -> float:
    _require_full(report)
    return _prefactor(report) * (report.r_hat / (4 * PI) - report.r / (8 * PI))


def b2_coeff(report) -> float:
    _require_full(report)
    r, rh = report.r, report.r_hat
    bracket = (r * r / (128 * PI ** 2)
               - r * rh / (32 * PI ** 2)
               + rh * rh / (32 * PI ** 2)
               - report.lap_r_hat / (32 * PI ** 2)
               - report.rdet_norm2 / (8 * PI ** 2)
               + report.ric_rdet_pairing / (8 * PI ** 2)
               + report.lap_r / (96 * PI ** 2)
               - report.ric_norm2 / (24 * PI ** 2)
               + report.rtm_norm2 / (96 * PI ** 2))
    return _prefactor(report) * bracket


def b_km_coeffs(report):
    """Coefficients for L^k twisted by the canonical bundle."""
    _require_full(report)
    pre = _prefactor(report)
    r = report.r
    b2 = (r * r / (128 * PI ** 2) + report.lap_r / (96 * PI ** 2)
          - report.ric_norm2 / (24 * PI ** 2) + report.rtm_norm2 / (96 * PI ** 2))
    return pre, pre * (-r / (8 * PI)), pre * b2


def local_morse_rhs(report, k: float, q: int = 0):
    """Leading local Morse bound and, on M(0), the three-term refinement.

    Returns ``(leading, refined)``; ``refined`` is None unless q = 0 and the
    point lies in M(0) with a complete report.
    """
    n = report.n
    if report.stratum.q != q:
        return 0.0, (0.0 if q == 0 else None)
    leading = abs(_prefactor(report)) * k ** n
    refined = None
    if q == 0 and report.complete:
        refined = leading + b1_coeff(report) * k ** (n - 1) + b2_coeff(report) * k ** (n - 2)
    return leading, refined


def coefficient_set(geom, z, q: int = 0, tau: float = geo.DEFAULT_TAU) -> CoefficientSet:
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    report = geo.curvature_report(geom, z, tau=tau, require_positive=False)
    b0, neg = b0_coeff(report, q)
    kw = {}
    if q == 0 and report.complete:
        km = b_km_coeffs(report)
        kw = dict(b1=b1_coeff(report), b2=b2_coeff(report), b0_km=km[0], b1_km=km[1], b2_km=km[2])
    return CoefficientSet(point=tuple(complex(x) for x in z), q=q, b0=b0, negative_directions=neg, **kw)


# -- jets of the diagonal coefficient functions -----------------------------

def b0_jet(phi_jet: WirtingerJet, vtheta_jet: WirtingerJet) -> WirtingerJet:
    """Jet of (2 pi)^{-n} det Rdot = pi^{-n} det(Phi) / V_Theta, order = phi order - 2."""
    n = phi_jet.n
    levi = [[phi_jet.dz(j).dzbar(k) for k in range(n)] for j in range(n)]
    v = vtheta_jet.truncate(min(vtheta_jet.order, phi_jet.order - 2))
    return PI ** (-n) * jets.det(levi) / v


def b1_jet(geom, z, order: int = 4) -> WirtingerJet:
    """Closed-form jet of the diagonal function x -> b1(x) at z."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    loc = geo.LocalCurvature(geo.jet(geom, geom.phi, z, order + 4), geo.theta_jets(geom, z, order + 2))
    return loc.b1_jet()


def normal_form_jets(geom, order: int = 8):
    """Jets of phi and V_Theta at the origin, with the diagonal quadratic coefficients.

    The caller is responsible for the coordinates being normal at 0; the
    returned jets are checked by the stationary-phase routines.
    """
    z0 = np.zeros(geom.n, dtype=complex)
    pj = geo.jet(geom, geom.phi, z0, order)
    th = geo.theta_jets(geom, z0, order - 2)
    vt = jets.det(th)
    lam = np.array([pj.coeff(_unit(j, geom.n), _unit(j, geom.n)).real for j in range(geom.n)])
    return pj, vt, lam


def _unit(j, n):
    return tuple(1 if i == j else 0 for i in range(n))


def _check_normal_form(phi_jet, vtheta_jet, lam):
    n = phi_jet.n
    scale = max(1.0, float(np.max(np.abs(lam))))
    for (alpha, beta), c in phi_jet.items():
        a, b = sum(alpha), sum(beta)
        if a > 1 and b > 1:
            continue
        expect = 0.0
        if a == 1 and b == 1 and alpha == beta:
            expect = lam[alpha.index(1)]
        if abs(complex(c) - expect) > NORMAL_FORM_TOL * scale:
            raise NotNormalForm(f"weight coefficient {alpha},{beta} = {complex(c):.3g} violates normal form")
    if abs(complex(vtheta_jet.value) - 1.0) > NORMAL_FORM_TOL:
        raise NotNormalForm("V_Theta(0) must equal 1 in normal coordinates")
    if n != len(lam):
        raise ValueError("eigenvalue vector length does not match the jet dimension")


def _phi1(phi_jet, lam):
    n = phi_jet.n
    quad = 0
    for j in range(n):
        quad = quad + lam[j] * jets.abs2(WirtingerJet.variable(j, np.zeros(n), phi_jet.order))
    return phi_jet - quad


def _polarized_product(left: WirtingerJet, right: WirtingerJet) -> WirtingerJet:
    """x(0, z) y(z, 0): antiholomorphic part of ``left`` times holomorphic part of ``right``."""
    return left.antiholomorphic_part() * right.holomorphic_part()


def _times_vanishing(f: WirtingerJet, valuation: int, g: WirtingerJet) -> WirtingerJet:
    """f * g where f vanishes to order ``valuation``; exact to order min(f.order, g.order + valuation)."""
    target = min(f.order, g.order + valuation)
    return f.truncate(target) * _pad(g, target)


def _pad(g: WirtingerJet, order: int) -> WirtingerJet:
    if order <= g.order:
        return g.truncate(order)
    nv = 2 * g.n
    coeffs = np.zeros(g.coeffs.shape[: g.coeffs.ndim - nv] + (order + 1,) * nv, dtype=complex)
    coeffs[(...,) + (slice(0, g.order + 1),) * nv] = g.coeffs
    return WirtingerJet(coeffs, g.n, order, g.base_point)


def _d0(f, lam, power):
    return complex(laplacian_power_at_origin(f, lam, power))


def b1_via_stationary_phase(phi_jet: WirtingerJet, vtheta_jet: WirtingerJet, lam) -> float:
    lam = np.asarray(lam, dtype=float)
    if phi_jet.order < 4 or vtheta_jet.order < 2:
        raise JetOrderTooLow("b1 recursion needs phi to order 4 and V_Theta to order 2")
    _check_normal_form(phi_jet, vtheta_jet, lam)
    n = phi_jet.n
    order = 4
    phi1 = _phi1(phi_jet.truncate(order), lam)
    v = vtheta_jet.truncate(min(order, vtheta_jet.order))
    b0 = b0_jet(phi_jet.truncate(order), vtheta_jet)
    bb = _polarized_product(b0, b0)
    det_rdot0 = 2.0 ** n * float(np.prod(lam))
    bracket = 0.5 * _d0(v * bb, lam, 1) - 0.25 * _d0(_times_vanishing(phi1, 4, v * bb), lam, 2)
    return float((-(2 * PI) ** n / det_rdot0 * bracket).real)


def b2_via_stationary_phase(phi_jet: WirtingerJet, vtheta_jet: WirtingerJet, lam,
                            b1_diag_jet: WirtingerJet) -> float:
    lam = np.asarray(lam, dtype=float)
    if phi_jet.order < 8 or vtheta_jet.order < 6 or b1_diag_jet.order < 4:
        raise JetOrderTooLow("b2 recursion needs phi to order 8, V_Theta to 6 and b1 to 4")
    _check_normal_form(phi_jet, vtheta_jet, lam)
    n = phi_jet.n
    order = 8
    phi1 = _phi1(phi_jet.truncate(order), lam)
    v = vtheta_jet.truncate(6)
    b0 = b0_jet(phi_jet, v)
    b1 = b1_diag_jet.truncate(4)
    b00 = _polarized_product(b0, b0)
    b01 = _polarized_product(b0, b1) + _polarized_product(b1, b0)
    b1_00 = complex(b1.value)
    det_rdot0 = 2.0 ** n * float(np.prod(lam))
    bracket = (b1_00 ** 2
               + 0.5 * _d0(v * b01, lam, 1)
               - 0.25 * _d0(_times_vanishing(phi1, 4, v * b01), lam, 2)
               + 0.125 * _d0(v * b00, lam, 2)
               - _d0(_times_vanishing(phi1, 4, v * b00), lam, 3) / 24.0
               + _d0(_times_vanishing(phi1 * phi1, 8, v * b00), lam, 4) / 192.0)
    return float((-(2 * PI) ** n / det_rdot0 * bracket).real)


def stationary_phase_set(geom) -> CoefficientSet:
    """b1, b2 at the origin of a model already in normal coordinates."""
    pj, vt, lam = normal_form_jets(geom, 8)
    b1j = b1_jet(geom, np.zeros(geom.n), 4)
    b1 = b1_via_stationary_phase(pj, vt, lam)
    b2 = b2_via_stationary_phase(pj, vt, lam, b1j)
    b0 = (2 * PI) ** (-geom.n) * 2.0 ** geom.n * abs(float(np.prod(lam)))
    return CoefficientSet(point=tuple([0j] * geom.n), q=0, b0=b0, b1=b1, b2=b2, method="stationary_phase")
