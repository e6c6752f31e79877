"""Curvature integrals over signature strata and section-count comparisons (n = 1).

I_q = (2 pi)^{-1} int_{M(q)} |det Rdot| dv.  With dv = 2 V_Theta dx dy and
det Rdot = 2 Phi / V_Theta the integrand is (2/pi) |Phi| dx dy, so for a
radial weight phi = f(|z|^2) it reduces to 2 int |(t f'(t))'| dt over the
sign region.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.optimize

from . import geometry as geo
from .errors import MissingDims, QuadratureNotConverged, UnsupportedFamily


@dataclass(frozen=True)
class MorseIntegral:
    value: float
    error: float
    boundaries: tuple = ()


@dataclass(frozen=True, eq=False)
class MorseReport:
    model: geo.ModelGeometry
    q_integrals: tuple
    rr_leading: float
    exact_dims: dict = field(default_factory=dict)
    quadrature_error: float = 0.0

    @property
    def euler_integral(self) -> float:
        """sum_q (-1)^q I_q."""
        return math.fsum((-1) ** q * v for q, v in enumerate(self.q_integrals))

    @property
    def rr_defect(self) -> float:
        return self.euler_integral - self.rr_leading

    def as_dict(self) -> dict:
        return {"family": self.model.family, "params": dict(self.model.params),
                "q_integrals": list(self.q_integrals), "rr_leading": self.rr_leading,
                "euler_integral": self.euler_integral, "quadrature_error": self.quadrature_error,
                "exact_dims": {str(k): {str(q): d for q, d in v.items()} for k, v in self.exact_dims.items()}}


def _require_compact(model):
    if model.n != 1:
        raise UnsupportedFamily("stratum integrals are implemented for complex dimension 1")
    if not model.compact:
        raise UnsupportedFamily(f"{model.family} is not a compact family")


def _levi_radial(model, t):
    z = np.sqrt(np.atleast_1d(np.asarray(t, dtype=float))).astype(complex)[:, None]
    return geo.levi_form(model, z)[:, 0, 0].real


def _composite_gauss(f, a, b, tol, order=20, max_panels=1 << 14):
    """Composite Gauss-Legendre on [a, b], doubling the panel count until two levels agree."""
    g, w = np.polynomial.legendre.leggauss(order)

    def level(panels):
        edges = np.linspace(a, b, panels + 1)
        half = 0.5 * np.diff(edges)
        x = (edges[:-1, None] + half[:, None] * (g[None, :] + 1)).reshape(-1)
        return float(math.fsum((f(x).reshape(panels, order) * w[None, :] * half[:, None]).reshape(-1)))

    panels = 4
    prev = level(panels)
    while panels < max_panels:
        panels *= 2
        cur = level(panels)
        if abs(cur - prev) <= tol:
            return cur, abs(cur - prev)
        prev = cur
    raise QuadratureNotConverged("composite Gauss-Legendre rule did not converge")


def _radial_integral(model, q, tol):
    """2 int over {sign Phi matches q} of |Phi(t)| dt, in u = t/(1+t)."""
    def phi_u(u):
        u = np.minimum(np.asarray(u, dtype=float), 1.0 - 1e-15)
        t = u / (1.0 - u)
        return _levi_radial(model, t) / (1.0 - u) ** 2

    grid = np.linspace(0.0, 1.0 - 1e-9, 4001)
    vals = phi_u(grid)
    roots = []
    for i in np.nonzero(vals[:-1] * vals[1:] < 0)[0]:
        roots.append(scipy.optimize.brentq(lambda u: float(phi_u([u])[0]), grid[i], grid[i + 1],
                                           xtol=1e-15, rtol=4 * np.finfo(float).eps))
    edges = [0.0] + roots + [1.0]
    want = 1.0 if q == 0 else -1.0
    total, err = [], 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        mid = float(phi_u([0.5 * (a + b)])[0])
        if np.sign(mid) != want:
            continue
        val, e = _composite_gauss(lambda u: np.abs(phi_u(u)), a, b, tol)
        total.append(val)
        err += e
    return MorseIntegral(2.0 * math.fsum(total), 2.0 * err, tuple(u / (1 - u) for u in roots))


def _box_integral(model, q, tol, max_depth=14, order=6):
    """Adaptive cells over a box chart, refined level by level.

    Cells whose quadrature nodes all share one sign are integrated directly.
    Cells straddling the stratum boundary are integrated with the indicator
    on a coarse and a fine tensor rule and split further until the summed
    disagreement over all straddling cells falls below ``tol``.
    """
    (x0, x1), (y0, y1) = model.chart.box
    want = 1.0 if q == 0 else -1.0
    rules = [np.polynomial.legendre.leggauss(order), np.polynomial.legendre.leggauss(2 * order)]

    def evaluate(cells, rule):
        gx, wx = rule
        m = len(gx)
        lo, hi = cells[:, [0, 2]], cells[:, [1, 3]]
        half = 0.5 * (hi - lo)
        xs = lo[:, 0, None] + half[:, 0, None] * (gx[None, :] + 1)
        ys = lo[:, 1, None] + half[:, 1, None] * (gx[None, :] + 1)
        z = (xs[:, :, None] + 1j * ys[:, None, :]).reshape(-1, 1)
        phi = geo.levi_form(model, z)[:, 0, 0].real.reshape(len(cells), m * m)
        ww = (wx[:, None] * wx[None, :]).reshape(-1)[None, :] * (half[:, 0] * half[:, 1])[:, None]
        return np.sum(ww * np.abs(phi) * (np.sign(phi) == want), axis=1), np.sign(phi)

    cells = np.array([[x0, x1, y0, y1]])
    pieces, err = [], 0.0
    for depth in range(max_depth + 1):
        coarse, signs = evaluate(cells, rules[0])
        fine, _ = evaluate(cells, rules[1])
        uniform = np.all(signs == signs[:, :1], axis=1)
        diff = (2 / math.pi) * np.abs(fine - coarse)
        done = uniform | (float(np.sum(diff[~uniform])) <= tol)
        pieces.extend(fine[done].tolist())
        err += float(np.sum(diff[done]))
        if np.all(done):
            break
        rest = cells[~done]
        mx, my = 0.5 * (rest[:, 0] + rest[:, 1]), 0.5 * (rest[:, 2] + rest[:, 3])
        cells = np.concatenate([
            np.stack([rest[:, 0], mx, rest[:, 2], my], 1), np.stack([mx, rest[:, 1], rest[:, 2], my], 1),
            np.stack([rest[:, 0], mx, my, rest[:, 3]], 1), np.stack([mx, rest[:, 1], my, rest[:, 3]], 1)])
    else:
        raise QuadratureNotConverged("stratum boundary cells did not resolve")
    return MorseIntegral((2 / math.pi) * math.fsum(pieces), err)


RADIAL_TOL = 1e-10
BOX_TOL = 1e-6


def morse_integral(model: geo.ModelGeometry, q: int, tol: Optional[float] = None) -> MorseIntegral:
    """I_q = (2 pi)^{-n} int_{M(q)} |det Rdot| dv for a compact n = 1 family.

    ``tol`` defaults to 1e-10 for radial weights and 1e-6 for box charts.
    """
    _require_compact(model)
    if q not in (0, 1):
        raise ValueError("form degree must be 0 or 1 for n = 1")
    if model.radial:
        return _radial_integral(model, q, tol or RADIAL_TOL)
    if model.chart.box is not None:
        return _box_integral(model, q, tol or BOX_TOL)
    raise UnsupportedFamily("stratum integrals need a radial weight or a box chart")


def exact_dims(model: geo.ModelGeometry, k: int) -> dict:
    """{q: dim H^q(M, L^k)} from closed-form counts."""
    if model.family == "cp1_fs":
        m = k * model.params["sign"]
        return {0: max(m + 1, 0), 1: max(-m - 1, 0)}
    if model.family == "torus":
        m = k * model.params["degree"]
        if m == 0:
            return {0: 1, 1: 1}
        return {0: max(m, 0), 1: max(-m, 0)}
    raise MissingDims(f"no closed-form section counts for {model.family}")


def morse_report(model: geo.ModelGeometry, k_list=(), tol: Optional[float] = None) -> MorseReport:
    ints = [morse_integral(model, q, tol) for q in range(model.n + 1)]
    dims = {}
    for k in k_list:
        try:
            dims[int(k)] = exact_dims(model, int(k))
        except MissingDims:
            pass
    return MorseReport(model, tuple(i.value for i in ints), float(model.chern_number),
                       dims, math.fsum(i.error for i in ints))


@dataclass(frozen=True)
class MorseCheck:
    q: int
    k: int
    dim: int
    leading: float          # k^n I_q
    lower: float            # k^n (I_q - I_{q-1} - I_{q+1})
    alternating: float      # k^n sum_{j<=q} (-1)^{q-j} I_j
    alternating_dims: int   # sum_{j<=q} (-1)^{q-j} dim H^j
    slack: float

    @property
    def weak_margin(self) -> float:
        return self.leading - self.dim

    @property
    def lower_margin(self) -> float:
        return self.dim - self.lower

    @property
    def strong_margin(self) -> float:
        return self.alternating - self.alternating_dims

    @property
    def holds(self) -> bool:
        return min(self.weak_margin, self.lower_margin, self.strong_margin) >= -self.slack


def strong_morse_check(model: geo.ModelGeometry, q: int, k: int, dims: Optional[dict] = None,
                       report: Optional[MorseReport] = None, slack_coeff: float = 2.0) -> MorseCheck:
    """Both sides of the weak, lower and alternating Morse inequalities at a given k.

    ``slack`` = slack_coeff * k^{n-1} absorbs the o(k^n) remainder.
    """
    n = model.n
    if dims is None:
        dims = exact_dims(model, k)
    if any(j not in dims for j in range(q + 1)):
        raise MissingDims(f"section counts for degrees 0..{q} are required")
    report = report or morse_report(model)
    integ = list(report.q_integrals)

    def i_at(j):
        return integ[j] if 0 <= j <= n else 0.0

    kn = float(k) ** n
    alt = math.fsum((-1) ** (q - j) * i_at(j) for j in range(q + 1))
    alt_dims = sum((-1) ** (q - j) * dims[j] for j in range(q + 1))
    return MorseCheck(q, int(k), int(dims[q]), kn * i_at(q), kn * (i_at(q) - i_at(q - 1) - i_at(q + 1)),
                      kn * alt, int(alt_dims), slack_coeff * float(k) ** (n - 1))


@dataclass(frozen=True)
class VanishingRow:
    k: int
    q: int
    dim: int
    leading: float

    @property
    def ratio(self) -> float:
        return self.dim / self.leading if self.leading else float("nan")


def signature_index(model: geo.ModelGeometry, samples: int = 64) -> int:
    """Number of negative curvature directions, checked to be constant on sample points."""
    rng = np.random.default_rng(0)
    if model.chart.box is not None:
        (x0, x1), (y0, y1) = model.chart.box
        z = rng.uniform(x0, x1, samples) + 1j * rng.uniform(y0, y1, samples)
    else:
        z = 3.0 * (rng.standard_normal(samples) + 1j * rng.standard_normal(samples))
    counts = set()
    for p in z:
        _, stratum = geo.classify_stratum(model, np.array([p]))
        if stratum.degenerate:
            raise UnsupportedFamily("curvature degenerates at a sample point")
        counts.add(stratum.q)
    if len(counts) != 1:
        raise UnsupportedFamily("curvature signature is not constant")
    return counts.pop()


def vanishing_check(model: geo.ModelGeometry, q: int, k_list, report: Optional[MorseReport] = None):
    """Section counts against k^n I_q for a constant-signature model.

    For q different from the signature index the counts must vanish; for q
    equal to it the ratio dim / (k^n I_q) should tend to 1.
    """
    neg = signature_index(model)
    report = report or morse_report(model)
    rows = []
    for k in k_list:
        dims = exact_dims(model, int(k))
        lead = float(k) ** model.n * report.q_integrals[q]
        rows.append(VanishingRow(int(k), q, int(dims[q]), lead))
    return neg, rows
