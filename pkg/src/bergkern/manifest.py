"""Run manifests: YAML documents validated into a :class:`RunManifest`.

Every validation failure raises :class:`ManifestError` carrying the line and
column (1-based) of the offending YAML node.

Layout::

    command: compare            # describe | coeffs | exact | compare | heat | morse
    geometry:
      family: cp1_fs            # fock | cp1_fs | torus | chart_expression
      n: 1
      params: {eps: 0.0, sigma: 1.0, sign: 1}
      derivative_mode: exact_closed_form
      chart: {radius: .inf}     # or {box: [[x0, x1], [y0, y1]]}
    points: [0.3, [0.1, 0.2]]   # coordinates are numbers, [re, im] pairs or "a+bj" strings
    # points: {grid: {re: [-1, 1, 5], im: [0, 0, 1]}}
    pairs: [[0.1, 0.2]]         # (z, w) pairs for off-diagonal moduli (exact command)
    k_list: {from: 10, to: 80, step: 10}
    tolerances: {quadrature: 1e-13, derivative: 1e-5, degeneracy: 1e-8}
    heat: {eigenvalues: [[1.0], [0.5, -2.0]], t: [2.0, 5.0], q: [0]}
    output: {format: json, path: out.json, plot_data: false}
"""
from __future__ import annotations

import hashlib
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from . import expr as _expr
from . import geometry as geo
from .errors import ManifestError

COMMANDS = ("describe", "coeffs", "exact", "compare", "heat", "morse")
FORMATS = ("csv", "json")

_FAMILY_PARAMS = {
    "fock": {"lam"},
    "cp1_fs": {"eps", "sigma", "sign"},
    "torus": {"degree", "tau_im", "eps"},
    "chart_expression": {"phi", "theta"},
}


@dataclass(frozen=True)
class Tolerances:
    quadrature: Optional[float] = None
    derivative: float = 1e-5
    degeneracy: float = geo.DEFAULT_TAU


@dataclass(frozen=True)
class OutputSpec:
    format: str = "json"
    path: Optional[str] = None
    plot_data: bool = False


@dataclass(frozen=True)
class HeatSpec:
    eigenvalues: tuple = ()
    t: tuple = ()
    q: tuple = (0,)
    k: float = 1.0
    random_draws: int = 0
    random_n: int = 1
    random_scale: float = 3.0
    random_t: tuple = (1.6, 10.0)


@dataclass(frozen=True, eq=False)
class RunManifest:
    command: str
    geometry: Optional[geo.ModelGeometry]
    geometry_section: dict
    points: np.ndarray
    pairs: Optional[np.ndarray]
    k_list: tuple
    tolerances: Tolerances
    output: OutputSpec
    heat: Optional[HeatSpec]
    digest: str
    source: dict = field(default_factory=dict, repr=False)


class _Marks:
    """Line/column lookup for paths into the composed YAML tree."""

    def __init__(self, root):
        self.marks = {}
        self._walk(root, ())

    def _walk(self, node, path):
        self.marks[path] = node.start_mark
        if isinstance(node, yaml.MappingNode):
            for key, val in node.value:
                self.marks[path + (("key", key.value),)] = key.start_mark
                self._walk(val, path + (key.value,))
        elif isinstance(node, yaml.SequenceNode):
            for i, val in enumerate(node.value):
                self._walk(val, path + (i,))

    def error(self, path, message):
        for cut in range(len(path), -1, -1):
            mark = self.marks.get(tuple(path[:cut]))
            if mark is not None:
                return ManifestError(message, mark.line + 1, mark.column + 1)
        return ManifestError(message)


def load(path) -> RunManifest:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest: {exc}") from None
    return loads(raw)


def loads(raw) -> RunManifest:
    if isinstance(raw, str):
        raw = raw.encode()
    digest = hashlib.sha256(raw).hexdigest()
    text = raw.decode("utf-8", errors="replace")
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        raise ManifestError(f"YAML syntax error: {exc.problem}",
                            None if mark is None else mark.line + 1,
                            None if mark is None else mark.column + 1) from None
    except yaml.YAMLError as exc:
        raise ManifestError(f"YAML error: {exc}") from None
    if node is None or not isinstance(data, dict):
        raise ManifestError("manifest must be a mapping", 1, 1)
    return _Validator(data, _Marks(node), digest).build()


class _Validator:
    def __init__(self, data, marks, digest):
        self.data, self.marks, self.digest = data, marks, digest

    def fail(self, path, message):
        raise self.marks.error(path, message)

    def unknown_keys(self, mapping, allowed, path):
        for key in mapping:
            if key not in allowed:
                raise self.marks.error(tuple(path) + (("key", key),), f"unknown key {key!r}")

    def number(self, value, path, positive=False, integer=False):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            if isinstance(value, str):
                try:
                    value = float(value)
                except ValueError:
                    self.fail(path, f"expected a number, got {value!r}")
            else:
                self.fail(path, f"expected a number, got {value!r}")
        if integer and float(value) != int(value):
            self.fail(path, f"expected an integer, got {value!r}")
        if not (integer or math.isfinite(value) or value == math.inf):
            self.fail(path, "number must be finite")
        if positive and not value > 0:
            self.fail(path, f"expected a positive value, got {value!r}")
        return int(value) if integer else float(value)

    def build(self) -> RunManifest:
        d = self.data
        self.unknown_keys(d, {"command", "geometry", "points", "pairs", "k_list", "tolerances", "heat",
                              "output"}, ())
        command = d.get("command")
        if command not in COMMANDS:
            self.fail(("command",), f"command must be one of {', '.join(COMMANDS)}")
        tol = self.tolerances(d.get("tolerances") or {})
        out = self.output(d.get("output") or {})
        geom, section = None, {}
        if command != "heat" or "geometry" in d:
            if "geometry" not in d:
                self.fail((), "geometry section is required")
            geom, section = self.geometry(d["geometry"])
        needs_points = command in ("describe", "coeffs", "exact", "compare")
        points = self.points(d.get("points"), geom, required=needs_points)
        pairs = self.pairs(d["pairs"], geom) if "pairs" in d else None
        needs_k = command in ("exact", "compare")
        k_list = self.k_list(d.get("k_list"), required=needs_k)
        if command == "compare" and len(k_list) < 3:
            self.fail(("k_list",), "compare needs at least three tensor powers")
        heat = self.heat(d.get("heat")) if command == "heat" else None
        return RunManifest(command, geom, section, points, pairs, k_list, tol, out, heat, self.digest, d)

    # -- sections ------------------------------------------------------------

    def tolerances(self, t):
        p = ("tolerances",)
        if not isinstance(t, dict):
            self.fail(p, "tolerances must be a mapping")
        self.unknown_keys(t, {"quadrature", "derivative", "degeneracy"}, p)
        kw = {k: self.number(v, p + (k,), positive=True) for k, v in t.items()}
        return Tolerances(**kw)

    def output(self, o):
        p = ("output",)
        if not isinstance(o, dict):
            self.fail(p, "output must be a mapping")
        self.unknown_keys(o, {"format", "path", "plot_data"}, p)
        fmt = o.get("format", "json")
        if fmt not in FORMATS:
            self.fail(p + ("format",), "format must be csv or json")
        path = o.get("path")
        if path is not None and not isinstance(path, str):
            self.fail(p + ("path",), "path must be a string")
        plot = o.get("plot_data", False)
        if not isinstance(plot, bool):
            self.fail(p + ("plot_data",), "plot_data must be true or false")
        return OutputSpec(fmt, path, plot)

    def geometry(self, g):
        p = ("geometry",)
        if not isinstance(g, dict):
            self.fail(p, "geometry must be a mapping")
        self.unknown_keys(g, {"family", "n", "params", "derivative_mode", "chart"}, p)
        fam = g.get("family")
        if fam not in geo.FAMILIES:
            self.fail(p + ("family",), f"family must be one of {', '.join(geo.FAMILIES)}")
        params = g.get("params") or {}
        if not isinstance(params, dict):
            self.fail(p + ("params",), "params must be a mapping")
        self.unknown_keys(params, _FAMILY_PARAMS[fam], p + ("params",))
        mode = g.get("derivative_mode", "exact_closed_form")
        if mode not in geo.DERIVATIVE_MODES:
            self.fail(p + ("derivative_mode",), f"derivative_mode must be one of {', '.join(geo.DERIVATIVE_MODES)}")
        chart = g.get("chart") or {}
        if not isinstance(chart, dict):
            self.fail(p + ("chart",), "chart must be a mapping")
        self.unknown_keys(chart, {"radius", "box"}, p + ("chart",))
        radius = self.number(chart["radius"], p + ("chart", "radius"), positive=True) if "radius" in chart else math.inf
        box = None
        if "box" in chart:
            box = self.box(chart["box"], p + ("chart", "box"))
        n = self.number(g.get("n", 1), p + ("n",), positive=True, integer=True)
        pp = p + ("params",)
        try:
            if fam == "fock":
                lam = params.get("lam", [1.0] * n)
                lam = [lam] if not isinstance(lam, list) else lam
                lam = [self.number(x, pp + ("lam",)) for x in lam]
                if len(lam) != n:
                    self.fail(pp + ("lam",), f"lam needs {n} entries")
                if any(x == 0 for x in lam):
                    self.fail(pp + ("lam",), "lam entries must be nonzero")
                geom = geo.fock(lam, mode)
            elif fam == "cp1_fs":
                self._dim_one(n, fam)
                sign = self.number(params.get("sign", 1), pp + ("sign",), integer=True)
                if sign not in (1, -1):
                    self.fail(pp + ("sign",), "sign must be +1 or -1")
                geom = geo.cp1_fs(self.number(params.get("eps", 0.0), pp + ("eps",)),
                                  self.number(params.get("sigma", 1.0), pp + ("sigma",), positive=True),
                                  sign, radius, mode)
            elif fam == "torus":
                self._dim_one(n, fam)
                geom = geo.torus(self.number(params.get("degree", 1), pp + ("degree",), integer=True),
                                 self.number(params.get("tau_im", 1.0), pp + ("tau_im",), positive=True),
                                 self.number(params.get("eps", 0.0), pp + ("eps",)), mode)
            else:
                phi = params.get("phi")
                if not isinstance(phi, str):
                    self.fail(pp + ("phi",), "chart_expression needs a phi expression string")
                theta = params.get("theta")
                if theta is not None and not isinstance(theta, str):
                    self.fail(pp + ("theta",), "theta must be an expression string")
                for which, src in (("phi", phi), ("theta", theta)):
                    if src is not None:
                        self.expression(src, n, pp + (which,))
                geom = geo.chart_expression(phi, n, theta, radius, box, mode)
        except (ValueError, TypeError) as exc:
            self.fail(p, f"invalid geometry: {exc}")
        return geom, g

    def expression(self, src, n, path):
        try:
            _expr.parse(src, n)
        except ManifestError as exc:
            mark = self.marks.marks.get(tuple(path))
            line = None if mark is None else mark.line + 1
            col = None if mark is None else mark.column + (exc.column or 1)
            raise ManifestError(f"expression error: {exc.args[0]}", line, col) from None

    def _dim_one(self, n, fam):
        if n != 1:
            self.fail(("geometry", "n"), f"{fam} has complex dimension 1")

    def box(self, b, path):
        if not isinstance(b, list) or not b or len(b) % 2:
            self.fail(path, "box must list [lo, hi] for each real coordinate")
        out = []
        for i, pair in enumerate(b):
            if not isinstance(pair, list) or len(pair) != 2:
                self.fail(path + (i,), "each box side must be [lo, hi]")
            lo, hi = (self.number(x, path + (i, j)) for j, x in enumerate(pair))
            if not lo < hi:
                self.fail(path + (i,), "box side needs lo < hi")
            out.append((lo, hi))
        return tuple(out)

    def coordinate(self, c, path):
        if isinstance(c, str):
            try:
                return complex(c.replace(" ", "").replace("i", "j"))
            except ValueError:
                self.fail(path, f"cannot read complex number {c!r}")
        if isinstance(c, list):
            if len(c) != 2:
                self.fail(path, "complex coordinates are [re, im]")
            return complex(self.number(c[0], path + (0,)), self.number(c[1], path + (1,)))
        return complex(self.number(c, path))

    def point(self, pt, n, path):
        if n == 1:
            return [self.coordinate(pt, path)]
        if not isinstance(pt, list) or len(pt) != n:
            self.fail(path, f"point needs {n} coordinates")
        return [self.coordinate(c, path + (i,)) for i, c in enumerate(pt)]

    def points(self, spec, geom, required):
        p = ("points",)
        n = 1 if geom is None else geom.n
        if spec is None:
            if required:
                self.fail((), "points are required for this command")
            return np.zeros((0, n), dtype=complex)
        if isinstance(spec, dict):
            self.unknown_keys(spec, {"grid"}, p)
            grid = spec.get("grid")
            axes_specs = grid if isinstance(grid, list) else [grid]
            if len(axes_specs) != n:
                self.fail(p + ("grid",), f"grid needs one axis spec per coordinate ({n})")
            axes = []
            for j, ax in enumerate(axes_specs):
                ap = p + ("grid",) + ((j,) if isinstance(grid, list) else ())
                if not isinstance(ax, dict):
                    self.fail(ap, "grid axis must be {re: [lo, hi, count], im: [lo, hi, count]}")
                self.unknown_keys(ax, {"re", "im"}, ap)
                parts = []
                for key in ("re", "im"):
                    r = ax.get(key, [0.0, 0.0, 1])
                    if not isinstance(r, list) or len(r) != 3:
                        self.fail(ap + (key,), "expected [lo, hi, count]")
                    lo, hi = self.number(r[0], ap + (key, 0)), self.number(r[1], ap + (key, 1))
                    cnt = self.number(r[2], ap + (key, 2), positive=True, integer=True)
                    parts.append(np.linspace(lo, hi, cnt))
                axes.append((parts[0][:, None] + 1j * parts[1][None, :]).reshape(-1))
            pts = np.array(list(itertools.product(*axes)), dtype=complex).reshape(-1, n)
            if geom is not None:
                pts = pts[geom.chart.contains(pts)]
            if len(pts) == 0:
                self.fail(p, "grid has no points inside the chart")
            return pts
        if not isinstance(spec, list) or not spec:
            self.fail(p, "points must be a non-empty list or a grid spec")
        pts = np.array([self.point(x, n, p + (i,)) for i, x in enumerate(spec)], dtype=complex)
        if geom is not None:
            inside = geom.chart.contains(pts)
            for i, ok in enumerate(inside):
                if not ok:
                    self.fail(p + (i,), "point lies outside the chart")
        return pts

    def pairs(self, spec, geom):
        p = ("pairs",)
        if geom is None or not isinstance(spec, list) or not spec:
            self.fail(p, "pairs must be a non-empty list of [z, w]")
        out = []
        for i, pr in enumerate(spec):
            if not isinstance(pr, list) or len(pr) != 2:
                self.fail(p + (i,), "each pair is [z, w]")
            out.append([self.point(x, geom.n, p + (i, j)) for j, x in enumerate(pr)])
        return np.array(out, dtype=complex)

    def k_list(self, spec, required):
        p = ("k_list",)
        if spec is None:
            if required:
                self.fail((), "k_list is required for this command")
            return ()
        if isinstance(spec, dict):
            self.unknown_keys(spec, {"from", "to", "step"}, p)
            if "from" not in spec or "to" not in spec:
                self.fail(p, "range needs from and to")
            lo = self.number(spec["from"], p + ("from",), integer=True)
            hi = self.number(spec["to"], p + ("to",), integer=True)
            step = self.number(spec.get("step", 1), p + ("step",), positive=True, integer=True)
            ks = list(range(lo, hi + 1, step))
            if lo <= 0:
                self.fail(p + ("from",), "tensor powers must be positive")
        elif isinstance(spec, list) and spec:
            ks = [self.number(k, p + (i,), integer=True) for i, k in enumerate(spec)]
            for i, k in enumerate(ks):
                if k <= 0:
                    self.fail(p + (i,), f"tensor power must be a positive integer, got {k}")
                if i and k <= ks[i - 1]:
                    self.fail(p + (i,), "k_list must be strictly increasing")
        else:
            self.fail(p, "k_list must be a list or {from, to, step}")
        if not ks:
            self.fail(p, "k_list is empty")
        return tuple(ks)

    def heat(self, h):
        p = ("heat",)
        if not isinstance(h, dict):
            self.fail(p, "heat command needs a heat section")
        self.unknown_keys(h, {"eigenvalues", "t", "q", "k", "random"}, p)
        k = self.number(h.get("k", 1), p + ("k",), positive=True)
        if k < 1:
            self.fail(p + ("k",), "k must be at least 1")
        qs = h.get("q", [0])
        qs = qs if isinstance(qs, list) else [qs]
        qs = tuple(self.number(q, p + ("q", i), integer=True) for i, q in enumerate(qs))
        if "random" in h:
            r = h["random"]
            rp = p + ("random",)
            if not isinstance(r, dict):
                self.fail(rp, "random must be a mapping")
            self.unknown_keys(r, {"draws", "n", "scale", "t"}, rp)
            t_rng = r.get("t", [1.6, 10.0])
            if not isinstance(t_rng, list) or len(t_rng) != 2:
                self.fail(rp + ("t",), "t range is [lo, hi]")
            lo, hi = (self.number(x, rp + ("t", i), positive=True) for i, x in enumerate(t_rng))
            return HeatSpec(q=qs, k=k,
                            random_draws=self.number(r.get("draws", 100), rp + ("draws",), positive=True, integer=True),
                            random_n=self.number(r.get("n", 1), rp + ("n",), positive=True, integer=True),
                            random_scale=self.number(r.get("scale", 3.0), rp + ("scale",), positive=True),
                            random_t=(lo, hi))
        eigs = h.get("eigenvalues")
        if not isinstance(eigs, list) or not eigs:
            self.fail(p + ("eigenvalues",), "eigenvalues must be a non-empty list of vectors")
        vecs = []
        for i, e in enumerate(eigs):
            e = e if isinstance(e, list) else [e]
            vecs.append(tuple(self.number(x, p + ("eigenvalues", i)) for x in e))
        ts = h.get("t")
        ts = ts if isinstance(ts, list) else [ts]
        ts = tuple(self.number(t, p + ("t", i), positive=True) for i, t in enumerate(ts))
        return HeatSpec(tuple(vecs), ts, qs, k)
