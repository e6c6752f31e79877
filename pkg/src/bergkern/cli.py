"""Manifest-driven command line front end.

    bergkern --manifest run.yaml [--out PATH] [--format csv|json] [--threads N] [--seed S]

Exit status: 0 on success, 2 for manifest errors (with line/column), 3 for
numerical failures (with the failing operation named).  Outputs are written
atomically and carry the tool version and the SHA-256 of the manifest bytes.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import warnings
from dataclasses import replace

import numpy as np

from . import __version__
from . import coeffs as cf
from . import exact as ex
from . import geometry as geo
from . import heat as ht
from . import manifest as mf
from . import morse as mo
from .errors import (EmptyRegimeWarning, JetOrderTooLow, ManifestError, MissingDims, NotNormalForm,
                     NumericalError, UnsupportedFamily)

SCHEMA_VERSION = 1


class _Stage:
    """Name of the operation currently running, for error messages."""

    name = "setup"


# -- encoding -----------------------------------------------------------------

def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": _plain(float(x.real)), "im": _plain(float(x.imag))}
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x) + 0.0
        return x if math.isfinite(x) else None
    if isinstance(x, geo.Stratum):
        return str(x)
    return x


def _point(z):
    return [{"re": float(c.real), "im": float(c.imag)} for c in np.atleast_1d(z)]


def _coords(name, z):
    z = np.atleast_1d(z)
    out = {f"re_{name}{j + 1}": float(c.real) for j, c in enumerate(z)}
    out.update({f"im_{name}{j + 1}": float(c.imag) for j, c in enumerate(z)})
    return out


def _flatten(rec, prefix=""):
    out = {}
    if isinstance(rec, dict):
        for k, v in rec.items():
            out.update(_flatten(v, f"{prefix}.{k}" if prefix else str(k)))
    elif isinstance(rec, list):
        for i, v in enumerate(rec):
            out.update(_flatten(v, f"{prefix}.{i}"))
    else:
        out[prefix] = rec
    return out


def _provenance(man, command):
    return {"tool": "bergkern", "version": __version__, "schema_version": SCHEMA_VERSION,
            "manifest_sha256": man.digest, "command": command}


def render(man, records, fmt) -> str:
    prov = _provenance(man, man.command)
    records = _plain(records)
    if fmt == "json":
        doc = dict(prov, results=records)
        return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"
    flat = [_flatten(r) for r in records]
    header = []
    for r in flat:
        header.extend(k for k in r if k not in header)
    buf = io.StringIO()
    buf.write("# " + " ".join(f"{k}={v}" for k, v in prov.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in flat:
        w.writerow(["" if r.get(k) is None else (repr(r[k]) if isinstance(r[k], float) else r[k]) for k in header])
    return buf.getvalue()


def render_curve(man, columns, rows) -> str:
    buf = io.StringIO()
    prov = _provenance(man, man.command)
    buf.write("# " + " ".join(f"{k}={v}" for k, v in prov.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for x, y in rows:
        w.writerow([x if isinstance(x, (int, np.integer)) else repr(float(x)), repr(float(y))])
    return buf.getvalue()


def atomic_write(path, text):
    path = os.path.abspath(path)
    folder = os.path.dirname(path)
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".bergkern-", dir=folder)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# -- commands -----------------------------------------------------------------

def _quad(man, threads):
    q = man.tolerances.quadrature
    return ex.QuadratureSpec(epsrel=q if q is not None else ex.DEFAULT_QUAD.epsrel, threads=threads)


def _stage(name):
    _Stage.name = name


def cmd_describe(man, ctx):
    geom, tau = man.geometry, man.tolerances.degeneracy
    records = []
    for z in man.points:
        _stage(f"curvature_report at {complex(z[0]) if geom.n == 1 else z.tolist()}")
        rep = geo.curvature_report(geom, z, tau=tau, require_positive=False)
        rec = rep.as_dict()
        rec["point"] = _point(z)
        if geom.derivative_mode == "finite_difference":
            ref = geo.curvature_report(geom.with_mode("exact_closed_form"), z, tau=tau, require_positive=False)
            gap = _report_gap(rep, ref)
            rec["derivative_discrepancy"] = gap
            if gap > man.tolerances.derivative:
                raise NumericalError(f"finite-difference curvature differs from exact jets by {gap:.3g}")
        records.append(rec)
    return records, {}


def _report_gap(a, b):
    gaps = [float(np.max(np.abs(a.rdot - b.rdot)) / max(1.0, float(np.max(np.abs(b.rdot)))))]
    for f in ("r", "r_hat"):
        x, y = getattr(a, f), getattr(b, f)
        if x is not None and y is not None:
            gaps.append(abs(x - y) / max(1.0, abs(y)))
    return max(gaps)


def cmd_coeffs(man, ctx):
    geom, tau = man.geometry, man.tolerances.degeneracy
    records = []
    for z in man.points:
        _stage(f"coefficient_set at {z.tolist()}")
        _, stratum = geo.classify_stratum(geom, z, tau)
        rec = {"point": _point(z), "stratum": str(stratum)}
        if stratum.degenerate:
            rec.update(b0=0.0, method="closed_form")
            records.append(rec)
            continue
        cs = cf.coefficient_set(geom, z, q=stratum.q, tau=tau)
        rec.update(cs.as_record())
        rec["point"] = _point(z)
        rec["stationary_phase"] = None
        if stratum.q == 0 and np.allclose(z, 0):
            _stage("stationary-phase recursion at the origin")
            try:
                sp = cf.stationary_phase_set(geom)
                rec["stationary_phase"] = {"b0": sp.b0, "b1": sp.b1, "b2": sp.b2}
            except (NotNormalForm, JetOrderTooLow) as exc:
                rec["stationary_phase_skipped"] = str(exc)
        records.append(rec)
    return records, {}


def cmd_exact(man, ctx):
    geom, quad = man.geometry, ctx["quad"]
    records, curves = [], {}
    for k in man.k_list:
        _stage(f"evaluate_kernel k={k}")
        ev = ex.evaluate_kernel(geom, k, man.points, quad, pairs=man.pairs)
        for i, (z, v) in enumerate(zip(ev.points, ev.values)):
            try:
                closed = ex.closed_form_kernel(geom, k, z)
            except UnsupportedFamily:
                closed = None
            records.append({"kind": "diagonal", **_coords("z", z), "P_k": float(v), "k": k,
                            "P_k_over_kn": float(v) / k ** geom.n, "closed_form": closed,
                            "cond": ev.cond, "dim": ev.quadrature_meta.get("dim"),
                            "error_estimate": ev.quadrature_meta.get("error_estimate")})
            curves.setdefault(f"kernel_point{i}", (("k", "P_k"), []))[1].append((k, v))
        if ev.offdiag_values is not None:
            rows = []
            for (z, w), m in zip(man.pairs, ev.offdiag_values):
                d = float(np.linalg.norm(z - w))
                records.append({"kind": "offdiagonal", **_coords("z", z), **_coords("w", w), "k": k,
                                "distance": d, "modulus": float(m), "cond": ev.cond})
                rows.append((d, m))
            curves[f"offdiag_k{k}"] = (("distance", "modulus"), sorted(rows))
    return records, curves


def cmd_compare(man, ctx):
    geom, quad, tau = man.geometry, ctx["quad"], man.tolerances.degeneracy
    records, curves = [], {}
    for i, z in enumerate(man.points):
        _stage(f"coefficient_set at {z.tolist()}")
        cs = cf.coefficient_set(geom, z, q=0, tau=tau)
        if cs.b1 is None:
            raise NumericalError("compare needs a point where the curvature is positive")
        _stage(f"expansion_fit at {z.tolist()}")
        fit = ex.expansion_fit(geom, man.k_list, z, cs, quad=quad)
        rec = {"point": _point(z)}
        rec.update(fit.as_dict())
        records.append(rec)
        curves[f"residual_point{i}"] = (("k", "residual"), list(zip(fit.k_list, fit.residuals)))
        curves[f"kernel_point{i}"] = (("k", "P_k"), list(zip(fit.k_list, fit.values)))
    return records, curves


def _heat_queries(spec, rng):
    if spec.random_draws:
        out = []
        lo, hi = spec.random_t
        for i in range(spec.random_draws):
            eig = tuple(float(a) for a in rng.uniform(-spec.random_scale, spec.random_scale, spec.random_n))
            t = float(rng.uniform(lo, hi))
            q = int(rng.integers(0, spec.random_n + 1))
            out.append(ht.HeatDensityQuery(eig, t, q, spec.k))
        return out
    return [ht.HeatDensityQuery(e, t, q, spec.k)
            for e in spec.eigenvalues for t in spec.t for q in spec.q if q <= len(e)]


def cmd_heat(man, ctx):
    _stage("heat_trace_density")
    queries = _heat_queries(man.heat, np.random.default_rng(ctx["seed"]))
    c = ht.heat_constant_C()
    records = []
    for qry in queries:
        dens = ht.heat_trace_density(qry)
        bound = None
        if qry.t > 1:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", EmptyRegimeWarning)
                bound = ht.degeneracy_bound(qry.eigenvalues, qry.t, qry.q) * qry.k ** qry.n
        records.append({"eigenvalues": list(qry.eigenvalues), "t": qry.t, "q": qry.q, "k": qry.k,
                        "density": dens, "bound": bound, "C": c,
                        "bound_holds": None if bound is None or qry.t <= c else bool(dens <= bound),
                        "large_time_limit": ht.large_time_limit(qry.eigenvalues, qry.q) * qry.k ** qry.n})
    return records, {}


def cmd_morse(man, ctx):
    geom = man.geometry
    _stage("morse_integral")
    rep = mo.morse_report(geom, man.k_list, tol=man.tolerances.quadrature)
    records = [dict(kind="integrals", **rep.as_dict(), rr_defect=rep.rr_defect)]
    curves = {}
    for k in man.k_list:
        _stage(f"strong_morse_check k={k}")
        try:
            dims = mo.exact_dims(geom, k)
        except MissingDims:
            continue
        for q in range(geom.n + 1):
            chk = mo.strong_morse_check(geom, q, k, dims, rep)
            records.append({"kind": "check", "k": k, "q": q, "dim": chk.dim, "leading": chk.leading,
                            "lower": chk.lower, "alternating": chk.alternating,
                            "alternating_dims": chk.alternating_dims, "weak_margin": chk.weak_margin,
                            "lower_margin": chk.lower_margin, "strong_margin": chk.strong_margin,
                            "slack": chk.slack, "holds": chk.holds,
                            "ratio": chk.dim / chk.leading if chk.leading else None})
            if chk.leading:
                curves.setdefault(f"ratio_q{q}", (("k", "dim_over_leading"), []))[1].append(
                    (k, chk.dim / chk.leading))
    if man.k_list:
        _stage("vanishing_check")
        try:
            neg = mo.signature_index(geom)
        except UnsupportedFamily:
            neg = None
        if neg is not None:
            records.append({"kind": "signature", "negative_directions": neg,
                            "vanishing_degrees": [q for q in range(geom.n + 1) if q != neg]})
    return records, curves


COMMAND_TABLE = {"describe": cmd_describe, "coeffs": cmd_coeffs, "exact": cmd_exact,
                 "compare": cmd_compare, "heat": cmd_heat, "morse": cmd_morse}


# -- entry point --------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="bergkern", description="Bergman kernel model computations")
    p.add_argument("--manifest", required=True, help="YAML run manifest")
    p.add_argument("--out", help="output path (overrides output.path)")
    p.add_argument("--format", choices=mf.FORMATS, help="output format (overrides output.format)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for quadrature")
    p.add_argument("--seed", type=int, default=0, help="seed for randomly drawn test corpora")
    return p


def run(man, out=None, fmt=None, threads=1, seed=0, stdout=None):
    """Execute a validated manifest and write its artifacts; returns the rendered main output."""
    if threads < 1:
        raise ManifestError("--threads must be at least 1")
    output = replace(man.output, path=out or man.output.path, format=fmt or man.output.format)
    if output.plot_data and not output.path:
        raise ManifestError("plot_data needs an output path")
    ctx = {"quad": _quad(man, threads), "seed": seed}
    records, curves = COMMAND_TABLE[man.command](man, ctx)
    text = render(man, records, output.format)
    if output.path:
        atomic_write(output.path, text)
        if output.plot_data:
            stem = os.path.splitext(output.path)[0]
            for name, (cols, rows) in sorted(curves.items()):
                atomic_write(f"{stem}.plot/{name}.csv", render_curve(man, cols, rows))
    else:
        (stdout or sys.stdout).write(text)
    return text


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    _Stage.name = "setup"
    try:
        man = mf.load(args.manifest)
        run(man, args.out, args.format, args.threads, args.seed)
    except ManifestError as exc:
        print(f"bergkern: manifest error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"bergkern: numerical error in {_Stage.name}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
