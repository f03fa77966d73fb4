"""Batch front-end: ``rankzero {legendre,tdelta,weyl,cayley}``.

Settings come from, in increasing priority: built-in defaults, a JSON file given
with ``--config``, command-line flags.  Every run writes a table (CSV) or a
report (JSON) and exits 0 only if every certified inequality in it held.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import cayley, orthopoly, sphere_ops, weyl

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_SIZE_LIMIT = 3
EXIT_NO_CONVERGENCE = 4
EXIT_PRECONDITION = 5


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "common": {"out": None, "format": "csv", "seed": 0, "threads": 1, "bound_scale": 1.0},
    "legendre": {
        "d": 2,
        "n_max": 1000,
        "bernstein_points": 2001,
        "delta_grid": "-1:1:0.02",
        "n_cut": 10000,
    },
    "tdelta": {
        "d": 2,
        "delta_grid": "-1:1:0.02",
        "n_cut": 10000,
        "p_list": "6,8,12",
        "schatten_deltas": "0.04:0.4:0.04",
        "schatten_n_cut": 100000,
        "slope_tol": 0.05,
        "s4_delta": 0.3,
        "s4_cuts": "100,1000,10000",
        "threshold_dims": "2,3,4",
    },
    "weyl": {
        "grid_points": 20,
        "m_range": "2:40",
        "seeds": 100,
        "pair": None,
    },
    "cayley": {
        "moduli": "2,3",
        "export_mtx": None,
        "max_vertices": cayley.DEFAULT_MAX_VERTICES,
        "tolerance": 1e-8,
    },
}


def parse_range(text: str) -> np.ndarray:
    """'start:stop:step' with stop included, e.g. '0:1:0.01' -> 101 points."""
    try:
        start, stop, step = (float(x) for x in str(text).split(":"))
    except ValueError:
        raise ConfigError(f"expected start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"bad range {text!r}")
    count = int(round((stop - start) / step)) + 1
    return np.round(np.linspace(start, stop, count), 12)


def parse_list(text, cast=float) -> list:
    if isinstance(text, (list, tuple)):
        return [cast(x) for x in text]
    try:
        return [cast(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list, got {text!r}") from None


def parse_point(text) -> weyl.WeylPoint:
    vals = parse_list(text) if not isinstance(text, weyl.WeylPoint) else list(text)
    if len(vals) != 3:
        raise ConfigError(f"a chamber point needs three coordinates, got {text!r}")
    try:
        return weyl.WeylPoint(*vals)
    except orthopoly.DomainError as exc:
        raise ConfigError(str(exc)) from None


def _csv(rows, fields) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(cfg, report: dict, tables: dict[str, tuple[list, list]], main: str):
    """Write the report as JSON, or ``main`` as CSV with other tables beside it."""
    out = cfg["out"]
    if cfg["format"] == "json":
        doc = dict(report)
        doc["tables"] = {name: rows for name, (rows, _) in tables.items()}
        text = json.dumps(_jsonable(doc), indent=2) + "\n"
        _write(out, text)
        return
    rows, fields = tables[main]
    _write(out, _csv(rows, fields))
    if out:
        base = Path(out)
        for name, (rows, fields) in tables.items():
            if name != main:
                _write(base.with_name(f"{base.stem}.{name}{base.suffix or '.csv'}"), _csv(rows, fields))


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _summary(cmd, checks):
    for c in checks:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"[{status}] {cmd}: {c['name']} - {c['detail']}", file=sys.stderr)
    return all(c["passed"] for c in checks)


def cmd_legendre(cfg) -> int:
    scale = float(cfg["bound_scale"])
    d = int(cfg["d"])
    fam = orthopoly.family(d)
    deltas = parse_range(cfg["delta_grid"])
    n_cut = int(cfg["n_cut"])
    if np.any(np.abs(deltas) > 1) or n_cut < 1:
        raise ConfigError("delta grid must lie in [-1, 1] and n_cut >= 1")
    checks = []
    report = {"schema_version": SCHEMA_VERSION, "command": "legendre", "family": str(fam)}

    if d == 2:
        m = int(cfg["bernstein_points"])
        grid = np.linspace(-0.999, 0.999, m)
        rep = orthopoly.check_bernstein(int(cfg["n_max"]), grid, scale=scale)
        checks.append({
            "name": "bernstein",
            "passed": rep.passed,
            "detail": f"n<={rep.n_max}, {m} points, worst slack {rep.worst_slack:.3e} at n={rep.worst_n}, "
                      f"x={rep.worst_x:.6g}, {len(rep.violations)} violations",
        })
        report["bernstein"] = {
            "n_max": rep.n_max, "grid_size": m, "worst_slack": rep.worst_slack,
            "worst_n": rep.worst_n, "worst_x": rep.worst_x, "violations": rep.violations[:50],
        }

    sup, tail = orthopoly.holder_sup_many(fam, deltas, n_cut)
    rows = []
    for x, s, t in zip(deltas, sup, tail):
        bound = scale * 2.0 * math.sqrt(abs(x))
        cert = max(s, t)
        rows.append({
            "delta": float(x), "n_cut": n_cut, "sup_value": float(s), "tail_bound": float(t),
            "certified": float(cert), "bound": bound, "holds": bool(cert <= bound + 1e-12),
        })
    bad = [r["delta"] for r in rows if not r["holds"]]
    checks.append({
        "name": "holder_half",
        "passed": not bad,
        "detail": f"{len(rows)} deltas, n_cut={n_cut}, failing deltas: {bad[:10]}",
    })
    report["checks"] = checks
    report["passed"] = _summary("legendre", checks)
    fields = ["delta", "n_cut", "sup_value", "tail_bound", "certified", "bound", "holds"]
    _emit(cfg, report, {"holder": (rows, fields)}, "holder")
    return EXIT_OK if report["passed"] else EXIT_FAILED


def cmd_tdelta(cfg) -> int:
    scale = float(cfg["bound_scale"])
    d = int(cfg["d"])
    checks = []
    report = {"schema_version": SCHEMA_VERSION, "command": "tdelta", "d": d}

    deltas = parse_range(cfg["delta_grid"])
    n_cut = int(cfg["n_cut"])
    if np.any(np.abs(deltas) > 1):
        raise ConfigError("operator-norm deltas must lie in [-1, 1]")
    sup, tail = orthopoly.holder_sup_many(orthopoly.family(d), deltas, n_cut)
    op_rows = []
    for x, s, t in zip(deltas, sup, tail):
        row = {"delta": float(x), "n_cut": n_cut, "value": float(s), "certified_upper": float(max(s, t))}
        if d == 2:
            row["bound"] = scale * 2.0 * math.sqrt(abs(x))
            row["holds"] = bool(row["certified_upper"] <= row["bound"] + 1e-12)
        op_rows.append(row)
    if d == 2:
        bad = [r["delta"] for r in op_rows if not r["holds"]]
        checks.append({"name": "opnorm_2sqrt", "passed": not bad,
                       "detail": f"{len(op_rows)} deltas, failing: {bad[:10]}"})

    p_list = parse_list(cfg["p_list"])
    s_deltas = parse_range(cfg["schatten_deltas"])
    if np.any(np.abs(s_deltas) > 0.5) or np.any(s_deltas == 0):
        raise ConfigError("Schatten deltas must be nonzero with |delta| <= 1/2")
    est = sphere_ops.schatten_sweep(d, p_list, s_deltas, int(cfg["schatten_n_cut"]))
    sch_rows = [e.row() for e in est]
    fit_rows = []
    tol = float(cfg["slope_tol"]) * scale
    for p in p_list:
        sub = [e for e in est if e.p == p]
        expected = 0.5 - 2.0 / p
        row = {"p": p, "expected": expected, "slope": None, "passed": False}
        if all(e.convergent for e in sub) and len(sub) >= 2:
            row["slope"] = sphere_ops.fit_delta_exponent(sub)
            row["passed"] = abs(row["slope"] - expected) <= tol
        fit_rows.append(row)
        checks.append({"name": f"schatten_slope_p{p:g}", "passed": row["passed"],
                       "detail": f"slope {row['slope']}, expected {expected:.4f} +- {tol:g}"})

    cuts = parse_list(cfg["s4_cuts"], int)
    s4_delta = float(cfg["s4_delta"])
    s4_p = sphere_ops.schatten_threshold(d)
    sums = sphere_ops.partial_sum_curve(d, s4_p, s4_delta, cuts)
    incs = np.diff(sums)
    ratios = (incs[1:] / incs[:-1]).tolist() if len(incs) > 1 else []
    lo, hi = 1.0 - 0.3 * scale, 1.0 + 0.3 * scale
    s4_ok = bool(np.all(incs > 0)) and all(lo <= r <= hi for r in ratios)
    verdict = sphere_ops.schatten_norm_diff(d, s4_p, s4_delta, cuts[-1]).convergent
    checks.append({"name": "critical_divergence", "passed": s4_ok and not verdict,
                   "detail": f"p={s4_p:g}, delta={s4_delta}, partial sums {sums}, increment ratios {ratios}"})
    report["s4_probe"] = {"p": s4_p, "delta": s4_delta, "cuts": cuts, "partial_sums": sums,
                          "increment_ratios": ratios, "convergent": verdict}

    thr_rows = []
    for dd in parse_list(cfg["threshold_dims"], int):
        th = sphere_ops.schatten_threshold(dd)
        for p in (th - 1e-3, th, th + 1e-3):
            e = sphere_ops.schatten_norm_diff(dd, p, 0.3, 200)
            thr_rows.append({"d": dd, "threshold": th, "p": p, "convergent": e.convergent,
                             "expected": p > th})
    thr_ok = all(r["convergent"] == r["expected"] for r in thr_rows)
    checks.append({"name": "threshold_law", "passed": thr_ok,
                   "detail": f"dims {parse_list(cfg['threshold_dims'], int)}"})

    report["checks"] = checks
    report["passed"] = _summary("tdelta", checks)
    tables = {
        "schatten": (sch_rows, ["delta", "p", "n_cut", "partial_sum", "tail_bound", "norm_upper", "convergent"]),
        "opnorm": (op_rows, ["delta", "n_cut", "value", "certified_upper", "bound", "holds"]),
        "fits": (fit_rows, ["p", "expected", "slope", "passed"]),
        "threshold": (thr_rows, ["d", "threshold", "p", "convergent", "expected"]),
    }
    _emit(cfg, report, tables, "schatten")
    return EXIT_OK if report["passed"] else EXIT_FAILED


def cmd_weyl(cfg) -> int:
    scale = float(cfg["bound_scale"])
    report = {"schema_version": SCHEMA_VERSION, "command": "weyl"}
    checks = []
    if cfg.get("pair"):
        p, q = (parse_point(x) for x in cfg["pair"])
        cert = weyl.plan_zigzag(p, q)
        problems = weyl.verify_certificate(cert)
        ok = not problems and cert.total_bound <= scale * cert.closed_form_bound
        checks.append({"name": "certificate", "passed": ok,
                       "detail": f"total {cert.total_bound:.6g} vs {scale * cert.closed_form_bound:.6g}; {problems}"})
        report["certificate"] = cert.to_dict()
        rows = [_cert_row(cert, scale)]
    else:
        try:
            lo, hi = (float(x) for x in str(cfg["m_range"]).split(":"))
        except ValueError:
            raise ConfigError(f"expected LO:HI, got {cfg['m_range']!r}") from None
        if lo <= weyl.WALL_DISTANCE:
            raise weyl.PreconditionError(f"m range must stay above {weyl.WALL_DISTANCE}")
        pts = weyl.point_grid(int(cfg["grid_points"]), lo, hi)
        rows = []
        for p in pts:
            for q in pts:
                rows.append(_cert_row(weyl.plan_zigzag(p, q), scale))
        bad = [r for r in rows if not r["sound"]]
        checks.append({"name": "zigzag_soundness", "passed": not bad,
                       "detail": f"{len(rows)} certificates, {len(bad)} unsound"})
        seed0 = int(cfg["seed"])
        syn = [weyl.synthetic_coeff_check(seed0 + k) for k in range(int(cfg["seeds"]))]
        nviol = sum(len(s["violations"]) for s in syn)
        checks.append({"name": "synthetic_coefficients", "passed": nviol == 0,
                       "detail": f"{len(syn)} seeds, {nviol} violations"})
        report["synthetic"] = [{k: s[k] for k in ("seed", "pairs", "functions", "worst_ratio", "passed")}
                               for s in syn]
    report["checks"] = checks
    report["passed"] = _summary("weyl", checks)
    fields = ["p_r", "p_s", "p_t", "q_r", "q_s", "q_t", "segments", "total_bound", "closed_form_bound", "sound"]
    _emit(cfg, report, {"certificates": (rows, fields)}, "certificates")
    return EXIT_OK if report["passed"] else EXIT_FAILED


def _cert_row(cert, scale):
    (p, q) = cert.endpoints
    return {
        "p_r": p.r, "p_s": p.s, "p_t": p.t, "q_r": q.r, "q_s": q.s, "q_t": q.t,
        "segments": len(cert.segments), "total_bound": cert.total_bound,
        "closed_form_bound": cert.closed_form_bound,
        "sound": cert.total_bound <= scale * cert.closed_form_bound and not weyl.verify_certificate(cert),
    }


def cmd_cayley(cfg) -> int:
    moduli = parse_list(cfg["moduli"], int)
    if not moduli or any(n < 2 for n in moduli):
        raise ConfigError(f"moduli must be integers >= 2, got {moduli}")
    threads = int(cfg["threads"])
    max_v = int(cfg["max_vertices"])
    tol = float(cfg["tolerance"])
    rows = []
    for n in moduli:
        g = cayley.build_cayley(n, max_vertices=max_v)
        res = cayley.spectral_gap(g, tolerance=tol, threads=threads, seed=int(cfg["seed"]))
        rows.append({"n": n, "vertices": g.num_vertices, "degree": g.degree, "lambda2": res.lambda2,
                     "gap_normalized": res.gap_normalized, "poincare_rho": res.poincare_rho,
                     "residual": res.residual, "iterations": res.iterations})
        if cfg.get("export_mtx"):
            path = Path(cfg["export_mtx"])
            if len(moduli) > 1:
                path = path.with_name(f"{path.stem}_n{n}{path.suffix or '.mtx'}")
            cayley.write_matrix_market(g, path)
    checks = [{"name": "positive_gap", "passed": all(r["gap_normalized"] > 0 for r in rows),
               "detail": f"moduli {moduli}; normalized gaps {[round(r['gap_normalized'], 6) for r in rows]}"}]
    report = {
        "schema_version": SCHEMA_VERSION, "command": "cayley", "checks": checks,
        "note": "scalar spectral gap only; says nothing about Banach-valued Poincare "
                "constants or the super-expander conjecture",
    }
    report["passed"] = _summary("cayley", checks)
    _emit(cfg, report, {"sweep": (rows, cayley.SWEEP_HEADER)}, "sweep")
    return EXIT_OK if report["passed"] else EXIT_FAILED


COMMANDS = {"legendre": cmd_legendre, "tdelta": cmd_tdelta, "weyl": cmd_weyl, "cayley": cmd_cayley}


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False, argument_default=S)
    common.add_argument("--config", help="JSON file with settings (flags take precedence)")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("--bound-scale", type=float, dest="bound_scale", help=S)

    parser = argparse.ArgumentParser(prog="rankzero", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("legendre", parents=[common], argument_default=S,
                       help="Bernstein inequality and 1/2-Holder sweep")
    p.add_argument("--d", type=int)
    p.add_argument("--n-max", type=int, dest="n_max")
    p.add_argument("--bernstein-points", type=int, dest="bernstein_points")
    p.add_argument("--delta-grid", dest="delta_grid", metavar="START:STOP:STEP")
    p.add_argument("--n-cut", type=int, dest="n_cut")

    p = sub.add_parser("tdelta", parents=[common], argument_default=S,
                       help="operator and Schatten norms of T_delta - T_0")
    p.add_argument("--d", type=int)
    p.add_argument("--delta-grid", dest="delta_grid", metavar="START:STOP:STEP")
    p.add_argument("--n-cut", type=int, dest="n_cut")
    p.add_argument("--p-list", dest="p_list")
    p.add_argument("--schatten-deltas", dest="schatten_deltas", metavar="START:STOP:STEP")
    p.add_argument("--schatten-n-cut", type=int, dest="schatten_n_cut")
    p.add_argument("--slope-tol", type=float, dest="slope_tol")
    p.add_argument("--s4-delta", type=float, dest="s4_delta")
    p.add_argument("--s4-cuts", dest="s4_cuts")
    p.add_argument("--threshold-dims", dest="threshold_dims")

    p = sub.add_parser("weyl", parents=[common], argument_default=S,
                       help="zig-zag certificates and synthetic coefficient checks")
    p.add_argument("--grid-points", type=int, dest="grid_points")
    p.add_argument("--m-range", dest="m_range", metavar="LO:HI")
    p.add_argument("--seeds", type=int)
    p.add_argument("--pair", nargs=2, metavar=("R,S,T", "R,S,T"))

    p = sub.add_parser("cayley", parents=[common], argument_default=S,
                       help="spectral gap sweep for SL3(Z/nZ)")
    p.add_argument("--moduli")
    p.add_argument("--export-mtx", dest="export_mtx")
    p.add_argument("--max-vertices", type=int, dest="max_vertices")
    p.add_argument("--tolerance", type=float)
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    cmd = args.command
    cfg = dict(DEFAULTS["common"])
    cfg.update(DEFAULTS[cmd])
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    path = getattr(args, "config", None)
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        # top-level keys apply to every command; a section named after the command overrides them
        section = {k: v for k, v in data.items() if k not in COMMANDS}
        section.update(data.get(cmd, {}))
        unknown = set(section) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys for {cmd}: {sorted(unknown)}")
        cfg.update(section)
    cfg.update(flags)
    if cfg["format"] not in ("csv", "json"):
        raise ConfigError("format must be csv or json")
    if int(cfg["threads"]) < 1:
        raise ConfigError("threads must be >= 1")
    cfg["command"] = cmd
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[cfg["command"]](cfg)
    except ConfigError as exc:
        print(f"rankzero: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except cayley.SizeLimitError as exc:
        print(f"rankzero: size limit: {exc}", file=sys.stderr)
        return EXIT_SIZE_LIMIT
    except cayley.EigensolverError as exc:
        print(f"rankzero: eigensolver: {exc}", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    except weyl.PreconditionError as exc:
        print(f"rankzero: precondition: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except (orthopoly.DomainError, ValueError) as exc:
        print(f"rankzero: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
