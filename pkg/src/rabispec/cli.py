"""Command-line front end.

Every command writes one table (CSV or JSON) to ``--output`` or standard
output. Exit status: 0 success, 1 computation failure, 2 invalid
configuration.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys

import numpy as np

from . import contfrac, dicke, oracle
from . import gfunctions as gf
from . import spectrum as sp
from .exceptions import PoleAtInteger, PreconditionViolated, RabiSpecError
from .params import Dicke2Params, Dicke3Params, Parity, RabiParams
from .precision import default_bits

log = logging.getLogger("rabispec")

LINE_COLUMNS = ["x", "E", "parity", "class", "degeneracy", "residual", "method"]


class ConfigError(ValueError):
    pass


def parse_grid(text: str) -> np.ndarray:
    """``start:step:stop`` (stop included within half a step) or a single value."""
    parts = text.split(":")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"bad grid {text!r}") from None
    if len(vals) == 1:
        return np.array(vals)
    if len(vals) != 3:
        raise ConfigError(f"grid must be start:step:stop, got {text!r}")
    start, step, stop = vals
    if not step > 0 or stop < start:
        raise ConfigError(f"grid {text!r} must have step > 0 and stop >= start")
    n = int(math.floor((stop - start) / step + 0.5))
    return start + step * np.arange(n + 1)


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return v


def write_table(rows, columns, fmt: str, out):
    rows = list(rows)
    if fmt == "json":
        payload = [{c: _jsonable(r[c]) for c in columns} for r in rows]
        json.dump(payload, out, ensure_ascii=False, indent=1)
        out.write("\n")
        return
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in columns])


def _jsonable(v):
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def _positive(name, value):
    if not value > 0:
        raise ConfigError(f"--{name} must be > 0")
    return value


# ---------------------------------------------------------------- commands


def _rabi(args, g=None):
    return RabiParams(args.g if g is None else g, args.delta, args.omega)


def cmd_rabi_spectrum(args):
    p = _rabi(args)
    x_max = _positive("xmax", args.xmax)
    lines = sp.full_spectrum(p, x_max, tol=args.tol, check=False, precision_bits=args.precision_bits)
    status = 0
    if args.check:
        report = sp.compare_with_oracle(lines, p, x_max)
        if report["missing"] or report["extra"]:
            log.error("oracle mismatch: missing=%s extra=%s", report["missing"], report["extra"])
            status = 1
    return [ln.as_row() for ln in lines], LINE_COLUMNS, status


def cmd_rabi_sweep(args):
    grid = parse_grid(args.g)
    w = args.omega
    base = RabiParams(0.0, args.delta / w)
    sw = sp.sweep_coupling(base, grid / w, _positive("xmax", args.xmax))
    if sw.ambiguities:
        log.warning("tracking ambiguities at %d steps", len(sw.ambiguities))
    if args.crossings:
        rows = [
            {"g": c.g * w, "E": c.energy * w, "even_level": c.levels[0], "odd_level": c.levels[1], "m": c.m,
             "judd_value": c.judd_value, "g_judd": c.g_judd * w if c.g_judd is not None else float("nan")}
            for c in sw.crossings
        ]
        return rows, ["g", "E", "even_level", "odd_level", "m", "judd_value", "g_judd"], 0
    rows = []
    for i, g in enumerate(grid):
        for par in Parity:
            for k, e in enumerate(sw.curves[par][i]):
                rows.append({"g": g, "parity": par.label, "level": k, "E": e * w})
    return rows, ["g", "parity", "level", "E"], 0


def cmd_gfunction_trace(args):
    p = _rabi(args)
    _positive("samples", args.samples)
    if args.xmax <= args.xmin:
        raise ConfigError("--xmax must exceed --xmin")
    xs = np.linspace(args.xmin, args.xmax, args.samples)
    n = np.rint(xs)
    xs = xs[(np.abs(xs - n) > 1e-9) | (n < 0)]
    if args.precision_bits > 53:
        vals, errs = {}, {}
        for par in Parity:
            evs = [gf.g_regular(x, p.with_parity(par), tol=args.tol, precision_bits=args.precision_bits, strict=False) for x in xs]
            vals[par] = np.array([e.value for e in evs])
            errs[par] = np.array([e.truncation_error for e in evs])
    else:
        vals, errs = {}, {}
        for par in Parity:
            vals[par], errs[par] = gf.g_regular_grid(xs, p.with_parity(par), tol=args.tol)
    rows = [
        {"x": x, "G_plus": vals[Parity.EVEN][i], "G_minus": vals[Parity.ODD][i],
         "err_plus": errs[Parity.EVEN][i], "err_minus": errs[Parity.ODD][i]}
        for i, x in enumerate(xs)
    ]
    return rows, ["x", "G_plus", "G_minus", "err_plus", "err_minus"], 0


def cmd_judd_points(args):
    lo, hi = (float(v) for v in args.g_range.split(":"))
    if not 0 < lo < hi:
        raise ConfigError("--g-range must be lo:hi with 0 < lo < hi")
    rows = []
    for m in range(1, args.m_max + 1):
        for g in sp.judd_points(m, args.delta / args.omega, (lo / args.omega, hi / args.omega)):
            rows.append({"m": m, "g": g * args.omega, "E": (m - g ** 2) * args.omega,
                         "residual": abs(gf.judd_condition(m, RabiParams(g, args.delta / args.omega)))})
    return rows, ["m", "g", "E", "residual"], 0


def cmd_exceptional_scan(args):
    grid = parse_grid(args.g) / args.omega
    rows = []
    pars = list(Parity) if args.parity == "both" else [Parity.parse(args.parity)]
    for par in pars:
        for g, d, res in sp.exceptional_nd_zeros(args.m, par, grid, args.delta_max / args.omega):
            rows.append({"m": args.m, "parity": par.label, "g": g * args.omega, "delta": d * args.omega,
                         "E": (args.m - g ** 2) * args.omega, "residual": res})
    return rows, ["m", "parity", "g", "delta", "E", "residual"], 0


def cmd_contfrac_compare(args):
    p = _rabi(args)
    if args.breakdown:
        bits = tuple(int(b) for b in args.bits.split(","))
        rep = contfrac.breakdown_study(p, level_max=args.level_max, precision_bits=bits)
        cols = ["level", "x", "parity", "pole_x", "distance", "required_bits"] + [f"resolved_{b}" for b in rep.precisions]
        for b in rep.precisions:
            log.info("resolved levels at %d bits: %d%s", b, rep.resolved_count[b], " (capped)" if rep.capped[b] else "")
        return list(rep.rows()), cols, 0
    x_max = _positive("xmax", args.xmax)
    cf = contfrac.contfrac_roots(p, x_max)
    lines = [ln for ln in sp.full_spectrum(p, x_max, check=False)
             if ln.line_class is not sp.LineClass.EXCEPTIONAL_ND]
    refs = np.array(sorted({round(ln.x, 12) for ln in lines}))
    rows = []
    for z in cf.zeros:
        j = int(np.argmin(np.abs(refs - z))) if refs.size else -1
        ref = refs[j] if j >= 0 else float("nan")
        rows.append({"x_contfrac": z, "x_gfunction": ref, "difference": abs(z - ref),
                     "E": (z - p.reduced().g ** 2) * args.omega})
    return rows, ["x_contfrac", "x_gfunction", "difference", "E"], 0


def _dicke2(args, g=None):
    if g is not None:
        share = args.ratio / (1 + args.ratio)
        return Dicke2Params(g * share, g * (1 - share), args.delta1, args.delta2, args.omega)
    return Dicke2Params(args.g1, args.g2, args.delta1, args.delta2, args.omega)


def cmd_dicke2_spectrum(args):
    p = _dicke2(args)
    rows = []
    for par in Parity:
        for k, e in enumerate(oracle.spectrum("dicke2", p.with_parity(par), args.k)):
            rows.append({"parity": par.label, "level": k, "E": e})
    return rows, ["parity", "level", "E"], 0


def _sweep_rows(sw, omega):
    rows = []
    for i, g in enumerate(sw.g_grid):
        for par in Parity:
            for k, e in enumerate(sw.curves[par][i]):
                rows.append({"g": g * omega, "parity": par.label, "level": k, "E": e})
    return rows


def cmd_dicke2_sweep(args):
    grid = parse_grid(args.g)
    base = _dicke2(args, g=1.0)
    sw = dicke.dicke_sweep(base, grid / args.omega, args.k)
    return _sweep_rows(sw, args.omega), ["g", "parity", "level", "E"], 0


def cmd_dicke3_sweep(args):
    grid = parse_grid(args.g)
    sw = dicke.dicke_sweep(Dicke3Params(0.0, args.delta, args.omega), grid / args.omega, args.k)
    return _sweep_rows(sw, args.omega), ["g", "parity", "level", "E"], 0


def cmd_census(args):
    gs, ds = parse_grid(args.g), parse_grid(args.delta)
    grid = [RabiParams(g, d, args.omega) for g in gs for d in ds if g > 0 and d > 0]
    if not grid:
        raise ConfigError("census needs g > 0 and delta > 0 grid points")
    rows = []
    total = bad = 0
    for c in sp.zero_census(grid, args.xmax):
        for n, count in sorted(c.counts.items()):
            total += 1
            bad += n in c.indeterminate
            rows.append({"g": c.g, "delta": c.delta, "parity": c.parity.label, "interval": n, "count": count,
                         "indeterminate": n in c.indeterminate, "left_pole_removed": n in c.removed_poles,
                         "violation": any(v[1] == n for v in c.violations)})
        for v in c.violations:
            log.warning("finding g=%g delta=%g parity=%s: %s", c.g, c.delta, c.parity.label, v)
    log.info("intervals=%d indeterminate=%d", total, bad)
    return rows, ["g", "delta", "parity", "interval", "count", "indeterminate", "left_pole_removed", "violation"], 0


def cmd_verify(args):
    p = _rabi(args)
    report = verify(p, args.levels, args.contfrac_levels)
    status = 0 if report["passed"] else 1
    for key in ("max_dev_gfunction_oracle", "max_dev_contfrac"):
        log.info("%s = %.3g", key, report[key])
    log.info("verify %s", "PASS" if report["passed"] else "FAIL")
    return report["rows"], ["parity", "level", "E_gfunction", "E_oracle", "E_contfrac", "dev_oracle", "dev_contfrac"], status


def verify(params: RabiParams, levels: int = 10, contfrac_levels: int = 6,
           tol: float = 1e-8, tol_cf: float = 1e-6) -> dict:
    """Three-way comparison of the lowest levels per parity.

    G-function roots against the certified oracle, and the continued
    fraction (parity-blind) on the first ``contfrac_levels`` of each parity.
    """
    p = params.reduced()
    ora = {par: oracle.spectrum("rabi", p.with_parity(par), levels, 1e-11) for par in Parity}
    x_max = max(float(ora[par][-1]) for par in Parity) + p.g ** 2 + 0.5
    lines = sp.full_spectrum(p, x_max, check=False)
    cf = np.array(contfrac.contfrac_roots(p, x_max).zeros) - p.g ** 2
    rows, dev, dev_cf = [], 0.0, 0.0
    for par in Parity:
        mine = sorted(ln.energy for ln in lines if ln.parity is par)[:levels]
        for k in range(levels):
            e_g = mine[k] if k < len(mine) else float("nan")
            e_o = float(ora[par][k])
            d = abs(e_g - e_o)
            dev = max(dev, d) if not math.isnan(d) else math.inf
            e_c, d_c = float("nan"), float("nan")
            if k < contfrac_levels and cf.size:
                e_c = float(cf[np.argmin(np.abs(cf - e_o))])
                d_c = abs(e_c - e_o)
                dev_cf = max(dev_cf, d_c)
            rows.append({"parity": par.label, "level": k, "E_gfunction": e_g * params.omega, "E_oracle": e_o * params.omega,
                         "E_contfrac": e_c * params.omega, "dev_oracle": d, "dev_contfrac": d_c})
    return {"rows": rows, "max_dev_gfunction_oracle": dev, "max_dev_contfrac": dev_cf,
            "passed": dev < tol and dev_cf < tol_cf}


COMMANDS = {
    "rabi-spectrum": cmd_rabi_spectrum,
    "rabi-sweep": cmd_rabi_sweep,
    "gfunction-trace": cmd_gfunction_trace,
    "judd-points": cmd_judd_points,
    "exceptional-scan": cmd_exceptional_scan,
    "contfrac-compare": cmd_contfrac_compare,
    "dicke2-spectrum": cmd_dicke2_spectrum,
    "dicke2-sweep": cmd_dicke2_sweep,
    "dicke3-sweep": cmd_dicke3_sweep,
    "census": cmd_census,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--omega", type=float, default=1.0, help="mode frequency (energies scale with it)")
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("--output", "-o", default="-", help="output file, '-' for stdout")
    common.add_argument("--precision-bits", type=int, default=None,
                        help="starting mantissa bits (default from RABISPEC_PRECISION_BITS or 53)")
    common.add_argument("--tol", type=float, default=1e-14, help="series truncation tolerance")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="rabispec", description="Exact spectra of the Rabi and small Dicke models.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_)

    s = add("rabi-spectrum", "regular and exceptional levels below xmax")
    s.add_argument("--g", type=float, required=True)
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--xmax", type=float, required=True, help="bound on x = E/omega + (g/omega)^2")
    s.add_argument("--no-check", dest="check", action="store_false", help="skip the oracle cross-check")

    s = add("rabi-sweep", "level curves over a coupling grid")
    s.add_argument("--g", required=True, help="start:step:stop")
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--xmax", type=float, required=True)
    s.add_argument("--crossings", action="store_true", help="emit the crossing table instead of the curves")

    s = add("gfunction-trace", "G_+ and G_- on a uniform grid")
    s.add_argument("--g", type=float, required=True)
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--xmin", type=float, default=0.0)
    s.add_argument("--xmax", type=float, required=True)
    s.add_argument("--samples", type=int, default=600)

    s = add("judd-points", "couplings of the doubly degenerate levels")
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--m-max", type=int, default=3)
    s.add_argument("--g-range", default="0.001:3")

    s = add("exceptional-scan", "zeros of the exceptional G-function in (g, delta)")
    s.add_argument("--m", type=int, default=0)
    s.add_argument("--g", required=True, help="start:step:stop")
    s.add_argument("--delta-max", type=float, default=1.0)
    s.add_argument("--parity", default="both", choices=["even", "odd", "both"])

    s = add("contfrac-compare", "continued-fraction zeros against G-function roots")
    s.add_argument("--g", type=float, required=True)
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--xmax", type=float, default=6.0)
    s.add_argument("--breakdown", action="store_true", help="run the zero-pole breakdown study instead")
    s.add_argument("--level-max", type=int, default=200)
    s.add_argument("--bits", default="53,212", help="comma-separated precisions for the breakdown study")

    for name in ("dicke2-spectrum", "dicke2-sweep"):
        s = add(name, "two-qubit model from the certified oracle")
        if name == "dicke2-spectrum":
            s.add_argument("--g1", type=float, required=True)
            s.add_argument("--g2", type=float, required=True)
        else:
            s.add_argument("--g", required=True, help="grid over g = g1 + g2")
            s.add_argument("--ratio", type=float, default=1.0, help="g1 / g2")
        s.add_argument("--delta1", type=float, required=True)
        s.add_argument("--delta2", type=float, required=True)
        s.add_argument("--k", type=int, default=10, help="levels per parity")

    s = add("dicke3-sweep", "three-qubit spin-3/2 sector over a coupling grid")
    s.add_argument("--g", required=True)
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--k", type=int, default=10)

    s = add("census", "root counts of G per unit interval")
    s.add_argument("--g", required=True)
    s.add_argument("--delta", required=True)
    s.add_argument("--xmax", type=float, default=20.0)

    s = add("verify", "G-function vs oracle vs continued fraction")
    s.add_argument("--g", type=float, required=True)
    s.add_argument("--delta", type=float, required=True)
    s.add_argument("--levels", type=int, default=10)
    s.add_argument("--contfrac-levels", type=int, default=6)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s",
                        stream=sys.stderr)
    try:
        if args.precision_bits is None:
            args.precision_bits = default_bits()
        if args.precision_bits < 53:
            raise ConfigError("--precision-bits must be >= 53")
        _positive("tol", args.tol)
        _positive("omega", args.omega)
        rows, columns, status = COMMANDS[args.command](args)
    except (ConfigError, PreconditionViolated, PoleAtInteger) as exc:
        print(f"rabispec: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except RabiSpecError as exc:
        print(f"rabispec: computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"rabispec: invalid configuration: {exc}", file=sys.stderr)
        return 2
    buf = io.StringIO()
    write_table(rows, columns, args.format, buf)
    if args.output == "-":
        sys.stdout.write(buf.getvalue())
    else:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    return status


if __name__ == "__main__":
    sys.exit(main())
