"""``epcert`` command line: run, sweep, certify and report.

Exit codes: 0 success, 1 a certificate or rate assertion failed, 2 bad input,
3 a solver diverged or failed to converge.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import certificates as cert
from .cga import ModeSearchError, find_mode
from .ep import EPError, fixed_point_diagnostics, solve_fixed_point
from .model import Target, load_target
from .oracle import AccuracyError, GridSpec, QuadratureError, target_moments
from .scaling import (FAMILIES, EpOptions, check_rates, powers_of_two, rates_report,
                      run_sweep, write_csv, write_rates_json)

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT, EXIT_DIVERGED = 0, 1, 2, 3


class InputError(Exception):
    pass


class SolverError(Exception):
    pass


def _warn(msg: str) -> None:
    print(f"epcert: warning: {msg}", file=sys.stderr)


def _spec(args) -> GridSpec:
    return GridSpec(half_width_sigmas=args.half_width, points=args.quad_points)


def _opts(args) -> EpOptions:
    return EpOptions(args.damping, args.fp_tol, args.max_sweeps)


def _load(path) -> Target:
    try:
        return load_target(path)
    except (OSError, ValueError, TypeError) as exc:  # JSONDecodeError is a ValueError
        raise InputError(f"cannot load problem {path}: {exc}") from None


def _write_json(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _suite(name, build, certs, not_applicable):
    try:
        certs.extend(build())
    except cert.NotApplicable as exc:
        not_applicable.append({"suite": name, "reason": str(exc)})


def build_run_report(target: Target, opts: EpOptions, spec: GridSpec) -> dict:
    """Oracle, EP and CGA on one target with every applicable certificate."""
    m = target_moments(target, spec)
    try:
        cga = find_mode(target)
    except ModeSearchError as exc:
        raise SolverError(f"mode search failed: {exc}") from None
    try:
        fp = solve_fixed_point(target, opts.damping, opts.fp_tol, opts.max_sweeps, spec=spec)
    except EPError as exc:
        raise SolverError(f"EP diverged: {exc}") from None
    if not fp.converged:
        raise SolverError(f"EP did not converge in {opts.max_sweeps} sweeps "
                          f"(last change {fp.state.last_max_delta:.3e})")

    certs, na = [], []
    _suite("target", lambda: cert.target_suite(target, m), certs, na)
    _suite("hybrid", lambda: cert.hybrid_suite(target, fp), certs, na)
    _suite("theorem", lambda: cert.theorem_suite(m, fp, cga, target.site_constants, target.n,
                                                 target), certs, na)
    c = target.site_constants
    diag = fixed_point_diagnostics(fp, c.beta_m) if c is not None else None
    kl_ep = cert.excess_kl(m.mean, m.m2, fp.mu_ep, fp.v_ep)
    kl_cga = cert.excess_kl(m.mean, m.m2, cga.x_star, 1 / cga.beta_star)
    return {
        "kind": "run",
        "target": target.to_dict(),
        "oracle": m.to_dict(),
        "fixed_point": {
            "mu_ep": fp.mu_ep, "v_ep": fp.v_ep, "converged": fp.converged,
            "sweeps_used": fp.sweeps_used,
            "site_approx": [[s.r, s.beta] for s in fp.state.site_approx],
            "diagnostics": diag.to_dict() if diag else None,
        },
        "cga": cga.to_dict(),
        "errors": {
            "mean_ep": abs(m.mean - fp.mu_ep), "mean_cga": abs(m.mean - cga.x_star),
            "var_ep": abs(m.m2 - fp.v_ep), "prec_cga": abs(1 / m.m2 - cga.beta_star),
        },
        "excess_kl": {"ep": kl_ep.to_dict(), "cga": kl_cga.to_dict()},
        "certificates": [x.to_dict() for x in certs],
        "not_applicable": na,
        "all_hold": cert.all_hold(certs),
    }


def build_certify_report(target: Target, spec: GridSpec) -> dict:
    m = target_moments(target, spec)
    certs, na = [], []
    _suite("target", lambda: cert.target_suite(target, m), certs, na)
    if na:
        na.append({"suite": "theorem", "reason": "needs certified site constants"})
    return {
        "kind": "certify",
        "target": target.to_dict(),
        "oracle": m.to_dict(),
        "certificates": [x.to_dict() for x in certs],
        "not_applicable": na,
        "all_hold": cert.all_hold(certs),
    }


def cmd_run(args) -> int:
    target = _load(args.problem)
    report = build_run_report(target, _opts(args), _spec(args))
    for item in report["not_applicable"]:
        _warn(f"{item['suite']} suite not applicable: {item['reason']}")
    if args.out:
        _write_json(report, args.out)
    print(render_report(report))
    return EXIT_OK if report["all_hold"] else EXIT_VIOLATION


def cmd_certify(args) -> int:
    target = _load(args.problem)
    report = build_certify_report(target, _spec(args))
    for item in report["not_applicable"]:
        _warn(f"{item['suite']} suite not applicable: {item['reason']}")
    if args.out:
        _write_json(report, args.out)
    print(render_report(report))
    return EXIT_OK if report["all_hold"] else EXIT_VIOLATION


def cmd_sweep(args) -> int:
    if args.family not in FAMILIES:
        raise InputError(f"unknown family {args.family!r}; expected one of {', '.join(FAMILIES)}")
    if args.n_max < 4:
        raise InputError("--n-max must be at least 4")
    records = run_sweep(args.family, powers_of_two(4, args.n_max), args.seed, _opts(args),
                        _spec(args), workers=args.workers)
    checks = check_rates(args.family, records)
    report = rates_report(args.family, records, checks)
    out = Path(args.out)
    write_csv(records, out)
    rates_out = Path(args.rates_out) if args.rates_out else out.with_suffix(".rates.json")
    write_rates_json(report, rates_out)
    if report["excluded_n"]:
        _warn(f"EP did not converge for n = {report['excluded_n']}; excluded from fits")
    print(render_report(report))
    return EXIT_OK if report["all_passed"] else EXIT_VIOLATION


def cmd_report(args) -> int:
    try:
        with open(args.report) as fh:
            doc = json.load(fh)
        text = render_report(doc)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"cannot read report {args.report}: {exc}") from None
    print(text)
    return EXIT_OK


def render_report(doc: dict) -> str:
    """Plain-text rendering of a run, certify or sweep-rates JSON document."""
    lines = []
    if "checks" in doc:
        lines.append(f"sweep {doc['family']}  n = {doc['n']}")
        if doc["excluded_n"]:
            lines.append(f"  excluded (not converged): {doc['excluded_n']}")
        for c in doc["checks"]:
            fit = c["fit"]
            lo, hi = c["slope_range"]
            s = f"{fit['slope']:+.4f}  R2 {fit['r_squared']:.4f}" if fit else "no fit"
            lines.append(f"  {'PASS' if c['passed'] else 'FAIL'}  {c['name']:<18} {s}"
                         f"  range [{lo}, {hi}]")
        lines.append("all slope assertions pass" if doc["all_passed"] else "slope assertion FAILED")
        return "\n".join(lines)

    n = len(doc["target"]["sites"])
    o = doc["oracle"]
    lines.append(f"{doc['kind']}: {n} site(s)")
    lines.append(f"  oracle  mean {o['mean']:.12g}  var {o['m2']:.12g}")
    if "fixed_point" in doc:
        fp, c = doc["fixed_point"], doc["cga"]
        lines.append(f"  EP      mean {fp['mu_ep']:.12g}  var {fp['v_ep']:.12g}"
                     f"  ({fp['sweeps_used']} sweeps)")
        lines.append(f"  CGA     mode {c['x_star']:.12g}  prec {c['beta_star']:.12g}")
        e = doc["errors"]
        lines.append(f"  errors  |mu-mu_EP| {e['mean_ep']:.3e}  |mu-x*| {e['mean_cga']:.3e}")
        kl = doc["excess_kl"]
        lines.append(f"  excess KL  EP {kl['ep']['exact']:.3e}  CGA {kl['cga']['exact']:.3e}")
    for c in doc["certificates"]:
        lines.append(f"  {'ok  ' if c['holds'] else 'FAIL'} {c['id']:<28} lhs {c['lhs']:.4e}"
                     f"  rhs {c['rhs']:.4e}  slack {c['slack']:+.3e}")
    for item in doc["not_applicable"]:
        lines.append(f"  n/a  {item['suite']}: {item['reason']}")
    lines.append("all certificates hold" if doc["all_hold"] else "certificate VIOLATED")
    return "\n".join(lines)


def _add_solver_flags(p, ep: bool = True):
    defaults = EpOptions()
    p.add_argument("--quad-points", type=int, default=0,
                   help="base quadrature grid size, a power of two (default: "
                        "$EPCERT_QUAD_POINTS or 131072)")
    p.add_argument("--half-width", type=float, default=12.0,
                   help="integration half width in curvature-floor deviations")
    p.add_argument("--seed", type=int, default=0)
    if ep:
        p.add_argument("--damping", type=float, default=defaults.damping)
        p.add_argument("--fp-tol", type=float, default=defaults.fp_tol)
        p.add_argument("--max-sweeps", type=int, default=defaults.max_sweeps)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="epcert", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="solve EP, CGA and the oracle and certify every bound")
    p.add_argument("problem", help="problem JSON file")
    p.add_argument("--out", help="write the JSON report here")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("certify", help="oracle moments and moment-bound certificates only")
    p.add_argument("problem")
    p.add_argument("--out")
    _add_solver_flags(p, ep=False)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("sweep", help="error sweep over n with rate fits")
    p.add_argument("family", help=f"one of {', '.join(FAMILIES)}")
    p.add_argument("--n-max", type=int, default=512)
    p.add_argument("--out", default="sweep.csv", help="CSV path (default sweep.csv)")
    p.add_argument("--rates-out", help="rate-fit JSON path (default <out>.rates.json)")
    p.add_argument("--workers", type=int, default=1, help="processes for independent n")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="pretty-print a JSON report")
    p.add_argument("report")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if hasattr(args, "quad_points"):
            try:
                _spec(args)
                if hasattr(args, "damping"):
                    _opts(args)
                    if not 0 < args.damping <= 1:
                        raise ValueError("--damping must lie in (0, 1]")
            except ValueError as exc:
                raise InputError(str(exc)) from None
        return args.func(args)
    except InputError as exc:
        print(f"epcert: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (SolverError, EPError, ModeSearchError, QuadratureError, AccuracyError) as exc:
        print(f"epcert: solver failure: {exc}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
