"""Command line front door: ``connred COMMAND PROBLEM.ini [options]``.

Exit codes: 0 success, 1 a check failed, 2 bad input (file, expression, flow).
"""

from __future__ import annotations

import argparse
import datetime
import os
import sys
from pathlib import Path


from . import __version__
from . import symexpr as sx
from .dynamics import (
    check_projectable, energy_rate, reduction_identities, sode, split_forms,
    split_vector_field, verify_dynamics,
)
from .errors import ConnredError, InvalidFlow, ProblemFileError, UnsupportedConnection
from .geometry import (
    check_regular, energy, is_symmetry, jet_prolongation, lie_derivative_fn, poincare_cartan_forms,
)
from .integrate import compare_projection, integrate_full, integrate_reduced, run_batch, write_csv
from .problem import Problem, load, load_ic_grid
from .reconstruction import reconstruction_report
from .reduction import first_integral_check, flow_auto, flow_validate, pullback_check, reduce, reduced_field_check
from .report import CheckReport, to_json, to_text

OUTPUT_ENV = "CONNRED_OUTPUT_DIR"

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


def _opts(p: Problem):
    return dict(tol=p.tol, trials=p.probes, seed=p.seed)


def resolve_flow(p: Problem):
    """The file's flow if present, else ``flow_auto``; unusable flows are input errors."""
    if p.flow is not None:
        return p.flow
    try:
        return flow_auto(p.connection)
    except UnsupportedConnection as exc:
        raise InputError(f"{exc}; add a [flow] section") from exc


def _checks(p: Problem):
    sys_ = p.system
    reg = check_regular(sys_, p.probes, p.tol, p.seed)
    sym = is_symmetry(sys_, p.connection, **_opts(p))
    flow = resolve_flow(p)
    fv = flow_validate(flow, p.connection, **_opts(p))
    return reg, sym, flow, fv


def cmd_check(p: Problem):
    reg, sym, flow, fv = _checks(p)
    ok = bool(reg) and bool(sym) and bool(fv)
    sym_res = lie_derivative_fn(jet_prolongation(p.connection), p.L)
    report = {
        "command": "check", "system": p.name, "passed": ok,
        "regular": reg.to_dict(),
        "symmetry": {"passed": bool(sym), "path": sym.path, "residual": str(sym_res)},
        "flow": fv.to_dict(),
    }
    failures = [k for k, v in (("regular", reg), ("symmetry", sym), ("flow", fv)) if not v]
    return (EXIT_OK if ok else EXIT_FAIL), _with_failures(report, failures)


def _with_failures(report, failures):
    report["failures"] = list(failures)
    return report


def cmd_derive(p: Problem):
    code, check = cmd_check(p)
    sys_, c = p.system, p.connection
    theta, omega = poincare_cartan_forms(sys_)
    X = sode(sys_)
    sf = split_forms(sys_, c)
    XH, XV = split_vector_field(X, c)
    dyn = verify_dynamics(X, sys_, **_opts(p))
    rate = energy_rate(sys_, c)
    rate_ok = sx.is_zero(rate, p.tol, p.probes, p.seed)
    report = {
        "command": "derive", "system": p.name, "chart": p.chart.to_dict(),
        "lagrangian": str(p.L),
        "theta_L": theta.to_dict("theta_L"), "omega_L": omega.to_dict("omega_L"),
        "energy": str(energy(sys_, c)), "X_L": X.to_dict("X_L"),
        "splits": {
            "theta_H": sf.theta_h.to_dict("theta_H"), "theta_V": sf.theta_v.to_dict("theta_V"),
            "omega_H": sf.omega_h.to_dict("omega_H"), "omega_V": sf.omega_v.to_dict("omega_V"),
            "X_H": XH.to_dict("X_H"), "X_V": XV.to_dict("X_V"),
        },
        "dynamics": dyn.to_dict(),
        "energy_rate": {"residual": str(rate), "passed": bool(rate_ok)},
        "check": check,
    }
    failures = [f"check.{f}" for f in check["failures"]]
    if not dyn:
        failures.append("dynamics")
    if not rate_ok:
        failures.append("energy_rate")
    return (EXIT_OK if not failures else EXIT_FAIL), _with_failures(report, failures)


def _require_check(p: Problem):
    code, check = cmd_check(p)
    if code != EXIT_OK:
        return code, _with_failures({"system": p.name, "check": check},
                                    [f"check.{f}" for f in check["failures"]])
    return None


def _reduce(p: Problem):
    flow = resolve_flow(p)
    return flow, reduce(p.system, p.connection, flow, **_opts(p))


def cmd_reduce(p: Problem):
    stop = _require_check(p)
    if stop:
        stop[1]["command"] = "reduce"
        return stop
    flow, red = _reduce(p)
    reps = [
        pullback_check(p.system, p.connection, flow, red, verbose=True, **_opts(p)),
        first_integral_check(red, **_opts(p)),
        reduced_field_check(red, **_opts(p)),
        red.structure_check(**_opts(p)),
    ]
    cross = red.info["L_bar_o_Phi=L"]
    report = {"command": "reduce", "system": p.name, **red.to_dict(),
              "checks": {r.name: r.to_dict() for r in reps},
              "L_bar_o_Phi=L": bool(cross)}
    failures = [r.name for r in reps if not r] + ([] if cross else ["L_bar_o_Phi=L"])
    return (EXIT_OK if not failures else EXIT_FAIL), _with_failures(report, failures)


def cmd_reconstruct(p: Problem):
    stop = _require_check(p)
    if stop:
        stop[1]["command"] = "reconstruct"
        return stop
    _, red = _reduce(p)
    rep = reconstruction_report(p.system, p.connection, red, **_opts(p))
    report = {"command": "reconstruct", "system": p.name,
              "Z": rep.info["Z"].to_dict("Z"), "X_L": rep.info["X_L"].to_dict("X_L"),
              "diff": {k: str(v) for k, v in rep.residuals.items() if k.startswith("Z-X_L")},
              "checks": rep.to_dict()}
    failures = list(rep.failures())
    return (EXIT_OK if not failures else EXIT_FAIL), _with_failures(report, failures)


def _need_numeric(p: Problem):
    if not p.realized:
        missing = [s for s in p.symbols if s not in p.bindings.symbols]
        raise InputError(f"symbols without numeric realization: {missing}")
    if p.initial is None or p.span is None:
        raise InputError("[numeric] needs initial and span for integration")


def integrate_problem(p: Problem, mode="both", ic=None, red=None):
    """Runs for one initial condition; returns (summary, trajectories, failures)."""
    ic = tuple(p.initial if ic is None else ic)
    summary, trajs, failures = {"initial": list(ic)}, {}, []
    span = (p.span[0], p.span[1])
    if mode in ("full", "both"):
        full = integrate_full(p.system, p.connection, ic, span, p.integrator, p.bindings, p.seed)
        trajs["full"] = full
        summary["full"] = {"samples": len(full.params), "E0": float(full.monitor[0]), "drift": full.drift,
                           "final": full.final.tolist()}
        if not full.drift < p.drift_tol:
            failures.append("full.drift")
    if mode in ("reduced", "both"):
        if red is None:
            _, red = _reduce(p)
        ric = red.quotient.numeric(p.bindings)(*ic)
        rt = integrate_reduced(red, ric, span, p.integrator, p.bindings, seed=p.seed, name=p.name)
        trajs["reduced"] = rt
        summary["reduced"] = {"samples": len(rt.params), "E0": float(rt.monitor[0]), "drift": rt.drift,
                              "final": rt.final.tolist()}
        if not rt.drift < p.drift_tol:
            failures.append("reduced.drift")
    if mode == "both":
        cmp = compare_projection(trajs["full"], red.quotient, trajs["reduced"], p.projection_tol, p.bindings)
        summary["projection"] = cmp.to_dict()
        if not cmp:
            failures.append("projection")
    return summary, trajs, failures


def cmd_integrate(p: Problem, mode="both", output=None, ic_grid=None):
    _need_numeric(p)
    stop = _require_check(p) if mode != "full" else None
    if stop:
        stop[1]["command"] = "integrate"
        return stop
    out = Path(output or os.environ.get(OUTPUT_ENV) or ".")
    red = _reduce(p)[1] if mode != "full" else None
    ics = [tuple(p.initial)] if ic_grid is None else load_ic_grid(ic_grid, p.chart.dim)
    runs = run_batch(lambda ic: integrate_problem(p, mode, ic, red), ics)
    report = {"command": "integrate", "system": p.name, "mode": mode,
              "integrator": p.integrator.to_dict(), "span": list(p.span), "runs": []}
    failures = []
    stem = _slug(p.name)
    for k, (summary, trajs, fails) in enumerate(runs):
        suffix = "" if ic_grid is None else f"_ic{k}"
        files = {}
        for kind, traj in trajs.items():
            path = write_csv(traj, out / f"{stem}_{kind}{suffix}.csv", {"initial": list(ics[k])})
            files[kind] = str(path)
        summary["files"] = files
        report["runs"].append(summary)
        failures += [f"run{k}.{f}" if ic_grid is not None else f for f in fails]
    return (EXIT_OK if not failures else EXIT_FAIL), _with_failures(report, failures)


def cmd_verify(p: Problem):
    """Every identity check, plus a numeric run when realizations and ICs exist."""
    sections, failures = {}, []

    def record(name, code, rep):
        sections[name] = {"passed": code == EXIT_OK, "failures": rep.get("failures", [])}
        if code != EXIT_OK:
            failures.extend([f"{name}.{f}" for f in rep.get("failures", [])] or [name])

    code, rep = cmd_check(p)
    record("check", code, rep)
    if code == EXIT_OK:
        sys_, c = p.system, p.connection
        for r in (verify_dynamics(sode(sys_), sys_, **_opts(p)),
                  check_projectable(sys_, c, extended=True, **_opts(p)),
                  reduction_identities(sys_, c, **_opts(p)),
                  CheckReport.build("energy-rate", {"X_L(E)+j1Y(L)": energy_rate(sys_, c)}, **_opts(p))):
            record(r.name, EXIT_OK if r else EXIT_FAIL, {"failures": list(r.failures())})
        record("reduce", *cmd_reduce(p))
        record("reconstruct", *cmd_reconstruct(p))
        if p.realized and p.initial is not None and p.span is not None:
            summary, _, fails = integrate_problem(p, "both")
            record("integrate", EXIT_OK if not fails else EXIT_FAIL, {"failures": fails})
            sections["integrate"].update(summary)
        else:
            sections["integrate"] = {"skipped": "no numeric realization or initial condition"}
    report = {"command": "verify", "system": p.name, "passed": not failures, "sections": sections}
    return (EXIT_OK if not failures else EXIT_FAIL), _with_failures(report, failures)


COMMANDS = {
    "check": cmd_check, "derive": cmd_derive, "reduce": cmd_reduce,
    "reconstruct": cmd_reconstruct, "integrate": cmd_integrate, "verify": cmd_verify,
}


def _slug(name):
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in name) or "problem"


def build_parser():
    ap = argparse.ArgumentParser(prog="connred", description=(
        "Derive, reduce, reconstruct and integrate time-dependent Lagrangian systems "
        "with a connection symmetry."))
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("problem", help="problem file (INI)")
    ap.add_argument("--format", choices=("json", "text"), default="text")
    ap.add_argument("--output", metavar="DIR", help=f"directory for reports and CSVs (default ${OUTPUT_ENV} or .)")
    ap.add_argument("--tol", type=float)
    ap.add_argument("--probes", type=int)
    ap.add_argument("--seed", type=int)
    mode = ap.add_mutually_exclusive_group()
    mode.add_argument("--reduced", dest="mode", action="store_const", const="reduced")
    mode.add_argument("--full", dest="mode", action="store_const", const="full")
    mode.add_argument("--both", dest="mode", action="store_const", const="both")
    ap.add_argument("--ic-grid", metavar="FILE", help="CSV of initial conditions (integrate)")
    ap.add_argument("--no-timestamp", action="store_true", help="omit the generated-at line")
    return ap


def _render(report, fmt, timestamp):
    if timestamp:
        report = {"generated": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds"),
                  **report}
    return to_json(report) + "\n" if fmt == "json" else to_text(report) + "\n"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.tol is not None and not args.tol > 0 or args.probes is not None and args.probes < 1:
        print("error: --tol must be positive and --probes >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        p = load(args.problem).override(tol=args.tol, probes=args.probes, seed=args.seed)
        if args.command == "integrate":
            code, report = cmd_integrate(p, args.mode or "both", args.output, args.ic_grid)
        else:
            code, report = COMMANDS[args.command](p)
    except (ProblemFileError, InputError, InvalidFlow) as exc:
        code, report = EXIT_INPUT, {"command": args.command, "error": str(exc),
                                    "kind": type(exc).__name__, "failures": ["input"]}
    except ConnredError as exc:
        code, report = EXIT_FAIL, {"command": args.command, "error": str(exc),
                                   "kind": type(exc).__name__, "failures": [type(exc).__name__]}
    text = _render(report, args.format, not args.no_timestamp)
    sys.stdout.write(text)
    report_dir = args.output or os.environ.get(OUTPUT_ENV)
    if report_dir:
        out = Path(report_dir)
        out.mkdir(parents=True, exist_ok=True)
        ext = "json" if args.format == "json" else "txt"
        (out / f"{_slug(Path(args.problem).stem)}_{args.command}.{ext}").write_text(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
