"""Command line interface: ``epinet <verb> --scenario FILE [--out PATH]``.

Exit codes: 0 success, 1 validation failure, 2 numerical failure, 3 usage error.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import equilibria, lyapunov, netflux, ngm, sensitivity
from .dynamics import integrate
from .errors import EpinetError, PreconditionError, ValidationError
from .scenario import dumps, load_scenario

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2, 3
SENSITIVITY_TARGETS = ("G", "phi", "beta", "nu", "sigma")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(text, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _info(text, to_stdout=False):
    print(text, file=sys.stdout if to_stdout else sys.stderr)


def _fmt(x):
    return repr(float(x))


def _need_population(sc):
    if sc.total_population is None:
        raise UsageError("scenario needs 'total_population' or 'initial' for this command")
    return float(sc.total_population)


def _prop1_checks(net):
    flux = netflux.build_flux(net)
    det, singular = netflux.check_singular(flux.scaled)
    out = [{"name": "scaled_flux_singular", "holds": singular, "value": det}]
    for r in (1e-6, 1.0, 1e3):
        ev, stable = netflux.shifted_stability(flux.scaled, r)
        out.append({"name": f"shifted_stable_r={r:g}", "holds": stable, "value": float(ev.real.max())})
    try:
        x = netflux.kernel_vector(flux.scaled)
        out.append({"name": "positive_kernel", "holds": True, "value": x.tolist()})
    except EpinetError as exc:
        out.append({"name": "positive_kernel", "holds": False, "value": str(exc)})
    return out


def _ngm_checks(net, params, nd):
    G_closed = ngm.ngm_from_phi(netflux.build_flux(net).phi, net.sigma, params)
    closed_err = float(np.abs(nd.G - G_closed).max())
    norm1 = float(np.abs(nd.G).sum(axis=0).max())
    offdiag = nd.r0 * np.eye(net.n) - nd.G
    offdiag = offdiag[~np.eye(net.n, dtype=bool)]
    mres = float(np.abs((nd.r0 * np.eye(net.n) - nd.G) @ nd.v).max())
    return [
        {"name": "closed_form_G", "holds": closed_err <= 1e-12, "value": closed_err},
        {"name": "r0_below_1norm", "holds": nd.r0 <= norm1 + 1e-12, "value": norm1},
        {"name": "singular_M_matrix", "holds": bool(np.all(offdiag <= 0)) and mres <= 1e-10 * max(nd.r0, 1e-300),
         "value": mres},
    ]


def cmd_check(sc, args):
    net, params = sc.network, sc.params
    nd = ngm.build_ngm(net, params)
    reports = equilibria.check_dfe_stability_conditions(net, params, nd)
    reports.append(equilibria.check_R_nonneg_sufficient(net, params))
    try:
        reports.append(equilibria.check_R_nonneg_necessary_bound(net, params))
    except PreconditionError as exc:
        _info(f"skipped r_nonneg_necessary_bound: {exc}", True)
    reports.extend(equilibria.check_ee_existence_conditions(net, params, nd))
    structural = _prop1_checks(net) + _ngm_checks(net, params, nd)

    _info(f"network: {net.n} zones, commuter matrix valid", True)
    for c in structural:
        _info(f"[{'ok' if c['holds'] else 'FAIL'}] {c['name']}", True)
    _info(f"R0 = {_fmt(nd.r0)}", True)
    for r in reports:
        mark = "holds" if r.holds else "fails"
        _info(f"[{mark}] {r.name}: {_fmt(r.lhs)} {r.relation} {_fmt(r.rhs)}  ({r.source})", True)
    doc = {"valid": True, "r0": nd.r0, "structure": structural, "conditions": [r.to_dict() for r in reports]}
    if args.out:
        _emit(dumps(doc), args.out)
    return EXIT_OK if all(c["holds"] for c in structural) else EXIT_INVALID


def cmd_simulate(sc, args):
    if sc.initial is None:
        raise UsageError("scenario has no 'initial' state to simulate from")
    ctl = dict(sc.controls)
    if args.t_end is not None:
        ctl["t_end"] = args.t_end
    if args.stride is not None:
        ctl["stride"] = args.stride
    traj = integrate(sc.initial, sc.network, sc.params, ctl["t_end"], stride=ctl["stride"], rtol=ctl["rtol"],
                     atol=ctl["atol"])
    if args.out:
        traj.to_csv(args.out)
    else:
        traj.to_csv(sys.stdout)
    total0 = traj.totals[0]
    drift = float(np.abs(traj.totals - total0).max())
    _info(f"t_end={_fmt(traj.times[-1])} samples={len(traj.times)} final_max_I={_fmt(traj.I[-1].max())} "
          f"conservation_drift={_fmt(drift)} relative={_fmt(drift / total0 if total0 else 0.0)}",
          bool(args.out))
    if args.lyapunov:
        flux = netflux.build_flux(sc.network)
        if args.lyapunov == "dfe":
            tr = lyapunov.trace_dfe(traj, flux, sc.params)
        else:
            nd = ngm.build_ngm(sc.network, sc.params)
            res = equilibria.solve_ee(sc.network, sc.params, total0, nd)
            if not res.found:
                raise UsageError("no endemic equilibrium found; cannot trace the endemic Lyapunov function")
            tr = lyapunov.trace_ee(traj, res.state, flux, sc.params)
        if args.trace_out:
            tr.to_csv(args.trace_out)
        _info(f"lyapunov[{args.lyapunov}]: {tr.verdict}", bool(args.out))
    return EXIT_OK


def cmd_r0(sc, args):
    nd = ngm.build_ngm(sc.network, sc.params)
    doc = {"zone_ids": list(sc.network.zone_ids), **nd.to_dict(),
           "jacobian_blocks_at_dfe": ngm.jacobian_blocks_at_dfe(sc.network, sc.params).summary()}
    _emit(dumps(doc), args.out)
    return EXIT_OK


def cmd_dfe(sc, args):
    total = _need_population(sc)
    dfe = equilibria.compute_dfe(sc.network, sc.params, total)
    nd = ngm.build_ngm(sc.network, sc.params)
    doc = {"zone_ids": list(sc.network.zone_ids), "total_population": total, "S": dfe.S.tolist(),
           "I": dfe.I.tolist(), "R": dfe.R.tolist(),
           "conditions": [r.to_dict() for r in equilibria.check_dfe_stability_conditions(sc.network, sc.params, nd)]}
    _emit(dumps(doc), args.out)
    return EXIT_OK


def cmd_ee(sc, args):
    total = _need_population(sc)
    nd = ngm.build_ngm(sc.network, sc.params)
    res = equilibria.solve_ee(sc.network, sc.params, total, nd)
    conds = equilibria.check_ee_existence_conditions(sc.network, sc.params, nd)
    try:
        conds.append(equilibria.check_R_nonneg_necessary_bound(sc.network, sc.params))
    except PreconditionError:
        pass
    doc = {"zone_ids": list(sc.network.zone_ids), "total_population": total, **res.to_dict(),
           "conditions": [r.to_dict() for r in conds]}
    if res.found:
        R_char = equilibria.recovered_from_infective(res.state.I, sc.network, sc.params)
        doc["recovered_characterization_gap"] = float(np.abs(R_char - res.state.R).max())
    _emit(dumps(doc), args.out)
    return EXIT_OK


def cmd_sensitivity(sc, args):
    rep = sensitivity.sensitivity_report(sc.network, sc.params, h=args.fd_step)
    sections = (args.target,) if args.target else SENSITIVITY_TARGETS
    doc = {"zone_ids": list(sc.network.zone_ids), **rep.to_dict(sections)}
    _emit(dumps(doc), args.out)
    if "phi" in sections:
        lines = [f"{'entry':>8} {'printed':>24} {'chain':>24} {'fd':>24}"]
        for s, j, a, b, c in rep.discrepancy_table():
            lines.append(f"{f'phi_{s + 1}{j + 1}':>8} {a:>24.17g} {b:>24.17g} {c:>24.17g}")
        for k, v in rep.max_deviations().items():
            lines.append(f"max relative deviation {k}: {v:.6g}")
        _info("\n".join(lines), bool(args.out))
    return EXIT_OK


COMMANDS = {
    "check": cmd_check,
    "simulate": cmd_simulate,
    "r0": cmd_r0,
    "dfe": cmd_dfe,
    "ee": cmd_ee,
    "sensitivity": cmd_sensitivity,
}
SWEEP_SUFFIX = {"simulate": ".csv"}


def _run_one(command, scenario_path, args):
    sc = load_scenario(scenario_path, tol=args.tol)
    return COMMANDS[command](sc, args)


def cmd_sweep(args):
    paths = list(args.scenarios) + ([args.scenario] if args.scenario else [])
    if not paths:
        raise UsageError("sweep needs at least one scenario file")
    if not args.out:
        raise UsageError("sweep needs --out DIR")
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    stems = [Path(p).stem for p in paths]
    if len(set(stems)) != len(stems):
        raise UsageError("sweep scenario file names must be distinct")
    workers = int(os.environ.get("EPINET_THREADS", "0") or 0) or min(len(paths), os.cpu_count() or 1)

    def job(path):
        sub = argparse.Namespace(**vars(args))
        sub.out = str(outdir / (Path(path).stem + SWEEP_SUFFIX.get(args.sweep_command, ".json")))
        # each scenario gets its own trace next to its output
        sub.trace_out = str(outdir / (Path(path).stem + ".trace.csv")) if args.lyapunov else None
        try:
            return path, _run_one(args.sweep_command, path, sub), ""
        except (EpinetError, UsageError) as exc:
            return path, _exit_code(exc), str(exc)
        except OSError as exc:
            return path, EXIT_USAGE, str(exc)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(job, paths))
    code = EXIT_OK
    for path, rc, msg in results:
        _info(f"{path}: exit {rc}" + (f" ({msg})" if msg else ""), True)
        code = max(code, rc)
    return code


def _exit_code(exc):
    if isinstance(exc, UsageError):
        return EXIT_USAGE
    return getattr(exc, "exit_code", EXIT_NUMERICAL)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario JSON file")
    common.add_argument("--out", help="output file (directory for sweep); stdout when omitted")
    common.add_argument("--tol", type=float, default=netflux.COLUMN_SUM_TOL,
                        help="column-sum tolerance for the commuter matrix (default 1e-12)")

    parser = _Parser(prog="epinet", description="Network-based SIR model analyses.")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)
    sub.add_parser("check", parents=[common], help="validate a scenario and evaluate all conditions")
    p = sub.add_parser("simulate", parents=[common], help="integrate and write a trajectory CSV")
    p.add_argument("--t-end", type=float)
    p.add_argument("--stride", type=float)
    p.add_argument("--lyapunov", choices=("dfe", "ee"), help="evaluate a Lyapunov function along the run")
    p.add_argument("--trace-out", help="CSV path for the Lyapunov trace")
    sub.add_parser("r0", parents=[common], help="next-generation matrix and R0")
    sub.add_parser("dfe", parents=[common], help="disease-free equilibrium")
    sub.add_parser("ee", parents=[common], help="endemic equilibrium")
    p = sub.add_parser("sensitivity", parents=[common], help="sensitivity of R0")
    p.add_argument("--target", choices=SENSITIVITY_TARGETS)
    p.add_argument("--fd-step", type=float, default=1e-6)
    p = sub.add_parser("sweep", parents=[common], help="run one command over many scenarios concurrently")
    p.add_argument("--command", dest="sweep_command", choices=sorted(COMMANDS), default="r0")
    p.add_argument("scenarios", nargs="*")
    p.add_argument("--target", choices=SENSITIVITY_TARGETS)
    p.add_argument("--fd-step", type=float, default=1e-6)
    p.add_argument("--t-end", type=float)
    p.add_argument("--stride", type=float)
    p.add_argument("--lyapunov", choices=("dfe", "ee"), help="traces go to <stem>.trace.csv in --out")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.verb == "sweep":
            return cmd_sweep(args)
        if not args.scenario:
            raise UsageError("--scenario is required")
        try:
            sc = load_scenario(args.scenario, tol=args.tol)
        except OSError as exc:
            raise UsageError(f"cannot read scenario: {exc}") from exc
        return COMMANDS[args.verb](sc, args)
    except UsageError as exc:
        print(f"epinet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"epinet: invalid input: {exc}", file=sys.stderr)
        for v in exc.violations:
            print(f"  - {v}", file=sys.stderr)
        return exc.exit_code
    except EpinetError as exc:
        print(f"epinet: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"epinet: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
