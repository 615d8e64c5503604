"""Command line front end: analyze | solve | verify | example.

Exit codes: 0 ok, 1 verification failure, 2 input error,
3 irregular system or non-regressive step.
"""

import argparse
import json
import sys

import numpy as np

from . import linalg
from .chain import ChainOptions, build_chain, verify_chain_identities
from .decouple import (
    Decoupling,
    assemble,
    hidden_constraint_defect,
    residual,
    solve_forward,
)
from .errors import (
    ExpressionError,
    IrregularSystemError,
    NonRegressiveStepError,
    SystemFileError,
    TransversalityError,
    TsdaeError,
)
from .oracle import cross_validate
from .subspaces import check_transversality
from .systemio import (
    FIXTURES,
    load_system,
    read_trajectory,
    write_trajectory_csv,
    write_trajectory_json,
)

EXIT_OK = 0
EXIT_VERIFY = 1
EXIT_INPUT = 2
EXIT_IRREGULAR = 3


def _merge_options(options: ChainOptions, args) -> ChainOptions:
    if args.tol_rank is not None:
        options.tol_rank = args.tol_rank
    if args.tol_proj is not None:
        options.tol_proj = args.tol_proj
    if args.max_index is not None:
        options.max_index = args.max_index
    if args.cond_max is not None:
        options.cond_max = args.cond_max
    return options


def _monomial_fit(grid, dets):
    """Try det(t) = c * t^p with integer p; None when nothing fits."""
    ts = [float(grid.t(k)) for k in range(len(dets))]
    d0 = float(dets[0])
    if d0 == 0.0 or any(float(d) == 0.0 for d in dets) or ts[0] <= 0:
        return None
    for p in range(-6, 7):
        c = d0 / ts[0] ** p
        ok = all(abs(float(d) - c * t**p) <= 1e-9 * max(1.0, abs(float(d)))
                 for d, t in zip(dets, ts))
        if ok:
            return c, p
    return None


def _analyze_payload(system, options, rational):
    chain = build_chain(system, options)
    payload = {
        "n": system.n,
        "m": system.m,
        "grid": {"kind": system.grid.kind, "count": len(system.grid)},
        "mode": "rational" if rational else "float",
        "strategy": options.strategy,
        "status": chain.status,
    }
    interior = system.grid.last_index - 1
    reports = [check_transversality(system.A(k + 1), system.B(k),
                                    options.tol_rank, system.exact)
               for k in range(interior + 1)]
    payload["transversality"] = {
        "ok": all(r.ok for r in reports),
        "dim_ker_A_sigma": reports[0].dim_kernel,
        "rank_B": reports[0].rank_b,
        "indices": interior + 1,
    }
    if not chain.regular:
        payload["irregular"] = {"level": chain.level, "reason": chain.reason}
        payload["ranks"] = chain.ranks
        return chain, payload
    nu = chain.nu
    payload["index"] = nu
    payload["ranks"] = chain.ranks[:nu]
    payload["cond_G_nu"] = chain.cond_G_nu
    top = chain.stages[nu]
    dets = [linalg.det(top.G[k], exact=chain.exact) for k in range(top.last + 1)]
    payload["det_G_nu"] = {
        "values": [float(d) for d in dets],
        "min_abs": min(abs(float(d)) for d in dets),
    }
    fit = _monomial_fit(system.grid, dets)
    if fit is not None:
        payload["det_G_nu"]["fit"] = {"c": fit[0], "p": fit[1]}
    identities = verify_chain_identities(chain, options.tol_proj)
    payload["identities"] = {
        "max_violation": identities.max_violation(),
        "count": len(identities.entries),
        "a4": identities.a4_note,
    }
    if nu >= 1:
        dec = assemble(chain, options.cond_max)
        conds = []
        for i in range(dec.inherent.base_last + 1):
            mu = float(system.grid.mu(i))
            lhs = np.eye(system.m) - mu * linalg.as_float(dec.inherent.K[i])
            conds.append(linalg.cond(lhs))
        payload["regressivity"] = {
            "ok": all(c <= options.cond_max for c in conds),
            "max_cond": max(conds),
            "steps": len(conds),
        }
    else:
        payload["note"] = "index 0 (implicit ODE): no decoupling needed"
    return chain, payload


def _analyze_text(payload) -> str:
    lines = [
        f"system: n={payload['n']} m={payload['m']} "
        f"grid={payload['grid']['kind']}({payload['grid']['count']} points) "
        f"mode={payload['mode']} strategy={payload['strategy']}",
        f"transversality: {'ok' if payload['transversality']['ok'] else 'FAILED'} "
        f"at {payload['transversality']['indices']} interior indices "
        f"(dim ker A^sigma = {payload['transversality']['dim_ker_A_sigma']}, "
        f"rank B = {payload['transversality']['rank_B']})",
    ]
    if payload["status"] != "regular":
        lines.append(f"status: irregular at level {payload['irregular']['level']}: "
                     f"{payload['irregular']['reason']}")
        return "\n".join(lines)
    nu = payload["index"]
    lines.append(f"r: {payload['ranks']}")
    if nu == 0:
        lines.append("index: 0 (implicit ODE)")
    else:
        lines.append(f"index: {nu}")
    det_info = payload["det_G_nu"]
    if "fit" in det_info:
        c, p = det_info["fit"]["c"], det_info["fit"]["p"]
        c_text = format(c, "g")
        lines.append(f"det G_{nu} = {c_text}*t^{p} (monomial fit, "
                     "checked at all sampled points)")
    else:
        lines.append(f"det G_{nu}: min |det| = {det_info['min_abs']:.3e}")
    lines.append(f"condition of G_{nu}: max {payload['cond_G_nu']:.3e}")
    lines.append(f"chain identities: max violation "
                 f"{payload['identities']['max_violation']:.3e} over "
                 f"{payload['identities']['count']} identity families")
    lines.append(payload["identities"]["a4"])
    if "regressivity" in payload:
        reg = payload["regressivity"]
        state = "ok" if reg["ok"] else "FAILED"
        lines.append(f"regressivity of I - mu*K: {state} at {reg['steps']} "
                     f"step indices (max cond {reg['max_cond']:.3e})")
    if "note" in payload:
        lines.append(payload["note"])
    return "\n".join(lines)


def cmd_analyze(args) -> int:
    system, options, _ = load_system(args.system, exact=args.rational)
    options = _merge_options(options, args)
    chain, payload = _analyze_payload(system, options, args.rational)
    text = json.dumps(payload, indent=2) if args.format == "json" \
        else _analyze_text(payload)
    _write_output(args.output, text)
    if not chain.regular:
        return EXIT_IRREGULAR
    return EXIT_OK


def _parse_vector(text, length, name):
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise SystemFileError(f"{name}: {exc}") from exc
    if len(values) != length:
        raise SystemFileError(
            f"{name} has dimension {len(values)}, expected {length}")
    return np.array(values)


def cmd_solve(args) -> int:
    system, options, _ = load_system(args.system, exact=False)
    options = _merge_options(options, args)
    chain = build_chain(system, options)
    if not chain.regular:
        raise IrregularSystemError(chain.reason, chain.level)
    if chain.nu == 0:
        print("index 0: use an ODE solver", file=sys.stderr)
        return EXIT_IRREGULAR
    dec = assemble(chain, options.cond_max)
    u0 = x0 = None
    if args.x0 is not None:
        x0 = _parse_vector(args.x0, system.n, "x0")
    elif args.u0 is not None:
        u0 = _parse_vector(args.u0, system.m, "u0")
    else:
        raise SystemFileError("provide --u0 or --x0")
    solution = solve_forward(dec, u0_raw=u0, x0=x0, method=args.method)
    if chain.nu >= 3:
        print(f"note: index {chain.nu} >= 3 is experimental", file=sys.stderr)
    if args.output in (None, "-"):
        _write_solution(sys.stdout, system, solution, args.format)
    else:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            _write_solution(fh, system, solution, args.format)
    window = solution.x_indices
    if window:
        print(f"defined window: grid indices {window[0]}..{window[-1]} "
              f"({len(window)} points)", file=sys.stderr)
    print(f"max residual {solution.max_residual():.3e}", file=sys.stderr)
    return EXIT_OK


def _write_solution(fh, system, solution, fmt):
    if fmt == "json":
        write_trajectory_json(fh, system, solution)
    else:
        write_trajectory_csv(fh, system, solution)


def cmd_verify(args) -> int:
    system, options, _ = load_system(args.system, exact=False)
    options = _merge_options(options, args)
    rows = read_trajectory(args.solution, system.n, system.m)
    chain = build_chain(system, options)
    if not chain.regular:
        raise IrregularSystemError(chain.reason, chain.level)
    if chain.nu == 0:
        print("index 0: nothing to verify with this tool", file=sys.stderr)
        return EXIT_IRREGULAR
    dec = assemble(chain, options.cond_max)

    # map row times onto grid indices, demanding consecutive coverage
    indices = []
    for t, _, _ in rows:
        hits = [k for k in range(len(system.grid))
                if abs(float(system.grid.t(k)) - t) <= 1e-9 * max(1.0, abs(t))]
        if len(hits) != 1:
            raise SystemFileError(f"row time {t} does not match a grid point")
        indices.append(hits[0])
    for a, b in zip(indices, indices[1:]):
        if b != a + 1:
            raise SystemFileError("solution rows are not consecutive grid points")

    x_traj = {k: x for k, (_, x, _) in zip(indices, rows)}
    u_rows = {k: u for k, (_, _, u) in zip(indices, rows)}

    failures = []
    worst = {"residual": 0.0, "hidden": 0.0, "u_consistency": 0.0}
    for k in indices[:-1]:
        r = residual(system, x_traj, k)
        worst["residual"] = max(worst["residual"], r)
        if r > args.tol_residual:
            failures.append(f"row at t={float(system.grid.t(k))}: residual {r:.3e}")
        if k <= dec.inherent.base_last:
            h = hidden_constraint_defect(dec, x_traj, k)
            worst["hidden"] = max(worst["hidden"], h)
            if h > args.tol_hidden:
                failures.append(
                    f"row at t={float(system.grid.t(k))}: hidden constraint {h:.3e}")
    for k in indices:
        if k <= chain.stages[chain.nu - 1].last:
            u_ref = linalg.as_float(system.B(k)) \
                @ linalg.as_float(chain.stages[chain.nu - 1].Pi[k]) @ x_traj[k]
            dev = linalg.norm_inf(u_rows[k] - u_ref) / (1.0 + linalg.norm_inf(u_ref))
            worst["u_consistency"] = max(worst["u_consistency"], dev)

    class _Shim:
        x = x_traj
        x_indices = sorted(x_traj)
        residual = {}

    oracle_dev = None
    if len(indices) >= 3:
        report = cross_validate(system, _Shim, tol=args.tol_oracle,
                                cond_max=options.cond_max)
        oracle_dev = report.max_deviation
        if report.max_deviation > args.tol_oracle:
            failures.append(f"oracle deviation {report.max_deviation:.3e} "
                            f"> {args.tol_oracle:.1e}")

    print(f"rows: {len(rows)} (grid indices {indices[0]}..{indices[-1]})")
    print(f"max residual {worst['residual']:.3e} (tol {args.tol_residual:.1e})")
    print(f"max hidden-constraint defect {worst['hidden']:.3e} "
          f"(tol {args.tol_hidden:.1e})")
    if oracle_dev is not None:
        print(f"oracle max deviation {oracle_dev:.3e} (tol {args.tol_oracle:.1e})")
    print(f"u-column consistency {worst['u_consistency']:.3e}")
    if failures:
        for line in failures:
            print("FAIL " + line)
        return EXIT_VERIFY
    print("verification passed")
    return EXIT_OK


def cmd_example(args) -> int:
    doc = FIXTURES[args.name]()
    text = json.dumps(doc, indent=2) + "\n"
    _write_output(args.output, text.rstrip("\n"))
    return EXIT_OK


def _write_output(path, text) -> None:
    if path in (None, "-"):
        print(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")


def _add_tolerance_flags(parser):
    parser.add_argument("--tol-rank", type=float, default=None,
                        help="relative singular-value threshold for rank decisions")
    parser.add_argument("--tol-proj", type=float, default=None,
                        help="projector identity tolerance (default 1e-10)")
    parser.add_argument("--max-index", type=int, default=None,
                        help="give up beyond this chain level (default 8)")
    parser.add_argument("--cond-max", type=float, default=None,
                        help="condition-number ceiling for invertibility (default 1e12)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsdae",
        description="Projector-chain analysis and decoupling of linear "
                    "time-varying dynamic-algebraic equations on discrete "
                    "time scales.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="chain construction and index report")
    p.add_argument("system", help="system description file (JSON)")
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--rational", action="store_true",
                   help="exact arithmetic (rational-valued inputs only)")
    p.add_argument("-o", "--output", default=None)
    _add_tolerance_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("solve", help="decouple and step forward")
    p.add_argument("system")
    p.add_argument("--u0", default=None,
                   help="comma-separated initial value for the dynamic part")
    p.add_argument("--x0", default=None,
                   help="comma-separated consistent full initial state")
    p.add_argument("--method", choices=["coupled", "sweep"], default="coupled")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("-o", "--output", default=None)
    _add_tolerance_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="re-check a trajectory file")
    p.add_argument("system")
    p.add_argument("solution")
    p.add_argument("--tol-residual", type=float, default=1e-8)
    p.add_argument("--tol-hidden", type=float, default=1e-9)
    p.add_argument("--tol-oracle", type=float, default=1e-8)
    _add_tolerance_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("example", help="write the bundled example system file")
    p.add_argument("--name", choices=sorted(FIXTURES), default="paper_example")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_example)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (SystemFileError, ExpressionError, FileNotFoundError,
            json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (IrregularSystemError, NonRegressiveStepError,
            TransversalityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IRREGULAR
    except TsdaeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
