"""Command line interface: ``lmtiling {verify,search,bounds,psi,ball,groups}``.

Exit codes: 0 success (for ``verify``: a valid tiling), 2 usage or parameter
error, 3 ``verify`` found no tiling, 4 ``search`` ran out of node budget.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from . import __version__
from .ball import BallParams, ball_size_general, iter_ball_points
from .bounds import InapplicableError, theorem_1_3_threshold
from .groups import (
    GroupSpec,
    enumerate_abelian_groups,
    factorize,
    rank_filter_reason,
    sylow_rank,
)
from .psi import lemma_audit, psi_table
from .search import Certificate, SearchOptions, resume_search, search_dimension, search_in_group
from .verify import Instance, verify

OUTPUT_DIR_ENV = "LMTILING_OUTPUT_DIR"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_TILING = 3
EXIT_BUDGET = 4


class UsageError(Exception):
    pass


def _manifest(args: argparse.Namespace, argv: Sequence[str]) -> Dict[str, Any]:
    params = {k: v for k, v in vars(args).items() if k not in ("func", "format", "command")}
    return {
        "subcommand": args.command,
        "parameters": params,
        "tool_version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "argv": list(argv),
    }


def _emit(args: argparse.Namespace, payload: Dict[str, Any], text: str) -> None:
    if args.format == "json":
        payload = {"manifest": args.manifest, **payload}
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        sys.stdout.write(text.rstrip("\n") + "\n")


def _instance(args: argparse.Namespace) -> Instance:
    G = GroupSpec.parse(args.group)
    T = G.parse_element_list(args.set)
    return Instance(BallParams(args.n, args.wt, args.k1, args.k2), G, tuple(T))


# -- subcommands ------------------------------------------------------------


def cmd_verify(args: argparse.Namespace) -> int:
    inst = _instance(args)
    if args.method in ("groupring", "both") and args.wt != 2:
        raise UsageError("--method groupring needs --wt 2")
    reports = verify(inst, args.method)
    verdict = all(r.verdict for r in reports)
    if len({r.verdict for r in reports}) > 1:
        raise AssertionError("verification routes disagree; this is a bug")
    lines = [f"instance: {inst.to_json()}"]
    for r in reports:
        lines.append(f"{r.method}: {'tiling' if r.verdict else 'not a tiling'}  checked={r.stats['checked']}")
        if r.witness:
            lines.append(f"  witness: {r.witness}")
    _emit(
        args,
        {"instance": inst.to_json(), "verdict": verdict, "reports": [r.to_json() for r in reports]},
        "\n".join(lines),
    )
    return EXIT_OK if verdict else EXIT_NOT_TILING


def cmd_search(args: argparse.Namespace) -> int:
    opts = SearchOptions(
        symmetry_reduction=not args.no_symmetry,
        rank_filter=not args.no_rank_filter,
        parallel_width=args.jobs,
        node_budget=args.budget,
        report_all=not args.first,
    )
    if args.resume:
        cert = Certificate.from_json(json.loads(Path(args.resume).read_text()))
        cert.options.parallel_width = args.jobs
        outcome = resume_search(cert, args.budget)
    else:
        if args.n is None or args.k1 is None or args.k2 is None:
            raise UsageError("search needs --n, --k1 and --k2 (or --resume)")
        if args.group:
            outcome = search_in_group(GroupSpec.parse(args.group), args.n, args.k1, args.k2, opts)
        else:
            outcome = search_dimension(args.n, args.k1, args.k2, opts)
    cert_json = {"manifest": args.manifest, **outcome.certificate.to_json()}
    out = args.out
    if out is None and os.environ.get(OUTPUT_DIR_ENV):
        c = outcome.certificate
        out = str(Path(os.environ[OUTPUT_DIR_ENV]) / f"certificate_n{c.n}_k{c.k1}_{c.k2}.json")
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(json.dumps(cert_json, indent=2) + "\n")
    c = cert_json
    lines = [
        f"n={c['parameters']['n']} k1={c['parameters']['k1']} k2={c['parameters']['k2']} "
        f"order={c['parameters']['order']}: {c['status']}",
    ]
    for g in c["groups"]:
        extra = f" ({g['filter_reason']})" if g["filter_reason"] else ""
        lines.append(
            f"  G={g['group']:<12} {g['status']}{extra} nodes={g['nodes']} "
            f"collision={g['prunes']['collision']} symmetry={g['prunes']['symmetry']} solutions={len(g['solutions'])}"
        )
        for sol in g["solutions"]:
            lines.append("    T = {" + ", ".join(sol) + "}")
    lines.append(f"  total nodes={c['totals']['nodes']} wall={c['wall_time_s']:.3f}s")
    if out:
        lines.append(f"  certificate written to {out}")
    if args.format == "json":
        json.dump(cert_json, sys.stdout, indent=2)
        sys.stdout.write("\n")
    else:
        sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_BUDGET if outcome.status == "budget-exceeded" else EXIT_OK


def _bounds_row(k1: int, k2: int, M: Optional[int]) -> Dict[str, Any]:
    try:
        return theorem_1_3_threshold(k1, k2, M).to_json()
    except InapplicableError as exc:
        return {"k1": k1, "k2": k2, "inapplicable": str(exc)}


def cmd_bounds(args: argparse.Namespace) -> int:
    if args.grid:
        k1max, k2max = args.grid
        rows = [
            _bounds_row(k1, k2, None) for k1 in range(1, k1max + 1) for k2 in range(0, min(k2max, k1 - 1) + 1)
        ]
    else:
        if args.k1 is None or args.k2 is None:
            raise UsageError("bounds needs --k1 and --k2, or --grid")
        try:
            rows = [theorem_1_3_threshold(args.k1, args.k2, args.m).to_json()]
        except InapplicableError as exc:
            raise UsageError(str(exc)) from None
    header = f"{'k1':>3} {'k2':>3} {'K+1':>4} {'p':>3} {'M':>3} {'A':>4}  {'B':<26} {'B~':>10} {'N13':>5} {'N14':>5}"
    lines = [header]
    for r in rows:
        if "inapplicable" in r:
            lines.append(f"{r['k1']:>3} {r['k2']:>3}  -- {r['inapplicable']}")
            continue
        lines.append(
            f"{r['k1']:>3} {r['k2']:>3} {r['K+1']:>4} {r['p']:>3} {r['M']:>3} {r['A']:>4}  "
            f"{r['B']['text']:<26} {r['B']['decimal']:>10.4f} {r['N_theorem13']:>5} {r['N_corollary14']:>5}"
        )
    _emit(args, {"rows": rows}, "\n".join(lines))
    return EXIT_OK


def cmd_psi(args: argparse.Namespace) -> int:
    inst = _instance(args)
    if args.wt != 2:
        raise UsageError("psi diagnostics need --wt 2")
    K = inst.params.K
    ms = args.m if args.m else list(range(1, 2 * K + 3))
    table = psi_table(inst, ms)
    payload: Dict[str, Any] = {"table": table.to_json()}
    lines = [f"instance: {inst.to_json()}"]
    for m, row in sorted(table.counts.items()):
        cells = " ".join(f"{k}:{v}" for k, v in row.items() if v)
        lines.append(f"m={m:>3} total={sum(row.values())}  {cells}")
    if args.audit:
        report = lemma_audit(inst)
        payload["audit"] = report.to_json()
        lines.append(f"audit ({'advisory: not a tiling' if report.advisory else 'verified tiling'}):")
        for c in report.checks:
            state = "skip" if c.skipped else ("pass" if c.passed else "FAIL")
            note = f" ({c.skipped})" if c.skipped else f" checked={c.checked} violations={c.violation_count}"
            lines.append(f"  {c.lemma:<5} {state}{note}")
    _emit(args, payload, "\n".join(lines))
    return EXIT_OK


def cmd_ball(args: argparse.Namespace) -> int:
    p = BallParams(args.n, args.wt, args.k1, args.k2)
    size = ball_size_general(p.n, p.wt, p.k1, p.k2)
    payload: Dict[str, Any] = {"params": p.to_json(), "size": size}
    if args.points:
        payload["points"] = [list(v) for v in iter_ball_points(p)]
    if args.format == "json":
        _emit(args, payload, "")
        return EXIT_OK
    sys.stdout.write(f"size={size}\n")
    if args.points:
        w = csv.writer(sys.stdout, lineterminator="\n")
        for v in iter_ball_points(p):
            w.writerow(v)
    return EXIT_OK


def cmd_groups(args: argparse.Namespace) -> int:
    if args.order < 1:
        raise UsageError("order must be >= 1")
    primes = [p for p, _ in factorize(args.order)]
    rows = []
    for G in enumerate_abelian_groups(args.order):
        row: Dict[str, Any] = {
            "group": str(G),
            "factors": list(G.factors),
            "sylow_ranks": {str(p): sylow_rank(G, p) for p in primes},
        }
        if args.k1 is not None and args.k2 is not None:
            reason = rank_filter_reason(G, args.k1, args.k2)
            row["passes_rank_filter"] = reason is None
            row["filter_reason"] = reason
        rows.append(row)
    lines = [f"order {args.order} = " + " * ".join(f"{p}^{e}" for p, e in factorize(args.order))]
    for r in rows:
        ranks = " ".join(f"rank_{p}={v}" for p, v in r["sylow_ranks"].items())
        verdict = ""
        if "passes_rank_filter" in r:
            verdict = "  passes" if r["passes_rank_filter"] else f"  filtered: {r['filter_reason']}"
        lines.append(f"  {r['group']:<14} {ranks}{verdict}")
    _emit(args, {"order": args.order, "factorization": factorize(args.order), "groups": rows}, "\n".join(lines))
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def _add_instance_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--group", required=True, help='group as invariant factors, e.g. "37" or "2x4"')
    p.add_argument("--set", required=True, help='generators, e.g. "1,10,26" or "(0,1),(1,3)"')
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--wt", type=int, default=2)
    p.add_argument("--k1", type=int, required=True)
    p.add_argument("--k2", type=int, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lmtiling", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"lmtiling {__version__}")
    parser.add_argument("--format", choices=["json", "text"], default=None, help="output format")
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["json", "text"], default=argparse.SUPPRESS, help="output format")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", parents=[common], help="check whether (G, T) is a lattice tiling")
    _add_instance_args(p)
    p.add_argument("--method", choices=["bijection", "groupring", "both"], default="both")
    p.set_defaults(func=cmd_verify, default_format="json")

    p = sub.add_parser("search", parents=[common], help="exhaustive search over all abelian groups of the forced order")
    p.add_argument("--n", type=int)
    p.add_argument("--k1", type=int)
    p.add_argument("--k2", type=int)
    p.add_argument("--group", help="restrict to one group")
    p.add_argument("--no-symmetry", action="store_true", help="disable unit-orbit reduction of t_1")
    p.add_argument("--no-rank-filter", action="store_true", help="disable the Sylow rank filter")
    p.add_argument("--jobs", type=int, default=0, help="worker processes (0 = sequential)")
    p.add_argument("--budget", type=int, help="node budget; exit 4 with a resumable certificate when hit")
    p.add_argument("--first", action="store_true", help="stop each group at its first solution")
    p.add_argument("--out", help=f"certificate path (default dir from ${OUTPUT_DIR_ENV})")
    p.add_argument("--resume", help="continue from a budget-exceeded certificate")
    p.set_defaults(func=cmd_search, default_format="text")

    p = sub.add_parser("bounds", parents=[common], help="nonexistence thresholds")
    p.add_argument("--k1", type=int)
    p.add_argument("--k2", type=int)
    p.add_argument("--m", type=int, help="override M (default: largest valid)")
    p.add_argument("--grid", type=int, nargs=2, metavar=("K1MAX", "K2MAX"))
    p.set_defaults(func=cmd_bounds, default_format="text")

    p = sub.add_parser("psi", parents=[common], help="psi counters and lemma audit")
    _add_instance_args(p)
    p.add_argument("--m", type=int, nargs="+", help="multipliers to tabulate (default 1..2K+2)")
    p.add_argument("--audit", action="store_true")
    p.set_defaults(func=cmd_psi, default_format="json")

    p = sub.add_parser("ball", parents=[common], help="size and points of B(n, wt, k1, k2)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--wt", type=int, required=True)
    p.add_argument("--k1", type=int, required=True)
    p.add_argument("--k2", type=int, required=True)
    p.add_argument("--points", action="store_true", help="also print the points as CSV rows")
    p.set_defaults(func=cmd_ball, default_format="text")

    p = sub.add_parser("groups", parents=[common], help="abelian groups of a given order")
    p.add_argument("order", type=int)
    p.add_argument("--k1", type=int)
    p.add_argument("--k2", type=int)
    p.set_defaults(func=cmd_groups, default_format="text")
    return parser


def _error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = args.default_format
    del args.default_format
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    args.manifest = _manifest(args, argv)
    try:
        return args.func(args)
    except (UsageError, ValueError, OverflowError) as exc:
        _error("usage", str(exc))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
