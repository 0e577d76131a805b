import argparse
import json
import sys
import time

import pandas as pd

from .coefficients import RangeType, coefficient_report, convert, format_value
from .constraints import DEFAULT_EPS_COND, normalize_all
from .dsl import parse_expr, read_program
from .errors import ParseError
from .oracle import OracleConfig, oracle_bounds
from .partition import dist_from_2x2
from .solver import (
    IntervalStatus,
    SearchConfig,
    answer_query,
    check_feasibility,
    infeasible_subset,
)
from .store import (
    interval_line,
    interval_record,
    load_distribution,
    parse_table,
    report_frame,
    report_records,
    results_document,
)


EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_INPUT = 2
EXIT_NUMERIC = 3


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="relcoef",
        description="Coefficients of relation between events: evaluate them on "
        "a distribution, convert between their ranges, and bound them over "
        "every distribution consistent with a set of constraints.",
    )
    subparsers = parser.add_subparsers(dest="command")
    subparsers.required = True

    ############################################################################
    ev = subparsers.add_parser(
        "eval", help="Report every coefficient of two events on one distribution."
    )
    ev.set_defaults(func=do_eval)

    g = ev.add_mutually_exclusive_group(required=True)
    g.add_argument(
        "--table",
        metavar="x,y,z,w",
        help="A 2x2 table: P(A&B), P(A&-B), P(-A&B), P(-A&-B).",
    )
    g.add_argument(
        "--dist",
        metavar="FILE",
        help="A distribution file (.json, .csv or .npy).",
    )
    ev.add_argument(
        "--events",
        help="Comma-separated event names, for files that don't name them.",
    )
    ev.add_argument("--a", help="First expression; default the first event.")
    ev.add_argument("--b", help="Second expression; default the second event.")
    ev.add_argument("--json", action="store_true", help="Print JSON.")

    ############################################################################
    conv = subparsers.add_parser("convert", help="Convert a value between ranges.")
    conv.set_defaults(func=do_convert)
    conv.add_argument("value", help="The value; 'inf' is allowed for O.")
    conv.add_argument("from_range", choices=["P", "O", "S"], metavar="FROM")
    conv.add_argument("to_range", choices=["P", "O", "S"], metavar="TO")

    ############################################################################
    solve = subparsers.add_parser(
        "solve", help="Bound every query of a constraint program."
    )
    solve.set_defaults(func=do_solve)
    _program_args(solve)
    _search_args(solve)
    solve.add_argument(
        "--jobs",
        type=int,
        default=1,
        help="Queries to solve at once; default %(default)s.",
    )
    solve.add_argument(
        "--witnesses",
        action="store_true",
        help="Include witness distributions in JSON output.",
    )
    solve.add_argument("--progress", action="store_true", help="Show progress bars.")

    ############################################################################
    check = subparsers.add_parser(
        "check", help="Decide whether a constraint program is satisfiable."
    )
    check.set_defaults(func=do_check)
    _program_args(check)
    _search_args(check)

    ############################################################################
    orc = subparsers.add_parser(
        "oracle",
        help="Sampled bounds for small programs (at most 4 events), to "
        "cross-check solve.",
    )
    orc.set_defaults(func=do_oracle)
    _program_args(orc)
    orc.add_argument(
        "--samples",
        type=int,
        default=10 ** 6,
        help="Points to sample; default %(default)s.",
    )
    orc.add_argument(
        "--seed", type=int, default=42, help="Random seed; default %(default)s."
    )
    orc.add_argument("--progress", action="store_true", help="Show progress bars.")

    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except ParseError as e:
        return _fail(f"{getattr(args, 'program', '<input>')}:{e}", EXIT_INPUT)
    except (ValueError, OSError) as e:
        return _fail(str(e), EXIT_INPUT)
    except RuntimeError as e:
        return _fail(str(e), EXIT_NUMERIC)
    except MemoryError:
        return _fail("out of memory", EXIT_NUMERIC)


def _fail(msg, code):
    print(f"relcoef: error: {msg}", file=sys.stderr)
    return code


def _program_args(p):
    p.add_argument(
        "program",
        help="A program file, or @name for a packaged example "
        "(transmission, frechet, chaining, independence, exchangeable).",
    )
    p.add_argument(
        "--eps-cond",
        type=float,
        default=DEFAULT_EPS_COND,
        help="Smallest probability a conditioning event may have; "
        "default %(default)s.",
    )
    p.add_argument("--json", action="store_true", help="Print JSON.")


def _search_args(p):
    p.add_argument(
        "--seed", type=int, default=42, help="Random seed; default %(default)s."
    )
    p.add_argument(
        "--starts",
        type=int,
        default=64,
        help="Starting points for nonconvex searches; default %(default)s.",
    )


################################################################################


def do_eval(args, parser):
    if args.table is not None:
        if args.events is not None:
            parser.error("--events only applies to --dist")
        dist = dist_from_2x2(*parse_table(args.table))
    else:
        events = args.events.split(",") if args.events else None
        dist = load_distribution(args.dist, events=events)

    a = parse_expr(args.a, dist.table) if args.a else None
    b = parse_expr(args.b, dist.table) if args.b else None
    report = coefficient_report(dist, a, b)

    if args.json:
        doc = {
            "events": list(dist.table.names),
            "coefficients": report_records(report),
        }
        print(json.dumps(doc, indent=2))
    else:
        print(report_frame(report).to_string())
    return EXIT_OK


def do_convert(args, parser):
    try:
        value = float(args.value)
    except ValueError:
        parser.error(f"not a number: {args.value!r}")
    out = convert(value, RangeType(args.from_range), RangeType(args.to_range))
    print(format_value(out))
    return EXIT_OK


def do_solve(args, parser):
    program = read_program(args.program, require_query=True)
    cfg = SearchConfig(starts=args.starts, seed=args.seed, progress=args.progress)

    t0 = time.perf_counter()
    answers = answer_query(program, cfg, eps_cond=args.eps_cond, n_jobs=args.jobs)
    elapsed_ms = round((time.perf_counter() - t0) * 1000)

    if args.json:
        records = [
            interval_record(a.query, a.interval, args.witnesses, a.error)
            for a in answers
        ]
        doc = results_document(args.program, args.seed, elapsed_ms, records)
        print(json.dumps(doc, indent=2))
    else:
        for a in answers:
            print(interval_line(a.query, a.interval, a.error))

    if any(a.interval is None for a in answers):
        return EXIT_NUMERIC
    if any(a.interval.status is IntervalStatus.INFEASIBLE for a in answers):
        return EXIT_INFEASIBLE
    return EXIT_OK


def do_check(args, parser):
    program = read_program(args.program)
    table = program.events
    constraints = normalize_all(program.declarations, table, args.eps_cond)
    cfg = SearchConfig(starts=args.starts, seed=args.seed)
    res = check_feasibility(constraints, table, cfg)

    message = res.message
    if res.status == "INFEASIBLE":
        culprits = infeasible_subset(program.declarations, table, args.eps_cond)
        message = "; ".join(str(d) for d in culprits)

    if args.json:
        doc = {
            "program": str(args.program),
            "status": res.status,
            "witness": None if res.witness is None else res.witness.p.tolist(),
            "message": message,
        }
        print(json.dumps(doc, indent=2))
    else:
        print(res.status)
        if res.witness is not None:
            w = res.witness
            print(pd.Series(w.p, index=w.atom_labels(), name="p").to_string())
        if message:
            print(message)

    return {"FEASIBLE": EXIT_OK, "INFEASIBLE": EXIT_INFEASIBLE}.get(
        res.status, EXIT_NUMERIC
    )


def do_oracle(args, parser):
    program = read_program(args.program, require_query=True)
    cfg = OracleConfig(samples=args.samples, seed=args.seed, progress=args.progress)

    t0 = time.perf_counter()
    results = oracle_bounds(program, cfg, eps_cond=args.eps_cond)
    elapsed_ms = round((time.perf_counter() - t0) * 1000)

    if args.json:
        records = []
        for r in results:
            rec = interval_record(r.query, r.interval, error=r.message)
            rec["accepted"] = r.accepted
            records.append(rec)
        doc = results_document(args.program, args.seed, elapsed_ms, records)
        print(json.dumps(doc, indent=2))
    else:
        for r in results:
            if r.interval is None:
                print(f"{r.query} = {r.message}")
            else:
                print(interval_line(r.query, r.interval))
        if results:
            print(f"{results[0].accepted} of {cfg.samples} samples accepted",
                  file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
