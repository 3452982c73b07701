"""Command-line front end.

Subcommands:

    check FILE                 static checks and classification
    preprocess FILE -o OUT     compile the query family to JSON
    run FILE --stream SRC      tick loop, one JSON line per tick
    oracle FILE --at T         brute-force hans/sans for debugging

Exit codes: 0 ok, 1 usage, 2 parse/validation, 3 limits, 4 runtime.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Iterable, Optional

from .errors import (
    BudgetExceededError,
    HypologError,
    LimitExceededError,
    NotEligibleError,
    NotStratifiedError,
    ParseError,
    SignatureError,
    SortError,
    StreamError,
    UnsafeRuleError,
)
from .online import AnswerTuple, EvalState, TickDelta
from .oracle import GroundWorld, enumerate_hans, enumerate_sans
from .parser import ParseResult, iter_stream_blocks, parse_program
from .preprocess import (
    QueryFamily,
    build_query_family,
    dump_family,
    load_family,
)
from .program import Query, validate_program
from .resolution import SearchLimits
from .stratify import check_t_stratification
from .terms import Substitution, TimePoint

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INVALID = 2
EXIT_LIMITS = 3
EXIT_RUNTIME = 4

_PARSE_ERRORS = (
    ParseError, SignatureError, SortError, UnsafeRuleError, StreamError,
    NotEligibleError, NotStratifiedError,
)
_LIMIT_ERRORS = (LimitExceededError, BudgetExceededError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _subst_json(subst: Substitution) -> dict:
    out = {}
    for var, term in subst.items():
        out[var] = term.value if isinstance(term, TimePoint) else str(term)
    return out


def _tuple_json(tup: AnswerTuple) -> dict:
    return {
        "query": tup.query_id,
        "theta": _subst_json(tup.subst),
        "evidence": sorted(str(l) for l in tup.evidence),
        "hypotheses": sorted(str(l) for l in tup.pending),
        "born_at": tup.born_at,
    }


def _delta_json(delta: TickDelta, state: Optional[EvalState] = None) -> dict:
    out = {
        "tick": delta.tick,
        "definite": [_tuple_json(t) for t in delta.new_definite],
        "supported": [_tuple_json(t) for t in delta.new_supported],
        "updated": [_tuple_json(t) for t in delta.updated],
        "discarded": [
            dict(_tuple_json(t), reason=reason)
            for t, reason in delta.discarded
        ],
    }
    if state is not None:
        out["state"] = {
            qid: [
                _tuple_json(t)
                for t in sorted(state.tuples(qid), key=str)
            ]
            for qid in sorted(state.family.records)
        }
    return out


def _emit(data: dict, stream=None) -> None:
    stream = stream or sys.stdout
    stream.write(json.dumps(data, sort_keys=True) + "\n")
    stream.flush()


def _fail(exc: Exception, code: int) -> int:
    payload = {"error": {"type": type(exc).__name__, "message": str(exc)}}
    span = getattr(exc, "span", None)
    if span is not None:
        payload["error"]["span"] = str(span)
    diagnosis = getattr(exc, "diagnosis", None)
    if diagnosis is not None:
        payload["error"]["diagnosis"] = diagnosis
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def _load_program(path: str) -> ParseResult:
    with open(path, encoding="utf-8") as handle:
        return parse_program(handle.read(), filename=path)


def _single_query(result: ParseResult) -> Query:
    if not result.queries:
        raise ParseError("the program declares no #query")
    if len(result.queries) > 1:
        raise ParseError(
            f"expected exactly one #query, found {len(result.queries)}"
        )
    return result.queries[0]


def _limits(args) -> SearchLimits:
    return SearchLimits(max_depth=args.max_depth, max_nodes=args.max_nodes)


def _universe(args) -> list[str]:
    if not args.universe:
        return []
    return [c.strip() for c in args.universe.split(",") if c.strip()]


# ---------------------------------------------------------------------------
# Subcommands

def _cmd_check(args) -> int:
    result = _load_program(args.file)
    classification = validate_program(
        result.program,
        result.queries[0] if result.queries else None,
    )
    report = check_t_stratification(result.program)
    payload = {
        "safe": classification.safe,
        "edb": sorted(classification.edb_predicates),
        "idb": sorted(classification.idb_predicates),
        "connected": classification.connected,
        "nonrecursive": classification.nonrecursive,
        "negation": classification.has_negation,
        "queries": [str(q.goal) for q in result.queries],
        "stratification": {
            "stratified": report.stratified,
            "strata": dict(sorted(report.strata.items())),
            "counterexample": (
                list(report.counterexample) if report.counterexample else None
            ),
        },
    }
    if not classification.nonrecursive:
        payload["recursive_cycle"] = list(classification.recursive_cycle)
    if not classification.connected:
        payload["unconnected_rules"] = list(classification.unconnected_rules)
    if args.json:
        _emit(payload)
    else:
        print(f"predicates: {len(result.program.signature)} "
              f"(EDB {', '.join(payload['edb']) or '-'}; "
              f"IDB {', '.join(payload['idb']) or '-'})")
        print(f"connected: {payload['connected']}")
        print(f"nonrecursive: {payload['nonrecursive']}")
        print(f"negation: {payload['negation']}")
        print(f"T-stratified: {report.stratified}")
        if report.counterexample:
            print("counterexample: " + "  ".join(report.counterexample))
        for q in payload["queries"]:
            print(f"query: {q}")
    return EXIT_OK


def _build_family(args, result: ParseResult) -> QueryFamily:
    query = _single_query(result)
    return build_query_family(
        query,
        mode=args.mode,
        limits=_limits(args),
        universe=_universe(args),
        allow_unstratified=getattr(args, "allow_unstratified", False),
    )


def _cmd_preprocess(args) -> int:
    result = _load_program(args.file)
    family = _build_family(args, result)
    text = dump_family(family)
    if args.output == "-":
        sys.stdout.write(text + "\n")
    else:
        with open(args.output, "w", encoding="utf-8") as handle:
            handle.write(text + "\n")
    return EXIT_OK


def _cmd_run(args) -> int:
    result = _load_program(args.file)
    if args.preconditions:
        with open(args.preconditions, encoding="utf-8") as handle:
            family = load_family(handle.read(), result.program)
        _single_query(result)  # the program must still carry its query
    else:
        family = _build_family(args, result)
    state = EvalState(
        family,
        universe=_universe(args),
        delay=args.delay,
        window=args.window,
        archive_keep=args.archive_keep,
    )
    if args.stream == "-":
        lines: Iterable[str] = sys.stdin
    else:
        lines = open(args.stream, encoding="utf-8")
    try:
        for block in iter_stream_blocks(lines, result.program):
            try:
                delta = state.run_tick(block)
            except HypologError as exc:
                raise StreamError(
                    f"tick @{block.tick}: {exc}"
                ) from exc
            if args.format == "human":
                _print_human(delta)
            else:
                _emit(_delta_json(delta, state if args.dump_state else None))
    finally:
        if lines is not sys.stdin:
            lines.close()
    return EXIT_OK


def _print_human(delta: TickDelta) -> None:
    print(f"@{delta.tick}")
    for tup in delta.new_definite:
        print(f"  definite  {tup.query_id}  {tup.subst}")
    for tup in delta.new_supported:
        print(f"  supported {tup.query_id}  {tup}")
    for tup in delta.updated:
        print(f"  updated   {tup.query_id}  {tup}")
    for tup, reason in delta.discarded:
        print(f"  discarded {tup.query_id}  {tup.subst}  ({reason})")
    sys.stdout.flush()


def _cmd_oracle(args) -> int:
    result = _load_program(args.file)
    query = _single_query(result)
    facts = []
    if args.stream:
        with open(args.stream, encoding="utf-8") as handle:
            for block in iter_stream_blocks(handle, result.program):
                if block.tick > args.at:
                    break
                facts.extend(block.facts)
    world = GroundWorld.around(
        result.program, facts, horizon=args.horizon,
        extra=_universe(args),
    )
    hans = enumerate_hans(query, facts, args.at, world)
    sans = enumerate_sans(query, facts, args.at, world)
    payload = {
        "tau": args.at,
        "horizon": world.horizon,
        "constants": list(world.constants),
        "hans": [
            {
                "theta": _subst_json(theta),
                "hypotheses": sorted(str(a) for a in hyps),
            }
            for theta, hyps in sorted(hans, key=str)
        ],
        "sans": [
            {
                "theta": _subst_json(theta),
                "hypotheses": sorted(str(a) for a in hyps),
                "evidence": sorted(str(a) for a in evidence),
            }
            for theta, hyps, evidence in sorted(sans, key=str)
        ],
    }
    _emit(payload)
    return EXIT_OK


# ---------------------------------------------------------------------------

def _build_argparser() -> _Parser:
    parser = _Parser(
        prog="hypolog",
        description="Incremental hypothetical answers over temporal "
                    "Datalog streams.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_limits=True):
        p.add_argument("file", help="program file (.tdl)")
        if with_limits:
            p.add_argument("--mode", choices=["strict", "guarded"],
                           default="strict")
            p.add_argument("--universe", default="",
                           help="extra object constants, comma separated")
            p.add_argument("--max-depth", type=int, default=400)
            p.add_argument("--max-nodes", type=int, default=200_000)
            p.add_argument("--allow-unstratified", action="store_true")

    p_check = sub.add_parser("check", help="parse and classify a program")
    p_check.add_argument("file")
    p_check.add_argument("--json", action="store_true")
    p_check.set_defaults(func=_cmd_check)

    p_pre = sub.add_parser("preprocess",
                           help="compile the precondition set")
    common(p_pre)
    p_pre.add_argument("-o", "--output", required=True,
                       help="output path, or - for stdout")
    p_pre.set_defaults(func=_cmd_preprocess)

    p_run = sub.add_parser("run", help="run the online tick loop")
    common(p_run)
    p_run.add_argument("--stream", default="-",
                       help="stream file, or - for stdin")
    p_run.add_argument("--preconditions",
                       help="precompiled precondition file")
    p_run.add_argument("--dump-state", action="store_true",
                       help="include the full answer state in every line")
    p_run.add_argument("--delay", type=int, default=None)
    p_run.add_argument("--window", type=int, default=None)
    p_run.add_argument("--archive-keep", type=int, default=None,
                       help="keep only the last N definite answers")
    p_run.add_argument("--format", choices=["json", "human"],
                       default="json")
    p_run.set_defaults(func=_cmd_run)

    p_oracle = sub.add_parser("oracle",
                              help="brute-force reference enumeration")
    p_oracle.add_argument("file")
    p_oracle.add_argument("--at", type=int, required=True,
                          help="history cut-off tau")
    p_oracle.add_argument("--horizon", type=int, default=None)
    p_oracle.add_argument("--stream", default=None)
    p_oracle.add_argument("--universe", default="")
    p_oracle.set_defaults(func=_cmd_oracle)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_argparser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except _LIMIT_ERRORS as exc:
        return _fail(exc, EXIT_LIMITS)
    except _PARSE_ERRORS as exc:
        return _fail(exc, EXIT_INVALID)
    except OSError as exc:
        return _fail(exc, EXIT_RUNTIME)
    except HypologError as exc:
        return _fail(exc, EXIT_RUNTIME)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
