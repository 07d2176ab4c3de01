"""Command-line front end.

Subcommands::

    check KB                      validate a knowledge base
    query KB "Q"                  answer exactly via the search engine
    anytime KB "Q" [--score M] [--max-steps K] [--trace PATH]
                                  emit a JSON-lines trace with per-step
                                  scores and a final answer record
    oracle KB "Q"                 answer by brute-force joint enumeration
    graph KB "Q" --dot PATH       DOT digraph of the fully constructed net

Exit codes: 0 ok, 1 parse or KB error, 2 query unanswerable,
3 inconsistent evidence, 4 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import sys

from . import engine, oracle, scoring
from .factor import InconsistentEvidenceError
from .jsonio import dumps
from .lang import KBSemanticsError, KBSyntaxError, QueryError, validate_kb
from .parser import parse_kb, parse_query
from .search import AmbiguityError, QueryUnanswerableError, SearchOps

EXIT_PARSE = 1
EXIT_UNANSWERABLE = 2
EXIT_INCONSISTENT = 3
EXIT_RESOURCE = 4


def _load(kb_path: str, query_text: str | None):
    with open(kb_path, encoding="utf-8") as fh:
        kb = parse_kb(fh.read())
    if query_text is None:
        return kb, None
    return kb, parse_query(query_text, kb)


def cmd_check(args) -> int:
    with open(args.kb, encoding="utf-8") as fh:
        kb = parse_kb(fh.read(), validate=False)
    diags = validate_kb(kb)
    for d in diags:
        print(dumps({"line": d.line, "col": d.col, "severity": d.severity,
                     "message": d.message}))
    return EXIT_PARSE if diags else 0


def cmd_query(args) -> int:
    kb, query = _load(args.kb, args.query)
    result = engine.run_query(kb, query, strict=args.strict)
    print(dumps(result.answer))
    return 0


def cmd_oracle(args) -> int:
    kb, query = _load(args.kb, args.query)
    print(dumps(oracle.posterior(kb, query)))
    return 0


def _make_policy(args):
    if args.policy == "default":
        return engine.DefaultPolicy(use_margin_gate=not args.no_margin_gate)
    if args.policy == "forced-early":
        return engine.ForcedEarlyMarginPolicy()
    if args.policy == "random":
        return engine.RandomPolicy(seed=args.seed)
    raise ValueError(args.policy)


def cmd_anytime(args) -> int:
    kb, query = _load(args.kb, args.query)
    policy = _make_policy(args)
    sink = open(args.trace, "w", encoding="utf-8") if args.trace else None
    try:
        try:
            result = engine.run_query(
                kb, query, policy=policy, budget=args.max_steps,
                score_mode=args.score,
            )
            trace, final_state = result.trace, result.final_state
            answer, partial = result.answer, result.partial
        except QueryUnanswerableError as exc:
            if exc.trace is None:
                raise
            trace, final_state = exc.trace, exc.final_state
            answer, partial = None, True
        ops = SearchOps(kb, query)
        for step in trace.steps:
            line = dumps(step.record())
            print(line)
            if sink:
                sink.write(line + "\n")
        final = {
            "answer": answer,
            "partial": partial,
            "steps": len(trace.steps),
            "score": scoring.score(final_state, ops, args.score),
        }
        line = dumps(final)
        print(line)
        if sink:
            sink.write(line + "\n")
    finally:
        if sink:
            sink.close()
    return 0


def cmd_graph(args) -> int:
    kb, query = _load(args.kb, args.query)
    net = oracle.ground_network(kb, query)
    lines = ["digraph model {"]
    for rv in net.rvs:
        lines.append(f'  "{rv}" [label="{rv}"];')
    for cpt in net.cpts:
        for parent in cpt.parents:
            lines.append(f'  "{parent}" -> "{cpt.rv}";')
    lines.append("}")
    text = "\n".join(lines) + "\n"
    if args.dot:
        with open(args.dot, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="probkb", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="validate a knowledge base")
    c.add_argument("kb")
    c.set_defaults(func=cmd_check)

    q = sub.add_parser("query", help="answer a query exactly")
    q.add_argument("kb")
    q.add_argument("query")
    q.add_argument("--strict", action="store_true",
                   help="error out when several statements match one goal")
    q.set_defaults(func=cmd_query)

    a = sub.add_parser("anytime", help="emit a scored step-by-step trace")
    a.add_argument("kb")
    a.add_argument("query")
    a.add_argument("--score", choices=["default", "interval", "correct"],
                   default="default")
    a.add_argument("--max-steps", type=int, default=None)
    a.add_argument("--trace", default=None, help="also write JSON lines here")
    a.add_argument("--policy", choices=["default", "forced-early", "random"],
                   default="default")
    a.add_argument("--seed", type=int, default=0,
                   help="seed for the random policy; others ignore it")
    a.add_argument("--no-margin-gate", action="store_true")
    a.set_defaults(func=cmd_anytime)

    o = sub.add_parser("oracle", help="answer by full joint enumeration")
    o.add_argument("kb")
    o.add_argument("query")
    o.set_defaults(func=cmd_oracle)

    g = sub.add_parser("graph", help="export the constructed network as DOT")
    g.add_argument("kb")
    g.add_argument("query")
    g.add_argument("--dot", default=None)
    g.set_defaults(func=cmd_graph)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (KBSyntaxError, KBSemanticsError, QueryError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (QueryUnanswerableError, AmbiguityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNANSWERABLE
    except InconsistentEvidenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except oracle.ResourceCapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
