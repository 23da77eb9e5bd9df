"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 invalid input, 3 size cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import automata as ta
from .budget import BudgetError
from .decomp import (
    ArborealDecomposition,
    InvalidDecomposition,
    NotGoodError,
    OliveTreeDecomposition,
    arboreal_to_olive,
    brute_force_directed_treewidth,
)
from .digraph import Digraph
from .mso import MsoError, compile_formula, parse_mso, translate
from .oracles import brute_count_subgraphs, query_predicate
from .pipeline import ANY, CountQuery, CountStats, count_subgraphs
from .slices import SliceTerm, enumerate_alphabet, olive_to_unit, unweight_slice

EXIT_USAGE, EXIT_INPUT, EXIT_BUDGET = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _formula_text(arg: str) -> str:
    path = Path(arg)
    if not arg.lstrip().startswith(("(", "@")) and path.is_file():
        return path.read_text()
    return arg


def _load_decomposition(path: str):
    data = json.loads(Path(path).read_text())
    if "bags" in data:
        return ArborealDecomposition.from_json(data)
    if "map" in data:
        return OliveTreeDecomposition.from_json(data)
    raise ValueError(f"{path}: neither an arboreal nor an olive-tree decomposition")


def _int_or_any(text: str):
    return ANY if text == ANY else int(text)


def _emit(args, result, stats: dict, params: dict, human: str) -> None:
    if args.json:
        print(json.dumps({"result": result, "stats": stats, "parameters": params}, sort_keys=True))
    else:
        print(human)


def cmd_decompose(args) -> int:
    g = Digraph.load(args.graph)
    start = time.perf_counter()
    w, d = brute_force_directed_treewidth(g.without_loops(), good_only=args.good)
    if args.width is not None and w > args.width:
        print(f"no arboreal decomposition of width {args.width}; the minimum is {w}", file=sys.stderr)
        return EXIT_INPUT
    stats = {"seconds": round(time.perf_counter() - start, 3), "width": w}
    _emit(args, d.to_json(), stats, {"graph": args.graph}, json.dumps(d.to_json(), indent=2, sort_keys=True))
    return 0


def cmd_convert(args) -> int:
    g = Digraph.load(args.graph).without_loops()
    d = _load_decomposition(args.decomposition)
    ot = arboreal_to_olive(g, d) if isinstance(d, ArborealDecomposition) else d
    t = olive_to_unit(g, ot)
    out = {"olive": ot.to_json(), "unit": t.to_json()}
    if args.olive_out:
        Path(args.olive_out).write_text(json.dumps(ot.to_json(), indent=2, sort_keys=True))
    if args.unit_out:
        Path(args.unit_out).write_text(json.dumps(t.to_json(), indent=2, sort_keys=True))
    _emit(args, out, {"slices": len(t)}, {"graph": args.graph}, json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_compile(args) -> int:
    if args.c < 0 or (args.q is not None and args.q < 0):
        raise UsageError("-c and -q must be non-negative")
    phi = parse_mso(_formula_text(args.formula), args.vertex_labels, args.edge_labels)
    if phi.free_vars():
        print(f"formula has free variables: {sorted(v.name for v in phi.free_vars())}", file=sys.stderr)
        return EXIT_INPUT
    start = time.perf_counter()
    q = args.q if args.q is not None else args.c
    alphabet = enumerate_alphabet(args.c, q, args.vertex_labels, args.edge_labels)
    a = compile_formula(translate(phi), alphabet)
    text = ta.dump_automaton(a)
    if args.output:
        Path(args.output).write_text(text)
    stats = {"states": len(a.states), "transitions": a.size, "seconds": round(time.perf_counter() - start, 3)}
    params = {"c": args.c, "q": q, "alphabet": len(alphabet)}
    _emit(args, text, stats, params, text if not args.output else f"wrote {args.output}: {stats}")
    return 0


def cmd_automaton(args) -> int:
    a = ta.load_automaton(Path(args.automaton).read_text())
    op = args.op
    if op == "complement":
        res = ta.dump_automaton(ta.complement(a))
        _emit(args, res, {}, {"op": op}, res)
    elif op == "intersect":
        if not args.other:
            raise UsageError("intersect needs a second automaton")
        b = ta.load_automaton(Path(args.other).read_text())
        res = ta.dump_automaton(ta.product_intersect(a, b))
        _emit(args, res, {}, {"op": op}, res)
    elif op == "member":
        if not args.term:
            raise UsageError("member needs --term")
        term = SliceTerm.load(args.term)
        if not any(e.weight is not None for s in a.alphabet for e in getattr(s, "edges", ())):
            term = term.map(unweight_slice)
        t = term.as_term()
        res = ta.accepts(a, t)
        _emit(args, res, {}, {"op": op}, "accepted" if res else "rejected")
    elif op == "count-depth":
        if args.depth is None:
            raise UsageError("count-depth needs --depth")
        res = ta.count_accepted(a, args.depth)
        _emit(args, res, {}, {"op": op, "depth": args.depth}, str(res))
    return 0


def _query(args) -> CountQuery:
    if args.k < 1:
        raise UsageError("-k must be at least 1")
    if args.l != ANY and args.l < 0:
        raise UsageError("-l must be non-negative or 'any'")
    if args.z is not None and args.z < 1:
        raise UsageError("--z must be at least 1")
    decomposition = _load_decomposition(args.decomposition) if args.decomposition else None
    return CountQuery(_formula_text(args.formula), args.k, args.l, args.alpha, decomposition, args.z)


def cmd_count(args) -> int:
    query = _query(args)
    g = Digraph.load(args.graph)
    parse_mso(query.formula, g.vertex_labels(), g.edge_labels())
    stats = CountStats()
    n = count_subgraphs(g, query, stats)
    params = {"k": args.k, "l": args.l, "alpha": args.alpha, "formula": query.formula}
    _emit(args, n, stats.to_json(), params, str(n))
    return 0


def cmd_verify(args) -> int:
    query = _query(args)
    g = Digraph.load(args.graph)
    parse_mso(query.formula, g.vertex_labels(), g.edge_labels())
    stats = CountStats()
    n = count_subgraphs(g, query, stats)
    pred = query_predicate(
        query.formula,
        query.k,
        None if query.l == ANY else query.l,
        None if query.alpha == ANY else query.alpha,
    )
    m = brute_count_subgraphs(g, pred)
    verdict = "OK" if n == m else "MISMATCH"
    params = {"k": args.k, "l": args.l, "alpha": args.alpha, "formula": query.formula}
    _emit(args, {"pipeline": n, "oracle": m, "agree": n == m}, stats.to_json(), params, f"pipeline={n} oracle={m} {verdict}")
    return 0 if n == m else EXIT_INPUT


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="slicecount", description="Count subgraphs of small directed treewidth digraphs.")
    p.add_argument("--json", action="store_true", help="emit a single JSON object")
    p.add_argument("--budget", help="size caps as k=v,k=v or JSON (overrides SLICECOUNT_BUDGET)")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    d = sub.add_parser("decompose", help="minimum-width arboreal decomposition")
    d.add_argument("graph")
    d.add_argument("--width", type=int)
    d.add_argument("--good", action="store_true", help="require a good decomposition")
    d.set_defaults(func=cmd_decompose)

    c = sub.add_parser("convert", help="arboreal -> olive-tree -> unit decomposition")
    c.add_argument("graph")
    c.add_argument("decomposition")
    c.add_argument("--olive-out")
    c.add_argument("--unit-out")
    c.set_defaults(func=cmd_convert)

    m = sub.add_parser("compile", help="compile a sentence to an explicit slice automaton")
    m.add_argument("formula")
    m.add_argument("-c", type=int, default=1)
    m.add_argument("-q", type=int)
    m.add_argument("--vertex-labels", type=lambda s: s.split(","), default=["a"])
    m.add_argument("--edge-labels", type=lambda s: s.split(","), default=["b"])
    m.add_argument("-o", "--output")
    m.set_defaults(func=cmd_compile)

    a = sub.add_parser("automaton", help="operations on dumped automata")
    a.add_argument("op", choices=["intersect", "complement", "member", "count-depth"])
    a.add_argument("automaton")
    a.add_argument("other", nargs="?")
    a.add_argument("--term")
    a.add_argument("--depth", type=int)
    a.set_defaults(func=cmd_automaton)

    for name, func, text in (("count", cmd_count, "count matching subgraphs"), ("verify", cmd_verify, "compare with brute force")):
        q = sub.add_parser(name, help=text)
        q.add_argument("graph")
        q.add_argument("--formula", required=True)
        q.add_argument("-k", type=int, required=True)
        q.add_argument("-l", type=_int_or_any, default=ANY)
        q.add_argument("--alpha", "--weight", dest="alpha", type=_int_or_any, default=ANY)
        q.add_argument("--decomposition")
        q.add_argument("--z", type=int)
        q.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
        if args.budget:
            os.environ["SLICECOUNT_BUDGET"] = args.budget
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except BudgetError as exc:
        print(f"size cap exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (MsoError, InvalidDecomposition, NotGoodError, ValueError, KeyError, OSError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
