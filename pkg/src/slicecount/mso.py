"""Monadic second-order formulas over digraphs and unit decompositions.

Formulas are parsed from S-expressions, translated from the digraph
vocabulary (``src``, ``tgt``, labels) to the unit-decomposition vocabulary,
and compiled to deterministic slice automata. Compiled automata are lazy:
states are produced on demand while a term or a product is explored, with
existential quantifiers handled by an on-the-fly subset construction.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

from .automata import GlueCheck, Lazy, RankedAlphabet, materialize, minimize
from .budget import BudgetError, current as current_budget
from .slices import CENTER, UnitSlice

SORTS = ("v", "e", "vs", "es")
FIRST_ORDER = ("v", "e")
DIGRAPH_PREDICATES = {"src", "tgt", "vlabel", "elabel"}
SLICE_PREDICATES = {"shat", "that", "rhohat", "xihat", "frontier", "center", "neighbors", "chain"}


class MsoError(ValueError):
    pass


class ParseError(MsoError):
    def __init__(self, msg: str, pos: int | None = None) -> None:
        super().__init__(msg if pos is None else f"{msg} at offset {pos}")
        self.pos = pos


class SortError(ParseError):
    pass


class UnknownLabel(ParseError):
    pass


_uids = itertools.count(1)


@dataclass(frozen=True)
class Var:
    name: str
    sort: str
    uid: int = field(default_factory=lambda: next(_uids))
    domain: str = "all"

    @property
    def first_order(self) -> bool:
        return self.sort in FIRST_ORDER

    @property
    def on_edges(self) -> bool:
        return self.sort in ("e", "es")

    def key(self) -> str:
        return f"{self.name}.{self.uid}"


class Formula:
    def free_vars(self) -> frozenset[Var]:
        raise NotImplementedError

    def to_sexp(self):
        raise NotImplementedError

    def predicates(self) -> set[str]:
        raise NotImplementedError

    def __str__(self) -> str:
        return _show(self.to_sexp())


def _show(x) -> str:
    if isinstance(x, tuple):
        return "(" + " ".join(_show(y) for y in x) + ")"
    return str(x)


@dataclass(frozen=True, eq=True)
class Atom(Formula):
    pred: str
    args: tuple

    def free_vars(self):
        return frozenset(a for a in self.args if isinstance(a, Var))

    def to_sexp(self):
        return (self.pred, *(a.key() if isinstance(a, Var) else a for a in self.args))

    def predicates(self):
        return {self.pred}


TRUE = Atom("true", ())


@dataclass(frozen=True)
class And(Formula):
    parts: tuple

    def free_vars(self):
        return frozenset().union(*(p.free_vars() for p in self.parts))

    def to_sexp(self):
        return ("and", *(p.to_sexp() for p in self.parts))

    def predicates(self):
        return set().union(*(p.predicates() for p in self.parts))


@dataclass(frozen=True)
class Or(Formula):
    parts: tuple

    def free_vars(self):
        return frozenset().union(*(p.free_vars() for p in self.parts))

    def to_sexp(self):
        return ("or", *(p.to_sexp() for p in self.parts))

    def predicates(self):
        return set().union(*(p.predicates() for p in self.parts))


@dataclass(frozen=True)
class Not(Formula):
    part: Formula

    def free_vars(self):
        return self.part.free_vars()

    def to_sexp(self):
        return ("not", self.part.to_sexp())

    def predicates(self):
        return self.part.predicates()


@dataclass(frozen=True)
class Exists(Formula):
    var: Var
    body: Formula

    def free_vars(self):
        return self.body.free_vars() - {self.var}

    def to_sexp(self):
        return (f"exists-{self.var.sort}", self.var.key(), self.body.to_sexp())

    def predicates(self):
        return self.body.predicates()


@dataclass(frozen=True)
class Builtin(Formula):
    """A library sentence: its expansion plus the call form it was written as.

    ``to_sexp`` gives the call form when there is one, so an evaluator can
    decide the property natively instead of through the expansion.
    """

    name: str
    params: tuple
    expansion: Formula
    call: object = None

    def free_vars(self):
        return frozenset()

    def to_sexp(self):
        return self.expansion.to_sexp() if self.call is None else self.call

    def predicates(self):
        return self.expansion.predicates()


def vocabulary(f: Formula) -> str:
    preds = f.predicates()
    if preds & DIGRAPH_PREDICATES and preds & SLICE_PREDICATES:
        raise MsoError("formula mixes the digraph and decomposition vocabularies")
    return "slice" if preds & SLICE_PREDICATES else "digraph"


# construction helpers

def fresh(sort: str, name: str | None = None, domain: str = "all") -> Var:
    return Var(name or sort.upper() if sort in ("vs", "es") else name or sort, sort, next(_uids), domain)


def exists(sort: str, body: Callable[[Var], Formula], name: str | None = None) -> Formula:
    v = fresh(sort, name)
    return Exists(v, body(v))


def forall(sort: str, body: Callable[[Var], Formula], name: str | None = None) -> Formula:
    v = fresh(sort, name)
    return Not(Exists(v, Not(body(v))))


def conj(*parts: Formula) -> Formula:
    return parts[0] if len(parts) == 1 else And(tuple(parts))


def disj(*parts: Formula) -> Formula:
    return parts[0] if len(parts) == 1 else Or(tuple(parts))


def implies(a: Formula, b: Formula) -> Formula:
    return Or((Not(a), b))


def member(x: Var, s: Var) -> Formula:
    return Atom("in", (x, s))


def equal(a: Var, b: Var) -> Formula:
    return Atom("=", (a, b))


def src(y: Var, x: Var) -> Formula:
    return Atom("src", (y, x))


def tgt(y: Var, x: Var) -> Formula:
    return Atom("tgt", (y, x))


# parser

def _tokenize(text: str) -> list[tuple[str, int]]:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            out.append((ch, i))
            i += 1
        else:
            j = i
            while j < len(text) and not text[j].isspace() and text[j] not in "()":
                j += 1
            out.append((text[i:j], i))
            i = j
    return out


def _read(tokens, pos):
    if pos >= len(tokens):
        raise ParseError("unexpected end of input")
    tok, off = tokens[pos]
    if tok == ")":
        raise ParseError("unexpected ')'", off)
    if tok == "(":
        items = []
        pos += 1
        while True:
            if pos >= len(tokens):
                raise ParseError("missing ')'", off)
            if tokens[pos][0] == ")":
                return (items, off), pos + 1
            item, pos = _read(tokens, pos)
            items.append(item)
    return (tok, off), pos + 1


_ARGSORTS = {
    "src": ("e", "v"),
    "tgt": ("e", "v"),
}


class _Scope:
    def __init__(self, vlabels, elabels) -> None:
        self.bound: list[dict[str, Var]] = [{}]
        self.free: dict[str, Var] = {}
        self.vlabels = vlabels
        self.elabels = elabels

    def lookup(self, name: str) -> Optional[Var]:
        for frame in reversed(self.bound):
            if name in frame:
                return frame[name]
        return self.free.get(name)

    def use(self, name: str, sort: Optional[str], off: int) -> Var:
        v = self.lookup(name)
        if v is None:
            if sort is None:
                raise SortError(f"cannot infer the sort of free variable {name!r}", off)
            v = Var(name, sort)
            self.free[name] = v
        elif sort is not None and v.sort != sort:
            raise SortError(f"variable {name!r} has sort {v.sort} but {sort} is required", off)
        return v


def parse_mso(text: str, vertex_labels: Iterable[str] | None = None, edge_labels: Iterable[str] | None = None) -> Formula:
    """Parse the S-expression syntax into a well-sorted formula."""
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty formula")
    tree, pos = _read(tokens, 0)
    if pos != len(tokens):
        raise ParseError("trailing input", tokens[pos][1])
    scope = _Scope(
        None if vertex_labels is None else set(vertex_labels),
        None if edge_labels is None else set(edge_labels),
    )
    return _build(tree, scope)


def _atom_name(item, what: str) -> tuple[str, int]:
    val, off = item
    if isinstance(val, list):
        raise ParseError(f"expected {what}", off)
    return val, off


def _build(tree, scope: _Scope) -> Formula:
    val, off = tree
    if isinstance(val, str):
        if val.startswith("@"):
            return _builtin_call(val, [], off)
        if val in ("true", "false"):
            return TRUE if val == "true" else Not(TRUE)
        raise ParseError(f"unexpected atom {val!r}", off)
    if not val:
        raise ParseError("empty form", off)
    head, hoff = _atom_name(val[0], "a form name")
    args = val[1:]
    if head.startswith("@"):
        return _builtin_call(head, [_atom_name(a, "a built-in parameter")[0] for a in args], hoff)
    if head.startswith("exists-"):
        sort = head[len("exists-"):]
        if sort not in SORTS or len(args) != 2:
            raise ParseError(f"malformed quantifier {head!r}", hoff)
        name, noff = _atom_name(args[0], "a variable name")
        var = Var(name, sort)
        scope.bound.append({name: var})
        body = _build(args[1], scope)
        scope.bound.pop()
        return Exists(var, body)
    if head in ("and", "or"):
        parts = tuple(_build(a, scope) for a in args)
        if not parts:
            return TRUE if head == "and" else Not(TRUE)
        return (And if head == "and" else Or)(parts)
    if head == "not":
        if len(args) != 1:
            raise ParseError("not takes one argument", hoff)
        return Not(_build(args[0], scope))
    if head in ("src", "tgt"):
        if len(args) != 2:
            raise ParseError(f"{head} takes two arguments", hoff)
        (y, yo), (x, xo) = (_atom_name(a, "a variable") for a in args)
        return Atom(head, (scope.use(y, "e", yo), scope.use(x, "v", xo)))
    if head in ("vlabel", "elabel"):
        if len(args) != 2:
            raise ParseError(f"{head} takes two arguments", hoff)
        (x, xo), (lab, lo) = (_atom_name(a, "a name") for a in args)
        sort = "v" if head == "vlabel" else "e"
        known = scope.vlabels if head == "vlabel" else scope.elabels
        if known is not None and lab not in known:
            raise UnknownLabel(f"label {lab!r} is not declared", lo)
        return Atom(head, (scope.use(x, sort, xo), lab))
    if head == "in":
        if len(args) != 2:
            raise ParseError("in takes two arguments", hoff)
        (x, xo), (s, so) = (_atom_name(a, "a variable") for a in args)
        xv, sv = scope.lookup(x), scope.lookup(s)
        if xv is None and sv is None:
            raise SortError(f"cannot infer the sorts of {x!r} and {s!r}", xo)
        if xv is None:
            xv = scope.use(x, sv.sort[0] if sv.sort in ("vs", "es") else None, xo)
        if sv is None:
            sv = scope.use(s, xv.sort + "s" if xv.sort in FIRST_ORDER else None, so)
        if xv.sort not in FIRST_ORDER:
            raise SortError(f"{x!r} must be a vertex or edge variable", xo)
        if sv.sort != xv.sort + "s":
            raise SortError(f"{s!r} must be a {xv.sort}s variable", so)
        return Atom("in", (xv, sv))
    if head == "=":
        if len(args) != 2:
            raise ParseError("= takes two arguments", hoff)
        (a, ao), (b, bo) = (_atom_name(x, "a variable") for x in args)
        av, bv = scope.lookup(a), scope.lookup(b)
        if av is None and bv is None:
            raise SortError(f"cannot infer the sorts of {a!r} and {b!r}", ao)
        av = av or scope.use(a, bv.sort, ao)
        bv = bv or scope.use(b, av.sort, bo)
        if av.sort != bv.sort:
            raise SortError(f"{a!r} and {b!r} have different sorts", bo)
        return Atom("=", (av, bv))
    raise ParseError(f"unknown form {head!r}", hoff)


def _builtin_call(head: str, params: list[str], off: int) -> Formula:
    name = head[1:]
    call = (head, *params) if params else head
    try:
        if name == "cycle":
            return builtin_formula("cycle", call=call)
        if name == "strongly-connected":
            return builtin_formula("strongly_connected", call=call)
        if name == "union-paths":
            return builtin_formula("union_paths", int(params[0]), call=call)
        if name == "out-tree-leaves":
            return builtin_formula("out_tree_max_leaves", int(params[0]), call=call)
        if name == "excludes-minors":
            return builtin_formula("excludes_minors", load_obstructions(params[0]), call=call)
    except (IndexError, ValueError, OSError) as exc:
        raise ParseError(f"bad parameters for {head}: {exc}", off) from exc
    raise ParseError(f"unknown built-in {head!r}", off)


# built-in formulas

def _exactly_one(sort: str, cond: Callable[[Var], Formula]) -> Formula:
    some = exists(sort, cond)
    two = exists(sort, lambda a: exists(sort, lambda b: conj(Not(equal(a, b)), cond(a), cond(b))))
    return conj(some, Not(two))


def _at_most_one(sort: str, cond: Callable[[Var], Formula]) -> Formula:
    return Not(exists(sort, lambda a: exists(sort, lambda b: conj(Not(equal(a, b)), cond(a), cond(b)))))


def _arc(y: Var, a: Var, b: Var) -> Formula:
    return conj(src(y, a), tgt(y, b))


def _nonempty(s: Var) -> Formula:
    return exists(s.sort[0], lambda x: member(x, s))


def _splits(z: Var, inside: Callable[[Var], Formula]) -> Formula:
    """Z meets the set and misses part of it, and Z lies inside it."""
    return conj(
        exists("v", lambda x: member(x, z)),
        exists("v", lambda x: conj(inside(x), Not(member(x, z)))),
        Not(exists("v", lambda x: conj(member(x, z), Not(inside(x))))),
    )


def _weakly_connected(inside: Callable[[Var], Formula], edge_ok: Callable[[Var], Formula] = lambda y: TRUE) -> Formula:
    """No proper split of the vertex set is left uncrossed by an allowed edge."""

    def crossing(z: Var) -> Formula:
        return exists(
            "e",
            lambda y: conj(
                edge_ok(y),
                exists(
                    "v",
                    lambda a: exists(
                        "v",
                        lambda b: conj(
                            _arc(y, a, b),
                            inside(a),
                            inside(b),
                            disj(conj(member(a, z), Not(member(b, z))), conj(Not(member(a, z)), member(b, z))),
                        ),
                    ),
                ),
            ),
        )

    return Not(exists("vs", lambda z: conj(_splits(z, inside), Not(crossing(z)))))


def _everywhere(_x: Var) -> Formula:
    return TRUE


def cycle_formula() -> Formula:
    degree = forall(
        "v",
        lambda x: conj(
            _exactly_one("e", lambda y: src(y, x)),
            _exactly_one("e", lambda y: tgt(y, x)),
        ),
    )
    return conj(exists("v", lambda x: equal(x, x)), degree, _weakly_connected(_everywhere))


def strongly_connected_formula() -> Formula:
    def leaves(z: Var) -> Formula:
        return exists(
            "e",
            lambda y: exists(
                "v",
                lambda a: exists("v", lambda b: conj(_arc(y, a, b), member(a, z), Not(member(b, z)))),
            ),
        )

    return Not(exists("vs", lambda z: conj(_splits(z, _everywhere), Not(leaves(z)))))


def _is_path(xs: Var, ys: Var) -> Formula:
    in_y = lambda y: member(y, ys)
    in_x = lambda x: member(x, xs)
    inside = Not(
        exists(
            "e",
            lambda y: conj(
                in_y(y),
                exists("v", lambda x: conj(disj(src(y, x), tgt(y, x)), Not(in_x(x)))),
            ),
        )
    )
    degrees = Not(
        exists(
            "v",
            lambda x: disj(
                exists("e", lambda a: exists("e", lambda b: conj(in_y(a), in_y(b), Not(equal(a, b)), src(a, x), src(b, x)))),
                exists("e", lambda a: exists("e", lambda b: conj(in_y(a), in_y(b), Not(equal(a, b)), tgt(a, x), tgt(b, x)))),
            ),
        )
    )
    start = exists("v", lambda x: conj(in_x(x), Not(exists("e", lambda y: conj(in_y(y), tgt(y, x))))))
    return conj(_nonempty(xs), inside, degrees, start, _weakly_connected(in_x, in_y))


def union_paths_formula(k: int) -> Formula:
    """Some k pairs (X_i, Y_i) are simple paths covering every vertex and edge."""
    if k < 1:
        raise ValueError("k must be positive")
    xs = [fresh("vs", f"X{i}") for i in range(1, k + 1)]
    ys = [fresh("es", f"Y{i}") for i in range(1, k + 1)]
    cover = conj(
        forall("v", lambda x: disj(*(member(x, s) for s in xs))),
        forall("e", lambda y: disj(*(member(y, s) for s in ys))),
    )
    body = conj(*(_is_path(x, y) for x, y in zip(xs, ys)), cover)
    for x, y in reversed(list(zip(xs, ys))):
        body = Exists(x, Exists(y, body))
    return body


def out_tree_formula(k: int) -> Formula:
    """A non-empty out-branching with at most k vertices lacking an outgoing edge."""
    if k < 1:
        raise ValueError("k must be positive")
    root = lambda x: Not(exists("e", lambda y: tgt(y, x)))
    sink = lambda x: Not(exists("e", lambda y: src(y, x)))
    indeg = forall("v", lambda x: _at_most_one("e", lambda y: tgt(y, x)))
    many = [fresh("v", f"s{i}") for i in range(k + 1)]
    distinct = [Not(equal(a, b)) for a, b in itertools.combinations(many, 2)]
    too_many: Formula = conj(*distinct, *(sink(x) for x in many)) if distinct else conj(*(sink(x) for x in many))
    for x in reversed(many):
        too_many = Exists(x, too_many)
    return conj(_exactly_one("v", root), indeg, _weakly_connected(_everywhere), Not(too_many))


def minor_formula(n: int, edges: Sequence[tuple[int, int]]) -> Formula:
    """The underlying undirected graph has the pattern on 0..n-1 as a minor."""
    sets = [fresh("vs", f"B{i}") for i in range(n)]
    parts = [_nonempty(s) for s in sets]
    for a, b in itertools.combinations(sets, 2):
        parts.append(Not(exists("v", lambda x: conj(member(x, a), member(x, b)))))
    for s in sets:
        parts.append(_weakly_connected(lambda x, s=s: member(x, s)))
    for a, b in edges:
        sa, sb = sets[a], sets[b]
        parts.append(
            exists(
                "e",
                lambda y, sa=sa, sb=sb: exists(
                    "v",
                    lambda u: exists(
                        "v",
                        lambda v: conj(
                            _arc(y, u, v),
                            disj(conj(member(u, sa), member(v, sb)), conj(member(u, sb), member(v, sa))),
                        ),
                    ),
                ),
            )
        )
    body = conj(*parts)
    for s in reversed(sets):
        body = Exists(s, body)
    return body


def excludes_minors_formula(obstructions: Sequence[tuple[int, Sequence[tuple[int, int]]]]) -> Formula:
    if not obstructions:
        return TRUE
    return Not(disj(*(minor_formula(n, es) for n, es in obstructions)))


def load_obstructions(path: str | Path) -> list[tuple[int, list[tuple[int, int]]]]:
    """Read ``{"obstructions": [{"vertices": n, "edges": [[a, b], ...]}]}``."""
    data = json.loads(Path(path).read_text())
    out = []
    for ob in data["obstructions"]:
        verts = ob["vertices"]
        if isinstance(verts, int):
            n, index = verts, {i: i for i in range(verts)}
        else:
            n, index = len(verts), {v: i for i, v in enumerate(verts)}
        if n > 5:
            raise ValueError("obstruction graphs are limited to 5 vertices")
        out.append((n, [(index[a], index[b]) for a, b in ob["edges"]]))
    return out


_CALL_NAMES = {
    "cycle": "@cycle",
    "strongly_connected": "@strongly-connected",
    "union_paths": "@union-paths",
    "out_tree_max_leaves": "@out-tree-leaves",
}


def builtin_formula(name: str, *params, call=None) -> Builtin:
    """Library sentence by name, wrapped so the compiler and evaluators can recognize it."""
    if name == "cycle":
        body = cycle_formula()
    elif name == "strongly_connected":
        body = strongly_connected_formula()
    elif name == "union_paths":
        body = union_paths_formula(int(params[0]))
    elif name == "out_tree_max_leaves":
        body = out_tree_formula(int(params[0]))
    elif name == "excludes_minors":
        body = excludes_minors_formula(params[0])
    else:
        raise MsoError(f"unknown built-in {name!r}")
    if call is None and name in _CALL_NAMES:
        call = (_CALL_NAMES[name], *map(str, params)) if params else _CALL_NAMES[name]
    return Builtin(name, tuple(params) if name != "excludes_minors" else (), body, call)


# translation to the decomposition vocabulary

def sequence_formula(u: Var, y: Var, v: Var) -> Formula:
    """The sliced edge sequence starting with edge part y leads from center u to center v.

    An edge-set variable collects the parts of the sequence; the ``chain``
    base predicate checks it locally (see ``ChainNode``).
    """
    z = Var("Z", "es", next(_uids), "all")
    return Exists(z, Atom("chain", (u, y, v, z)))


def translate(phi: Formula) -> Formula:
    """Digraph-vocabulary sentence to an equivalent decomposition-vocabulary sentence.

    Vertex quantifiers range over slice centers and edge quantifiers over
    edge parts whose source is a center, which identifies each composed
    edge with the first part of its sequence.
    """
    if phi.free_vars():
        raise MsoError(f"free variables {sorted(v.name for v in phi.free_vars())} in a sentence")
    return _translate(phi, {})


def _translate(f: Formula, env: dict[int, Var]) -> Formula:
    if isinstance(f, Builtin):
        return Builtin(f.name, f.params, _translate(f.expansion, {}), f.call)
    if isinstance(f, Exists):
        dom = "first" if f.var.on_edges else "center"
        nv = Var(f.var.name, f.var.sort, f.var.uid, dom)
        return Exists(nv, _translate(f.body, {**env, f.var.uid: nv}))
    if isinstance(f, And):
        return And(tuple(_translate(p, env) for p in f.parts))
    if isinstance(f, Or):
        return Or(tuple(_translate(p, env) for p in f.parts))
    if isinstance(f, Not):
        return Not(_translate(f.part, env))
    assert isinstance(f, Atom)
    args = tuple(env.get(a.uid, a) if isinstance(a, Var) else a for a in f.args)
    if f.pred == "src":
        y, x = args
        other = Var("t", "v", next(_uids), "center")
        return Exists(other, sequence_formula(x, y, other))
    if f.pred == "tgt":
        y, x = args
        other = Var("s", "v", next(_uids), "center")
        return Exists(other, sequence_formula(other, y, x))
    if f.pred == "vlabel":
        return Atom("rhohat", args)
    if f.pred == "elabel":
        return Atom("xihat", args)
    return Atom(f.pred, args)


# compilation

class SliceInfo:
    """Cell layout of one slice: vertex cells (center first) and edge cells."""

    __slots__ = (
        "slice", "has_center", "vcell", "vcount", "center_mask", "first_mask",
        "all_vmask", "all_emask", "esrc", "etgt", "elabel", "frontier_edge", "out_mask_by_index",
    )

    def __init__(self, s: UnitSlice) -> None:
        self.slice = s
        self.has_center = s.center is not None
        self.vcell: dict = {}
        if self.has_center:
            self.vcell[CENTER] = 0
        for j, f in enumerate(s.frontiers):
            for i in f:
                self.vcell[(j, i)] = len(self.vcell)
        self.vcount = len(self.vcell)
        self.center_mask = 1 if self.has_center else 0
        self.all_vmask = (1 << self.vcount) - 1
        self.all_emask = (1 << len(s.edges)) - 1
        self.esrc = [self.vcell.get(e.source, -1) for e in s.edges]
        self.etgt = [self.vcell.get(e.target, -1) for e in s.edges]
        self.elabel = [e.label for e in s.edges]
        self.first_mask = 0
        for n, e in enumerate(s.edges):
            if e.source == CENTER:
                self.first_mask |= 1 << n
        # frontier_edge[j] = tuple of (index i, edge number) in index order
        self.frontier_edge = []
        for j, f in enumerate(s.frontiers):
            row = []
            for i in f:
                for n, e in enumerate(s.edges):
                    if e.source == (j, i) or e.target == (j, i):
                        row.append((i, n))
                        break
            self.frontier_edge.append(tuple(row))


def _bits(mask: int) -> list[int]:
    out = []
    n = 0
    while mask:
        if mask & 1:
            out.append(n)
        mask >>= 1
        n += 1
    return out


def _submasks(mask: int) -> list[int]:
    out = [0]
    for b in _bits(mask):
        out += [m | (1 << b) for m in out]
    return out


class Node:
    """Lazy deterministic automaton over interpreted slices.

    States are small ints; ``None`` is the absorbing rejecting sink.
    """

    def __init__(self, free: Iterable[Var], label: str) -> None:
        self.free = sorted(set(free), key=lambda v: v.uid)
        self.order = tuple(v.uid for v in self.free)
        self.label = label
        self._ids: dict = {}
        self._states: list = []
        self._final: list[bool] = []
        self._memo: dict = {}

    def intern(self, state) -> int:
        n = self._ids.get(state)
        if n is None:
            n = len(self._states)
            self._ids[state] = n
            self._states.append(state)
            self._final.append(self.compute_final(state))
            if n > _state_cap[0]:
                raise BudgetError(f"compile [{self.label}]", n, _state_cap[0], "state cap exceeded")
        return n

    def is_final(self, n: int) -> bool:
        return self._final[n]

    def step(self, info: SliceInfo, interp: dict, kids: tuple):
        key = (info, tuple(interp.get(u, 0) for u in self.order), kids)
        try:
            return self._memo[key]
        except KeyError:
            pass
        raw = self.transition(info, interp, tuple(None if k is None else self._states[k] for k in kids))
        out = None if raw is None else self.intern(raw)
        self._memo[key] = out
        return out

    def transition(self, info: SliceInfo, interp: dict, kids: tuple):
        raise NotImplementedError

    def compute_final(self, state) -> bool:
        raise NotImplementedError

    @property
    def state_count(self) -> int:
        return len(self._states)


_state_cap = [current_budget().states]


class TrueNode(Node):
    def __init__(self) -> None:
        super().__init__((), "true")

    def transition(self, info, interp, kids):
        return ()

    def compute_final(self, state):
        return True


class BaseNode(Node):
    """Atomic predicate with the singleton test for its first-order arguments.

    State: (counts of first-order cells seen, predicate-specific extra).
    """

    def __init__(self, atom: Atom) -> None:
        super().__init__(atom.free_vars(), str(atom))
        self.atom = atom
        self.fo = [a.uid for a in atom.args if isinstance(a, Var) and a.first_order]
        self.fo = list(dict.fromkeys(self.fo))

    def transition(self, info, interp, kids):
        counts = [0] * len(self.fo)
        for k in kids:
            if k is None:
                return None
            for n, c in enumerate(k[0]):
                counts[n] += c
        for n, u in enumerate(self.fo):
            m = interp.get(u, 0)
            if m:
                counts[n] += 1 if m & (m - 1) == 0 else 2
        if any(c > 1 for c in counts):
            return None
        extra = self.local(info, interp, [k[1] for k in kids])
        if extra is False:
            return None
        return (tuple(counts), extra)

    def compute_final(self, state):
        counts, extra = state
        return all(c == 1 for c in counts) and self.extra_final(extra)

    def local(self, info: SliceInfo, interp: dict, kid_extra: list):
        """Return False to reject, otherwise the extra state component."""
        return None

    def extra_final(self, extra) -> bool:
        return True

    def mask(self, interp, var: Var) -> int:
        return interp.get(var.uid, 0)


class InNode(BaseNode):
    def local(self, info, interp, kid_extra):
        x, s = self.atom.args
        mx = self.mask(interp, x)
        if mx and not (mx & self.mask(interp, s)):
            return False
        return None


class EqNode(BaseNode):
    def local(self, info, interp, kid_extra):
        a, b = self.atom.args
        if self.mask(interp, a) != self.mask(interp, b):
            return False
        return None


class EndpointNode(BaseNode):
    """``shat``/``that``: the vertex is the source/target of the edge part."""

    def local(self, info, interp, kid_extra):
        y, x = self.atom.args
        my = self.mask(interp, y)
        if my:
            e = _bits(my)[0]
            cell = info.esrc[e] if self.atom.pred == "shat" else info.etgt[e]
            if cell < 0 or self.mask(interp, x) != 1 << cell:
                return False
        return None


class LabelNode(BaseNode):
    def local(self, info, interp, kid_extra):
        x, lab = self.atom.args
        m = self.mask(interp, x)
        if not m:
            return None
        if self.atom.pred == "rhohat":
            ok = m == info.center_mask and info.slice.center == lab
        else:
            ok = info.elabel[_bits(m)[0]] == lab
        return None if ok else False


class CenterNode(BaseNode):
    def local(self, info, interp, kid_extra):
        (x,) = self.atom.args
        m = self.mask(interp, x)
        return False if m and m != info.center_mask else None


class FrontierNode(BaseNode):
    def local(self, info, interp, kid_extra):
        j, i, x = self.atom.args
        m = self.mask(interp, x)
        if m:
            cell = info.vcell.get((j, i))
            if cell is None or m != 1 << cell:
                return False
        return None


class NeighborsNode(BaseNode):
    """x1 lies in a slice whose child slice holds x2.

    Extra: (where x2 was seen: 0 nowhere, 1 at this subterm's root, 2 deeper; satisfied).
    """

    def local(self, info, interp, kid_extra):
        x1, x2 = self.atom.args
        ok = any(e[1] for e in kid_extra)
        if self.mask(interp, x1) and any(e[0] == 1 for e in kid_extra):
            ok = True
        if self.mask(interp, x2):
            seen = 1
        elif any(e[0] for e in kid_extra):
            seen = 2
        else:
            seen = 0
        return (seen, ok)

    def transition(self, info, interp, kids):
        kids = tuple(k if k is None else (k[0], k[1]) for k in kids)
        return super().transition(info, interp, kids)

    def extra_final(self, extra) -> bool:
        return extra[1]

    def leaf_extra(self):
        return (0, False)


class ChainNode(BaseNode):
    """``chain(u, y, v, Z)``: Z is the sliced edge sequence whose first part is y.

    Z must be closed under gluing (a frontier edge is in Z on both sides or
    on neither), contain exactly one part leaving a center (which is y,
    leaving center u) and exactly one part entering a center (entering
    center v). Extra: (out-frontier indices of Z-parts, center-source count,
    center-target count).
    """

    def local(self, info, interp, kid_extra):
        u, y, v, z = self.atom.args
        mz = self.mask(interp, z)
        mu, my, mv = self.mask(interp, u), self.mask(interp, y), self.mask(interp, v)
        for j, ex in enumerate(kid_extra, 1):
            here = frozenset(i for i, e in info.frontier_edge[j] if mz >> e & 1)
            if ex[0] != here:
                return False
        cs = sum(ex[1] for ex in kid_extra)
        ct = sum(ex[2] for ex in kid_extra)
        entering = False
        for e in _bits(mz):
            if info.esrc[e] == 0 and info.has_center:
                cs += 1
                if my != 1 << e:
                    return False
            if info.etgt[e] == 0 and info.has_center:
                ct += 1
                entering = True
        if cs > 1 or ct > 1:
            return False
        if my:
            if not (my & mz) or mu != info.center_mask or not info.has_center:
                return False
            if info.esrc[_bits(my)[0]] != 0:
                return False
        elif mu:
            return False
        if mv:
            if mv != info.center_mask or not entering:
                return False
        elif entering:
            return False
        out = frozenset(i for i, e in info.frontier_edge[0] if mz >> e & 1)
        return (out, cs, ct)

    def extra_final(self, extra) -> bool:
        return not extra[0] and extra[1] == 1 and extra[2] == 1


class SingletonNode(BaseNode):
    pass


_BASES = {
    "in": InNode,
    "=": EqNode,
    "shat": EndpointNode,
    "that": EndpointNode,
    "rhohat": LabelNode,
    "xihat": LabelNode,
    "center": CenterNode,
    "frontier": FrontierNode,
    "neighbors": NeighborsNode,
    "chain": ChainNode,
}


class AndNode(Node):
    def __init__(self, parts: list[Node], free, label) -> None:
        super().__init__(free, label)
        self.parts = parts

    def transition(self, info, interp, kids):
        out = []
        for n, part in enumerate(self.parts):
            s = part.step(info, interp, tuple(k[n] for k in kids))
            if s is None:
                return None
            out.append(s)
        return tuple(out)

    def compute_final(self, state):
        return all(p.is_final(s) for p, s in zip(self.parts, state))


class OrNode(Node):
    def __init__(self, parts: list[Node], free, label) -> None:
        super().__init__(free, label)
        self.parts = parts

    def transition(self, info, interp, kids):
        out = []
        for n, part in enumerate(self.parts):
            ks = tuple(k[n] for k in kids)
            out.append(None if any(k is None for k in ks) else part.step(info, interp, ks))
        if all(s is None for s in out):
            return None
        return tuple(out)

    def compute_final(self, state):
        return any(s is not None and p.is_final(s) for p, s in zip(self.parts, state))


class NotNode(Node):
    """Complement, kept inside unit decompositions and singleton interpretations.

    State: (inner state or None, identity slice of the subterm, first-order counts).
    """

    def __init__(self, part: Node, free, label) -> None:
        super().__init__(free, label)
        self.part = part
        self.fo = [v.uid for v in self.free if v.first_order]
        self.glue = _GLUE

    def transition(self, info, interp, kids):
        counts = [0] * len(self.fo)
        for k in kids:
            for n, c in enumerate(k[2]):
                counts[n] += c
        for n, u in enumerate(self.fo):
            m = interp.get(u, 0)
            if m:
                counts[n] += 1 if m & (m - 1) == 0 else 2
        if any(c > 1 for c in counts):
            return None
        ident = self.glue.step(info.slice, tuple(k[1] for k in kids))
        if ident is None:
            return None
        inner = tuple(k[0] for k in kids)
        s = None if any(k is None for k in inner) else self.part.step(info, interp, inner)
        return (s, ident, tuple(counts))

    def compute_final(self, state):
        s, ident, counts = state
        if not self.glue.is_final(ident) or any(c != 1 for c in counts):
            return False
        return s is None or not self.part.is_final(s)


class ExistsNode(Node):
    """Projection of one or more variables by subset construction.

    State: frozenset of body states (the sink is dropped).
    """

    def __init__(self, variables: list[Var], body: Node, free, label) -> None:
        super().__init__(free, label)
        self.vars = variables
        self.body = body
        self._choices: dict = {}

    def choices(self, info: SliceInfo) -> list[tuple[int, ...]]:
        got = self._choices.get(info)
        if got is None:
            per_var = []
            for v in self.vars:
                if v.on_edges:
                    dom = info.first_mask if v.domain == "first" else info.all_emask
                else:
                    dom = info.center_mask if v.domain == "center" else info.all_vmask
                if v.first_order:
                    per_var.append([0] + [1 << b for b in _bits(dom)])
                else:
                    per_var.append(_submasks(dom))
            got = self._choices[info] = list(itertools.product(*per_var))
        return got

    def transition(self, info, interp, kids):
        out = set()
        uids = [v.uid for v in self.vars]
        kid_sets = kids
        for choice in self.choices(info):
            local = dict(interp)
            for u, m in zip(uids, choice):
                local[u] = m
            for combo in itertools.product(*kid_sets):
                s = self.body.step(info, local, combo)
                if s is not None:
                    out.add(s)
        if not out:
            return None
        return frozenset(out)

    def compute_final(self, state):
        return any(self.body.is_final(s) for s in state)


_GLUE = GlueCheck()

# piece ends; non-negative values are out-frontier indices
_START, _END = -1, -2
_CLOSED = frozenset({(_START, _END)})


class UnionPathsAutomaton(Lazy):
    """Deterministic slice automaton for "the composed digraph is a union of k directed paths".

    This decides the same property as the compiled ``union_paths(k)``
    sentence with far fewer states. For one path, the restriction to a
    subterm is a set of pieces ``(a, b)``: a directed subpath that enters at
    out-frontier index ``a`` (or starts inside, ``_START``) and leaves at
    index ``b`` (or ends inside, ``_END``). A finished path is the single
    piece ``(_START, _END)``. A state is the set of k-tuples of piece sets
    realizable by some choice of paths covering the subterm, each tuple
    sorted because the paths are interchangeable.
    """

    def __init__(self, k: int) -> None:
        if k < 1:
            raise ValueError("k must be positive")
        self.k = k
        self._memo: dict = {}
        self._options: dict = {}
        self._perm: dict = {}
        self._info: dict = {}

    def info(self, s: UnitSlice) -> SliceInfo:
        got = self._info.get(s)
        if got is None:
            got = self._info[s] = SliceInfo(s)
        return got

    def _perms(self, t: tuple) -> list[tuple]:
        got = self._perm.get(t)
        if got is None:
            got = self._perm[t] = sorted(set(itertools.permutations(t)), key=repr)
        return got

    def step(self, sym: UnitSlice, kids: tuple):
        key = (sym, kids)
        if key in self._memo:
            return self._memo[key]
        info = self.info(sym)
        center_need = info.center_mask
        out = set()
        for combo in itertools.product(*kids):
            arrangements = itertools.product([combo[0]], *(self._perms(t) for t in combo[1:])) if combo else [()]
            for arr in arrangements:
                opts = [self._path_options(sym, tuple(t[p] for t in arr)) for p in range(self.k)]
                for choice in itertools.product(*opts):
                    cbits = 0
                    emask = 0
                    for _, c, e in choice:
                        cbits |= c
                        emask |= e
                    if cbits == center_need and emask == info.all_emask:
                        out.add(tuple(sorted((prof for prof, _, _ in choice), key=_profile_key)))
        res = frozenset(out) if out else None
        self._memo[key] = res
        return res

    def is_final(self, state) -> bool:
        return any(all(p == _CLOSED for p in t) for t in state)

    def _path_options(self, s: UnitSlice, kid_profiles: tuple) -> list:
        """(piece set, center used, edge mask) for every extension of one path."""
        key = (s, kid_profiles)
        got = self._options.get(key)
        if got is not None:
            return got
        info = self.info(s)
        forced_in = forced_out = 0
        for j, prof in enumerate(kid_profiles, 1):
            need = {x for piece in prof for x in piece if x >= 0}
            present = {i for i, _ in info.frontier_edge[j]}
            if not need <= present:
                self._options[key] = []
                return []
            for i, e in info.frontier_edge[j]:
                if i in need:
                    forced_in |= 1 << e
                else:
                    forced_out |= 1 << e
        got = []
        if not forced_in & forced_out:
            touching = 0
            for n in range(len(s.edges)):
                if info.esrc[n] == 0 and info.has_center or info.etgt[n] == 0 and info.has_center:
                    touching |= 1 << n
            free = info.all_emask & ~forced_in & ~forced_out
            for c in ((0, 1) if info.has_center else (0,)):
                for sub in _submasks(free):
                    emask = forced_in | sub
                    if not c and emask & touching:
                        continue
                    prof = _join_pieces(s, kid_profiles, c, emask)
                    if prof is not None:
                        got.append((prof, c, emask))
        self._options[key] = got
        return got


def _profile_key(prof: frozenset) -> tuple:
    return tuple(sorted(prof))


def _join_pieces(s: UnitSlice, kid_profiles: tuple, center: int, emask: int):
    """Pieces of one path after adding this slice's chosen center and edges, or None."""
    succ: dict = {}
    pred: dict = {}

    def link(a, b) -> bool:
        if a in succ or b in pred:
            return False
        succ[a] = b
        pred[b] = a
        return True

    for n in _bits(emask):
        e = s.edges[n]
        if not link(e.source, e.target):
            return None
    for j, prof in enumerate(kid_profiles, 1):
        for a, b in prof:
            x = ("S", j) if a == _START else (j, a)
            y = ("E", j) if b == _END else (j, b)
            if not link(x, y):
                return None
    nodes = set(succ) | set(pred)
    if center:
        nodes.add(CENTER)
    pieces = []
    seen = set()
    for x in nodes:
        if x in pred:
            continue
        y = x
        seen.add(y)
        while y in succ:
            y = succ[y]
            seen.add(y)
        if x == CENTER or x[0] == "S":
            a = _START
        elif x[0] == 0:
            a = x[1]
        else:
            return None
        if y == CENTER or y[0] == "E":
            b = _END
        elif y[0] == 0:
            b = y[1]
        else:
            return None
        pieces.append((a, b))
    if len(seen) != len(nodes):
        return None  # a directed cycle
    if sum(a == _START for a, _ in pieces) > 1 or sum(b == _END for _, b in pieces) > 1:
        return None
    if (_START, _END) in pieces and len(pieces) > 1:
        return None
    return frozenset(pieces)


class NativeNode(Node):
    """A closed subformula decided by a hand-built lazy automaton."""

    def __init__(self, lazy: Lazy, label: str) -> None:
        super().__init__((), label)
        self.lazy = lazy

    def transition(self, info, interp, kids):
        if any(k is None for k in kids):
            return None
        return self.lazy.step(info.slice, kids)

    def compute_final(self, state):
        return self.lazy.is_final(state)


DEFAULT_NATIVE = frozenset({"union_paths"})


def _flatten(f: Formula, kind: type) -> list[Formula]:
    if isinstance(f, kind):
        return [x for p in f.parts for x in _flatten(p, kind)]
    return [f]


class _Compiler:
    def __init__(self, native: Iterable[str] = DEFAULT_NATIVE) -> None:
        self.cache: dict = {}
        self.native = frozenset(native)
        self.shared: dict = {}

    def build(self, f: Formula) -> Node:
        key = f
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        node = self._build(f)
        self.cache[key] = node
        return node

    def _build(self, f: Formula) -> Node:
        label = str(f)[:80]
        if isinstance(f, Builtin):
            if f.name == "union_paths" and f.name in self.native:
                k = int(f.params[0])
                if k not in self.shared:
                    self.shared[k] = NativeNode(UnionPathsAutomaton(k), label)
                return self.shared[k]
            return self.build(f.expansion)
        if isinstance(f, Atom):
            if f.pred == "true":
                return TrueNode()
            if f.pred in DIGRAPH_PREDICATES:
                raise MsoError(f"predicate {f.pred!r} must be translated before compiling")
            return _BASES[f.pred](f)
        if isinstance(f, And):
            parts = list(dict.fromkeys(_flatten(f, And)))
            if len(parts) == 1:
                return self.build(parts[0])
            return AndNode([self.build(p) for p in parts], f.free_vars(), label)
        if isinstance(f, Or):
            parts = list(dict.fromkeys(_flatten(f, Or)))
            if len(parts) == 1:
                return self.build(parts[0])
            return OrNode([self.build(p) for p in parts], f.free_vars(), label)
        if isinstance(f, Not):
            return NotNode(self.build(f.part), f.free_vars(), label)
        if isinstance(f, Exists):
            variables = []
            body = f
            while isinstance(body, Exists):
                variables.append(body.var)
                body = body.body
            singles = [Atom("=", (v, v)) for v in variables if v.first_order]
            inner = conj(body, *singles) if singles else body
            return ExistsNode(variables, self.build(inner), f.free_vars(), label)
        raise MsoError(f"cannot compile {f!r}")


class SliceLogicAutomaton(Lazy):
    """Deterministic lazy slice automaton for a decomposition-vocabulary sentence."""

    def __init__(self, sentence: Formula, native: Iterable[str] = DEFAULT_NATIVE) -> None:
        if sentence.free_vars():
            raise MsoError("only sentences can be compiled to slice automata")
        self.formula = sentence
        self.root = _Compiler(native).build(sentence)
        self.glue = _GLUE
        self._info: dict = {}

    def info(self, s: UnitSlice) -> SliceInfo:
        got = self._info.get(s)
        if got is None:
            got = self._info[s] = SliceInfo(s)
        return got

    def step(self, sym: UnitSlice, kids: tuple):
        ident = self.glue.step(sym, tuple(k[1] for k in kids))
        if ident is None:
            return None
        inner = tuple(k[0] for k in kids)
        s = None if any(k is None for k in inner) else self.root.step(self.info(sym), {}, inner)
        return (s, ident)

    def is_final(self, state) -> bool:
        s, ident = state
        return s is not None and self.root.is_final(s) and self.glue.is_final(ident)

    def stats(self) -> dict:
        total = 0
        stack = [self.root]
        seen = set()
        while stack:
            n = stack.pop()
            if id(n) in seen:
                continue
            seen.add(id(n))
            total += n.state_count
            stack += [getattr(n, a) for a in ("body", "part") if hasattr(n, a)]
            stack += list(getattr(n, "parts", []))
        return {"states": total, "nodes": len(seen)}


def compile_formula(
    psi: Formula,
    alphabet: Iterable[UnitSlice] | None = None,
    cap: int | None = None,
    native: Iterable[str] = DEFAULT_NATIVE,
):
    """Compile a decomposition-vocabulary sentence.

    Returns the lazy automaton, or, when an alphabet is given, its explicit
    minimal deterministic automaton over that alphabet. Built-ins named in
    ``native`` use hand-built automata instead of their expansions.
    """
    if vocabulary(psi) == "digraph" and psi.predicates() & DIGRAPH_PREDICATES:
        raise MsoError("translate digraph-vocabulary formulas before compiling")
    _state_cap[0] = current_budget().states if cap is None else cap
    lazy = SliceLogicAutomaton(psi, native)
    if alphabet is None:
        return lazy
    explicit = materialize(lazy, RankedAlphabet.of_slices(alphabet), cap)
    return minimize(explicit)


def compile_digraph_sentence(phi: Formula, alphabet=None, cap=None, native: Iterable[str] = DEFAULT_NATIVE):
    return compile_formula(translate(phi), alphabet, cap, native)


# interpreted terms, for testing base automata directly

def run_interpreted(f: Formula, term) -> bool:
    """Run the automaton of ``f`` on a term whose symbols are (slice, {var: cells}).

    ``cells`` lists vertex endpoints (``CENTER`` or ``(j, i)``) for vertex
    variables and edge positions for edge variables. Free first-order
    variables are subjected to the singleton test.
    """
    comp = _Compiler()
    free_fo = [Atom("=", (v, v)) for v in sorted(f.free_vars(), key=lambda v: v.uid) if v.first_order]
    node = comp.build(conj(f, *free_fo) if free_fo else f)
    by_name = {v.uid: v for v in f.free_vars()}

    def go(t):
        (s, cells), kids = t
        info = SliceInfo(s)
        interp = {}
        for uid, items in cells.items():
            v = by_name[uid]
            m = 0
            for c in items:
                m |= 1 << (c if v.on_edges else info.vcell[c])
            interp[uid] = m
        ks = tuple(go(k) for k in kids)
        if any(k is None for k in ks):
            return None
        return node.step(info, interp, ks)

    res = go(term)
    return res is not None and node.is_final(res)
