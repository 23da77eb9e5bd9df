"""Unit slices, gluing, unit decompositions and their composition into digraphs.

A unit slice has an optional labeled center vertex, an out-frontier ``F0``
and up to two in-frontiers ``F1``, ``F2``. Frontier vertex ``[j, i]`` is
written as the tuple ``(j, i)`` and the center as ``CENTER``.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, NamedTuple, Optional

from .budget import BudgetError, current as current_budget
from .decomp import (
    InvalidDecomposition,
    OliveTreeDecomposition,
    ValidationReport,
    tree_violations,
    tree_zig_zag,
    validate_olive,
)
from .digraph import TRIVIAL_GROUP, AbelianGroup, Digraph, Edge

Endpoint = tuple[int, int]
CENTER: Endpoint = (-1, 0)


class SliceEdge(NamedTuple):
    source: Endpoint
    target: Endpoint
    label: str
    weight: Optional[int] = None


def _edge_key(e: SliceEdge):
    return (e.source, e.target, e.label, -1 if e.weight is None else e.weight)


def _fmt(p: Endpoint) -> str:
    return "C" if p == CENTER else f"[{p[0]},{p[1]}]"


class UnitSlice:
    """Immutable unit slice; edges are kept in canonical order."""

    __slots__ = ("arity", "center", "frontiers", "edges", "_hash")

    def __init__(
        self,
        arity: int,
        center: Optional[str] = None,
        frontiers: Iterable[Iterable[int]] | None = None,
        edges: Iterable[SliceEdge | tuple] = (),
    ) -> None:
        if frontiers is None:
            frontiers = [()] * (arity + 1)
        fr = tuple(tuple(sorted(f)) for f in frontiers)
        es = tuple(sorted((SliceEdge(tuple(e[0]), tuple(e[1]), *e[2:]) for e in edges), key=_edge_key))
        object.__setattr__(self, "arity", arity)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "frontiers", fr)
        object.__setattr__(self, "edges", es)
        object.__setattr__(self, "_hash", hash((arity, center, fr, es)))

    def __setattr__(self, name, value):
        raise AttributeError("UnitSlice is immutable")

    def key(self):
        return (self.arity, self.center or "", self.frontiers, tuple(_edge_key(e) for e in self.edges))

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, UnitSlice)
            and self._hash == other._hash
            and self.arity == other.arity
            and self.center == other.center
            and self.frontiers == other.frontiers
            and self.edges == other.edges
        )

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: "UnitSlice") -> bool:
        return self.key() < other.key()

    def __repr__(self) -> str:
        edges = ", ".join(
            f"{_fmt(e.source)}->{_fmt(e.target)}:{e.label}" + ("" if e.weight is None else f"/{e.weight}")
            for e in self.edges
        )
        return f"<slice r={self.arity} C={self.center} F={list(map(list, self.frontiers))} {{{edges}}}>"

    @property
    def width(self) -> int:
        return max((len(f) for f in self.frontiers), default=0)

    @property
    def extra_width(self) -> int:
        return max((max(f) for f in self.frontiers if f), default=0)

    def edge_at(self, end: Endpoint) -> Optional[int]:
        """Index of the (first) edge touching frontier vertex ``end``."""
        for n, e in enumerate(self.edges):
            if e.source == end or e.target == end:
                return n
        return None

    def to_json(self) -> dict:
        return {
            "arity": self.arity,
            "center": self.center,
            "frontiers": [list(f) for f in self.frontiers],
            "edges": [
                [list(e.source), list(e.target), e.label] + ([] if e.weight is None else [e.weight])
                for e in self.edges
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "UnitSlice":
        return cls(data["arity"], data.get("center"), data["frontiers"], [tuple(e) for e in data["edges"]])

    def code(self) -> str:
        """Compact whitespace-free encoding used in automaton dumps."""
        return json.dumps(self.to_json(), separators=(",", ":"), sort_keys=True)

    @classmethod
    def from_code(cls, text: str) -> "UnitSlice":
        return cls.from_json(json.loads(text))


def empty_slice(arity: int) -> UnitSlice:
    return UnitSlice(arity)


def validate_slice(s: UnitSlice, c: Optional[int] = None, q: Optional[int] = None) -> ValidationReport:
    rep = ValidationReport()
    v = rep.violations
    if s.arity not in (0, 1, 2):
        v.append(f"arity {s.arity} not in 0..2")
    if len(s.frontiers) != s.arity + 1:
        v.append("frontier count does not match arity")
    for j, f in enumerate(s.frontiers):
        if len(set(f)) != len(f) or any(i < 1 for i in f):
            v.append(f"frontier {j} must be distinct positive integers")
    incidence = {(j, i): 0 for j, f in enumerate(s.frontiers) for i in f}
    for e in s.edges:
        for end in (e.source, e.target):
            if end == CENTER:
                if s.center is None:
                    v.append("edge touches a missing center")
            elif end not in incidence:
                v.append(f"edge endpoint {_fmt(end)} is not a frontier vertex")
            else:
                incidence[end] += 1
        if e.source == CENTER and e.target == CENTER:
            v.append("s2: edge with both endpoints at the center")
        elif e.source != CENTER and e.target != CENTER and e.source[0] == e.target[0]:
            v.append(f"s2: edge {_fmt(e.source)}->{_fmt(e.target)} inside one frontier")
    for end, n in sorted(incidence.items()):
        if n != 1:
            v.append(f"s3: frontier vertex {_fmt(end)} touches {n} edges")
    if c is not None and s.width > c:
        v.append(f"width {s.width} exceeds {c}")
    if q is not None and s.extra_width > q:
        v.append(f"extra-width {s.extra_width} exceeds {q}")
    return rep


def _opposite(child_edge: SliceEdge, child_end: Endpoint, parent_edge: SliceEdge, parent_end: Endpoint) -> bool:
    return (child_edge.target == child_end and parent_edge.source == parent_end) or (
        child_edge.source == child_end and parent_edge.target == parent_end
    )


def can_glue(s: UnitSlice, parent: UnitSlice, j: int) -> bool:
    """Whether ``s`` glues to ``parent`` at in-frontier ``j``."""
    if not 1 <= j <= parent.arity:
        raise ValueError(f"frontier {j} exceeds parent arity {parent.arity}")
    if s.frontiers[0] != parent.frontiers[j]:
        return False
    for i in s.frontiers[0]:
        a = s.edge_at((0, i))
        b = parent.edge_at((j, i))
        if a is None or b is None:
            return False
        ea, eb = s.edges[a], parent.edges[b]
        if ea.label != eb.label or ea.weight != eb.weight:
            return False
        if not _opposite(ea, (0, i), eb, (j, i)):
            return False
    return True


def identity_slice(s: UnitSlice) -> UnitSlice:
    """The arity-1 empty-center slice that ``s`` glues to at frontier 1."""
    edges = []
    for i in s.frontiers[0]:
        e = s.edges[s.edge_at((0, i))]
        if e.target == (0, i):
            edges.append(SliceEdge((1, i), (0, i), e.label, e.weight))
        else:
            edges.append(SliceEdge((0, i), (1, i), e.label, e.weight))
    return UnitSlice(1, None, [s.frontiers[0], s.frontiers[0]], edges)


def incoming_identity(s: UnitSlice, j: int) -> UnitSlice:
    """The identity slice that glues to ``s`` at in-frontier ``j``."""
    edges = []
    for i in s.frontiers[j]:
        e = s.edges[s.edge_at((j, i))]
        if e.source == (j, i):
            edges.append(SliceEdge((1, i), (0, i), e.label, e.weight))
        else:
            edges.append(SliceEdge((0, i), (1, i), e.label, e.weight))
    return UnitSlice(1, None, [s.frontiers[j], s.frontiers[j]], edges)


def normalize_slice(s: UnitSlice) -> UnitSlice:
    """Renumber every frontier to 1..|F_j| keeping the order."""
    ranks = [{i: n for n, i in enumerate(f, 1)} for f in s.frontiers]

    def move(p: Endpoint) -> Endpoint:
        return p if p == CENTER else (p[0], ranks[p[0]][p[1]])

    return UnitSlice(
        s.arity,
        s.center,
        [range(1, len(f) + 1) for f in s.frontiers],
        [SliceEdge(move(e.source), move(e.target), e.label, e.weight) for e in s.edges],
    )


def unweight_slice(s: UnitSlice) -> UnitSlice:
    return UnitSlice(s.arity, s.center, s.frontiers, [e._replace(weight=None) for e in s.edges])


# alphabets

def enumerate_alphabet(
    c: int,
    q: int,
    vertex_labels: Iterable[str],
    edge_labels: Iterable[str],
    arities: Iterable[int] = (0, 1, 2),
    group: Optional[AbelianGroup] = None,
    cap: Optional[int] = None,
) -> list[UnitSlice]:
    """Every valid unit slice of width <= c and extra-width <= q, sorted canonically."""
    cap = current_budget().alphabet if cap is None else cap
    vlabels = sorted(set(vertex_labels))
    labels = [(b, None) for b in sorted(set(edge_labels))]
    if group is not None:
        labels = [(b, w) for b, _ in labels for w in group.elements]
    subsets = [s for n in range(min(c, q) + 1) for s in itertools.combinations(range(1, q + 1), n)]
    out = []

    def pair_up(todo: list[Endpoint], center: bool, acc: list[SliceEdge]) -> Iterator[list[SliceEdge]]:
        if not todo:
            yield list(acc)
            return
        v, rest = todo[0], todo[1:]
        options = []
        if center:
            options += [((v, CENTER), rest), ((CENTER, v), rest)]
        for u in rest:
            if u[0] != v[0]:
                others = [x for x in rest if x != u]
                options += [((v, u), others), ((u, v), others)]
        for (a, b), remaining in options:
            for lab, w in labels:
                acc.append(SliceEdge(a, b, lab, w))
                yield from pair_up(remaining, center, acc)
                acc.pop()

    for r in sorted(set(arities)):
        for center in [None, *vlabels]:
            for frs in itertools.product(subsets, repeat=r + 1):
                ends = [(j, i) for j, f in enumerate(frs) for i in f]
                for edges in pair_up(ends, center is not None, []):
                    out.append(UnitSlice(r, center, frs, edges))
                    if len(out) > cap:
                        est = _estimate(c, q, len(vlabels), len(labels))
                        raise BudgetError("enumerate_alphabet", est, cap, "slice alphabet too large to materialize")
    out.sort(key=UnitSlice.key)
    return out


def _estimate(c: int, q: int, nv: int, nl: int) -> int:
    subsets = sum(_binom(q, n) for n in range(min(c, q) + 1))
    total = 0
    for r in range(3):
        per = (2 * (r + 1) * c + 2) * nl
        total += (nv + 1) * subsets ** (r + 1) * per ** ((r + 1) * c)
    return total


def _binom(n: int, k: int) -> int:
    from math import comb

    return comb(n, k)


# terms

class SliceTerm:
    """A tree of unit slices keyed by position strings over {1, 2}."""

    __slots__ = ("slices", "_hash")

    def __init__(self, slices: Mapping[str, UnitSlice]) -> None:
        object.__setattr__(self, "slices", dict(sorted(slices.items(), key=lambda kv: (len(kv[0]), kv[0]))))
        object.__setattr__(self, "_hash", hash(tuple(self.slices.items())))

    def __setattr__(self, name, value):
        raise AttributeError("SliceTerm is immutable")

    @property
    def positions(self) -> list[str]:
        return list(self.slices)

    def __getitem__(self, p: str) -> UnitSlice:
        return self.slices[p]

    def __len__(self) -> int:
        return len(self.slices)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, SliceTerm) and self.slices == other.slices

    def __hash__(self) -> int:
        return self._hash

    def __repr__(self) -> str:
        return f"SliceTerm({self.slices})"

    def children(self, p: str) -> list[str]:
        out = []
        j = 1
        while p + str(j) in self.slices:
            out.append(p + str(j))
            j += 1
        return out

    def depth(self) -> int:
        """Longest position length; a single slice has depth 0."""
        return max(len(p) for p in self.slices)

    def map(self, fn) -> "SliceTerm":
        return SliceTerm({p: fn(s) for p, s in self.slices.items()})

    def as_term(self, p: str = ""):
        """Nested ``(symbol, children)`` form used by the automata module."""
        return (self.slices[p], tuple(self.as_term(c) for c in self.children(p)))

    @classmethod
    def from_term(cls, term) -> "SliceTerm":
        out = {}

        def walk(t, p):
            out[p] = t[0]
            for j, kid in enumerate(t[1], 1):
                walk(kid, p + str(j))

        walk(term, "")
        return cls(out)

    def to_json(self) -> dict:
        return {"positions": {p: s.to_json() for p, s in self.slices.items()}}

    @classmethod
    def from_json(cls, data: dict) -> "SliceTerm":
        return cls({p: UnitSlice.from_json(s) for p, s in data["positions"].items()})

    @classmethod
    def load(cls, path) -> "SliceTerm":
        return cls.from_json(json.loads(Path(path).read_text()))


def validate_unit_decomposition(t: SliceTerm) -> ValidationReport:
    rep = ValidationReport(tree_violations(t.positions, max_children=2))
    if rep.violations:
        return rep
    for p, s in t.slices.items():
        for msg in validate_slice(s).violations:
            rep.violations.append(f"slice {p!r}: {msg}")
        kids = t.children(p)
        if len(kids) != s.arity:
            rep.violations.append(f"slice {p!r} has arity {s.arity} but {len(kids)} children")
    if rep.violations:
        return rep
    if t[""].frontiers[0]:
        rep.violations.append("root slice has a non-empty out-frontier")
    for p in t.positions:
        for j, c in enumerate(t.children(p), 1):
            if not can_glue(t[c], t[p], j):
                rep.violations.append(f"slice {c!r} does not glue to {p!r} at frontier {j}")
    return rep


def _require_valid(t: SliceTerm) -> None:
    rep = validate_unit_decomposition(t)
    if not rep:
        raise InvalidDecomposition("; ".join(rep.violations))


@dataclass(frozen=True)
class SlicePart:
    position: str
    source: Endpoint
    index: int
    target: Endpoint


def sliced_edge_sequences(t: SliceTerm) -> list[tuple[SlicePart, ...]]:
    """Chains of slice edges that glue into single edges of the composed digraph."""
    _require_valid(t)
    seqs = []
    used = set()
    for p, s in t.slices.items():
        for n, e in enumerate(s.edges):
            if e.source != CENTER:
                continue
            parts = []
            pos, idx = p, n
            while True:
                edge = t[pos].edges[idx]
                parts.append(SlicePart(pos, edge.source, idx, edge.target))
                used.add((pos, idx))
                end = edge.target
                if end == CENTER:
                    break
                j, i = end
                if j == 0:
                    nxt, k = pos[:-1], int(pos[-1])
                    pos, idx = nxt, t[nxt].edge_at((k, i))
                else:
                    pos = pos + str(j)
                    idx = t[pos].edge_at((0, i))
            seqs.append(tuple(parts))
    total = sum(len(s.edges) for s in t.slices.values())
    if len(used) != total:
        raise InvalidDecomposition("some slice edges belong to no sequence")
    return seqs


def edge_id(part: SlicePart) -> str:
    """Id of the composed edge whose first sliced part is ``part``."""
    j, i = part.target
    return f"e@{part.position}#{j}.{i}"


def compose(t: SliceTerm, group: AbelianGroup = TRIVIAL_GROUP) -> Digraph:
    """The digraph obtained by gluing all slices of a unit decomposition."""
    seqs = sliced_edge_sequences(t)
    vertices = {f"v@{p}": s.center for p, s in t.slices.items() if s.center is not None}
    edges = {}
    for seq in seqs:
        first = t[seq[0].position].edges[seq[0].index]
        w = group.identity if first.weight is None else first.weight
        edges[edge_id(seq[0])] = Edge(f"v@{seq[0].position}", f"v@{seq[-1].position}", first.label, w)
    return Digraph(vertices, edges, group)


def normalize(t: SliceTerm) -> SliceTerm:
    return t.map(normalize_slice)


def unweight(t: SliceTerm) -> SliceTerm:
    return t.map(unweight_slice)


def term_width(t: SliceTerm) -> int:
    return max(s.width for s in t.slices.values())


def olive_to_unit(g: Digraph, ot: OliveTreeDecomposition) -> SliceTerm:
    """Normalized unit decomposition compatible with an olive-tree decomposition.

    Edge number ``n`` (in id order) travels along the tree path between the
    nodes of its endpoints, using frontier index ``n`` on every crossing.
    """
    rep = validate_olive(g, ot)
    if not rep:
        raise InvalidDecomposition("; ".join(rep.violations))
    if any(d.source == d.target for d in g.edges.values()):
        raise ValueError("self-loops cannot be represented by unit slices")
    nodes = set(ot.nodes)
    centers = {p: g.vlabel(v) for v, p in ot.mapping.items()}
    frontiers: dict[str, list[set[int]]] = {}
    arity: dict[str, int] = {}
    for p in ot.nodes:
        arity[p] = sum(1 for j in (1, 2) if p + str(j) in nodes)
        frontiers[p] = [set() for _ in range(arity[p] + 1)]
    edges: dict[str, list[SliceEdge]] = {p: [] for p in ot.nodes}
    for tag, (eid, d) in enumerate(g.edges.items(), 1):
        a, b = ot.mapping[d.source], ot.mapping[d.target]
        k = 0
        while k < min(len(a), len(b)) and a[k] == b[k]:
            k += 1
        route = [a[:n] for n in range(len(a), k - 1, -1)] + [b[:n] for n in range(k + 1, len(b) + 1)]
        ends = [[CENTER, CENTER] for _ in route]
        for n in range(len(route) - 1):
            x, y = route[n], route[n + 1]
            if len(y) < len(x):
                ends[n][1] = (0, tag)
                ends[n + 1][0] = (int(x[-1]), tag)
            else:
                ends[n][1] = (int(y[-1]), tag)
                ends[n + 1][0] = (0, tag)
        for p, (src, tgt) in zip(route, ends):
            edges[p].append(SliceEdge(src, tgt, d.label, d.weight))
            for end in (src, tgt):
                if end != CENTER:
                    frontiers[p][end[0]].add(end[1])
    raw = SliceTerm({p: UnitSlice(arity[p], centers.get(p), frontiers[p], edges[p]) for p in ot.nodes})
    return normalize(raw)


def compatible_olive(t: SliceTerm) -> tuple[Digraph, OliveTreeDecomposition]:
    g = compose(unweight(t))
    return g, OliveTreeDecomposition.build(t.positions, {f"v@{p}": p for p, s in t.slices.items() if s.center})


def decomposition_tzn(t: SliceTerm) -> int:
    g, ot = compatible_olive(t)
    return tree_zig_zag(g, ot)


# sub-slices and sub-decompositions

def is_subslice(sub: UnitSlice, s: UnitSlice) -> bool:
    if sub.arity != s.arity or len(sub.frontiers) != len(s.frontiers):
        return False
    if sub.center is not None and sub.center != s.center:
        return False
    pool = list(s.edges)
    for e in sub.edges:
        if e not in pool:
            return False
        pool.remove(e)
    return validate_slice(sub).valid


def is_subdecomposition(sub: SliceTerm, t: SliceTerm) -> bool:
    if set(sub.positions) != set(t.positions):
        return False
    if not all(is_subslice(sub[p], t[p]) for p in t.positions):
        return False
    return validate_unit_decomposition(sub).valid


def brute_subdecompositions(t: SliceTerm, c: Optional[int] = None) -> set[SliceTerm]:
    """All sub-decompositions of ``t`` of width at most ``c`` by exhaustive product."""
    budget = current_budget()
    budget.check("oracle_slices", len(t), "brute_subdecompositions")
    options = {}
    total = 1
    for p, s in t.slices.items():
        opts = []
        for keep in ([False, True] if s.center is not None else [False]):
            for mask in itertools.product([False, True], repeat=len(s.edges)):
                es = [e for e, m in zip(s.edges, mask) if m]
                if not keep and any(CENTER in (e.source, e.target) for e in es):
                    continue
                fr = [sorted(i for (jj, i) in _ends(es) if jj == j) for j in range(s.arity + 1)]
                sub = UnitSlice(s.arity, s.center if keep else None, fr, es)
                if (c is None or sub.width <= c) and validate_slice(sub).valid:
                    opts.append(sub)
        options[p] = opts
        total *= len(opts)
    budget.check("oracle_terms", total, "brute_subdecompositions")
    out = set()
    positions = t.positions
    # slices are valid individually and the shape is t's, so only gluing is left
    links = [(n, positions.index(ch), j) for n, p in enumerate(positions) for j, ch in enumerate(t.children(p), 1)]
    for combo in itertools.product(*(options[p] for p in positions)):
        if combo[0].frontiers[0] or not all(can_glue(combo[k], combo[n], j) for n, k, j in links):
            continue
        out.add(SliceTerm(dict(zip(positions, combo))))
    return out


def _ends(edges: Iterable[SliceEdge]) -> Iterator[Endpoint]:
    for e in edges:
        for end in (e.source, e.target):
            if end != CENTER:
                yield end
