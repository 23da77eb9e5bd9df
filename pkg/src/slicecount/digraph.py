"""Labeled, weighted multidigraphs and the small predicates built on them."""

from __future__ import annotations

import itertools
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Iterator, Mapping, NamedTuple

from .budget import current as current_budget


class AbelianGroup:
    """Finite abelian group on the elements ``0..n-1``.

    Built either as Z_m or from an addition table, which is checked for
    closure, associativity, commutativity, an identity and inverses.
    """

    def __init__(self, table: list[list[int]], modulus: int | None = None) -> None:
        n = len(table)
        if n == 0 or any(len(row) != n for row in table):
            raise ValueError("addition table must be a non-empty square")
        elements = range(n)
        for a in elements:
            for b in elements:
                if table[a][b] not in elements:
                    raise ValueError("addition table is not closed")
                if table[a][b] != table[b][a]:
                    raise ValueError("addition table is not commutative")
        for a, b, c in itertools.product(elements, repeat=3):
            if table[table[a][b]][c] != table[a][table[b][c]]:
                raise ValueError("addition table is not associative")
        ids = [e for e in elements if all(table[e][a] == a for a in elements)]
        if not ids:
            raise ValueError("addition table has no identity")
        self.identity = ids[0]
        self._neg = []
        for a in elements:
            inv = [b for b in elements if table[a][b] == self.identity]
            if not inv:
                raise ValueError("group law violated: element %d has no inverse" % a)
            self._neg.append(inv[0])
        self._table = tuple(tuple(row) for row in table)
        self.modulus = modulus

    @classmethod
    def cyclic(cls, m: int) -> "AbelianGroup":
        if m < 1:
            raise ValueError("modulus must be positive")
        grp = cls.__new__(cls)
        grp.identity = 0
        grp.modulus = m
        grp._table = None
        grp._neg = None
        return grp

    @property
    def order(self) -> int:
        return self.modulus if self._table is None else len(self._table)

    @property
    def elements(self) -> range:
        return range(self.order)

    def add(self, a: int, b: int) -> int:
        if self._table is None:
            return (a + b) % self.modulus
        return self._table[a][b]

    def neg(self, a: int) -> int:
        if self._table is None:
            return (-a) % self.modulus
        return self._neg[a]

    def sum(self, values) -> int:
        total = self.identity
        for v in values:
            total = self.add(total, v)
        return total

    def __contains__(self, a: object) -> bool:
        return isinstance(a, int) and 0 <= a < self.order

    def _key(self):
        return (self.modulus, self._table)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, AbelianGroup) and self._key() == other._key()

    def __hash__(self) -> int:
        return hash(self._key())

    def __repr__(self) -> str:
        if self._table is None:
            return f"AbelianGroup.cyclic({self.modulus})"
        return f"AbelianGroup({[list(r) for r in self._table]})"

    def to_json(self):
        if self._table is None:
            return {"weight_modulus": self.modulus}
        return {"weight_table": [list(r) for r in self._table]}


TRIVIAL_GROUP = AbelianGroup.cyclic(1)


class Edge(NamedTuple):
    source: str
    target: str
    label: str
    weight: int = 0


class Digraph:
    """Immutable vertex/edge-labeled multidigraph with group-valued weights."""

    __slots__ = ("_vertices", "_edges", "group", "_key")

    def __init__(
        self,
        vertices: Mapping[str, str],
        edges: Mapping[str, Edge | tuple] = (),
        group: AbelianGroup = TRIVIAL_GROUP,
    ) -> None:
        vs = {str(v): str(lab) for v, lab in dict(vertices).items()}
        es = {}
        for e, data in dict(edges).items():
            edge = Edge(*data)
            if edge.source not in vs or edge.target not in vs:
                raise ValueError(f"edge {e} has an endpoint outside the vertex set")
            if edge.weight not in group:
                raise ValueError(f"edge {e} weight {edge.weight} is not in {group}")
            es[str(e)] = edge
        self._vertices = MappingProxyType(dict(sorted(vs.items())))
        self._edges = MappingProxyType(dict(sorted(es.items())))
        self.group = group
        self._key = (tuple(self._vertices.items()), tuple(self._edges.items()), group)

    @property
    def vertices(self) -> Mapping[str, str]:
        return self._vertices

    @property
    def edges(self) -> Mapping[str, Edge]:
        return self._edges

    def vlabel(self, v: str) -> str:
        return self._vertices[v]

    def source(self, e: str) -> str:
        return self._edges[e].source

    def target(self, e: str) -> str:
        return self._edges[e].target

    def out_edges(self, v: str) -> list[str]:
        return [e for e, d in self._edges.items() if d.source == v]

    def in_edges(self, v: str) -> list[str]:
        return [e for e, d in self._edges.items() if d.target == v]

    def subgraph(self, vertices, edges=()) -> "Digraph":
        vs = set(vertices)
        return Digraph(
            {v: self._vertices[v] for v in vs},
            {e: self._edges[e] for e in edges},
            self.group,
        )

    def induced(self, vertices) -> "Digraph":
        vs = set(vertices)
        es = [e for e, d in self._edges.items() if d.source in vs and d.target in vs]
        return self.subgraph(vs, es)

    def without_loops(self) -> "Digraph":
        es = {e: d for e, d in self._edges.items() if d.source != d.target}
        return Digraph(self._vertices, es, self.group)

    def total_weight(self) -> int:
        return self.group.sum(d.weight for d in self._edges.values())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Digraph) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __len__(self) -> int:
        return len(self._vertices)

    def __repr__(self) -> str:
        return f"Digraph({dict(self._vertices)}, {dict(self._edges)})"

    def vertex_labels(self) -> list[str]:
        return sorted(set(self._vertices.values()))

    def edge_labels(self) -> list[str]:
        return sorted({d.label for d in self._edges.values()})

    # serialization

    def to_json(self) -> dict:
        out = {
            "vertices": [{"id": v, "label": lab} for v, lab in self._vertices.items()],
            "edges": [
                {"id": e, "source": d.source, "target": d.target, "label": d.label, "weight": d.weight}
                for e, d in self._edges.items()
            ],
        }
        out.update(self.group.to_json())
        return out

    @classmethod
    def from_json(cls, data: dict) -> "Digraph":
        if "weight_table" in data:
            group = AbelianGroup(data["weight_table"])
        else:
            group = AbelianGroup.cyclic(int(data.get("weight_modulus", 1)))
        header = data.get("header", {})
        vlabels = header.get("vertex_labels")
        elabels = header.get("edge_labels")
        vertices = {}
        for item in data.get("vertices", []):
            lab = str(item.get("label", "a"))
            if vlabels is not None and lab not in vlabels:
                raise ValueError(f"vertex label {lab!r} is not declared in the header")
            vid = str(item["id"])
            if vid in vertices:
                raise ValueError(f"duplicate vertex id {vid!r}")
            vertices[vid] = lab
        edges = {}
        for item in data.get("edges", []):
            lab = str(item.get("label", "b"))
            if elabels is not None and lab not in elabels:
                raise ValueError(f"edge label {lab!r} is not declared in the header")
            eid = str(item["id"])
            if eid in edges:
                raise ValueError(f"duplicate edge id {eid!r}")
            weight = int(item.get("weight", 0)) % group.order
            edges[eid] = Edge(str(item["source"]), str(item["target"]), lab, weight)
        return cls(vertices, edges, group)

    @classmethod
    def load(cls, path: str | Path) -> "Digraph":
        return cls.from_json(json.loads(Path(path).read_text()))


def make_digraph(n_or_vertices, arcs, vlabel: str = "a", elabel: str = "b") -> Digraph:
    """Convenience builder: vertices ``v1..vn`` (or given ids) and arcs as pairs.

    Arcs may be ``(u, v)`` pairs of ids or of 1-based integers.
    """
    if isinstance(n_or_vertices, int):
        ids = [f"v{i}" for i in range(1, n_or_vertices + 1)]
    else:
        ids = [str(v) for v in n_or_vertices]

    def vid(x) -> str:
        return f"v{x}" if isinstance(x, int) else str(x)

    edges = {f"e{i}": Edge(vid(u), vid(v), elabel) for i, (u, v) in enumerate(arcs, 1)}
    return Digraph({v: vlabel for v in ids}, edges)


def is_subgraph(h: Digraph, g: Digraph) -> bool:
    """Identity-based containment: shared ids carry identical data."""
    for v, lab in h.vertices.items():
        if g.vertices.get(v) != lab:
            return False
    for e, d in h.edges.items():
        if g.edges.get(e) != d:
            return False
    return True


def _vertex_invariant(g: Digraph, v: str) -> tuple:
    outs = sorted((g.edges[e].label, g.edges[e].weight) for e in g.out_edges(v))
    ins = sorted((g.edges[e].label, g.edges[e].weight) for e in g.in_edges(v))
    loops = sum(1 for d in g.edges.values() if d.source == v == d.target)
    return (g.vertices[v], loops, tuple(outs), tuple(ins))


def canonical_form(g: Digraph) -> Digraph:
    """Brute-force canonization: least encoding over invariant-respecting orders.

    Vertices are grouped by a label/degree invariant; only orders that list
    the groups in invariant order are tried.
    """
    current_budget().check("iso_vertices", len(g), "canonical_form")
    classes: dict[tuple, list[str]] = {}
    for v in g.vertices:
        classes.setdefault(_vertex_invariant(g, v), []).append(v)
    keys = sorted(classes)
    arcs = Counter((d.source, d.target, d.label, d.weight) for d in g.edges.values())
    best = None
    for perms in itertools.product(*(itertools.permutations(classes[k]) for k in keys)):
        order = [v for block in perms for v in block]
        pos = {v: i for i, v in enumerate(order)}
        code = tuple(sorted((pos[s], pos[t], lab, w, n) for (s, t, lab, w), n in arcs.items()))
        if best is None or code < best[0]:
            best = (code, order)
    order = best[1] if best else []
    labels = {f"n{i}": g.vertices[v] for i, v in enumerate(order)}
    edges = {}
    for i, (s, t, lab, w, n) in enumerate(_expand(best[0] if best else ())):
        edges[f"c{i}"] = Edge(f"n{s}", f"n{t}", lab, w)
    return Digraph(labels, edges, g.group)


def _expand(code):
    for s, t, lab, w, n in code:
        for _ in range(n):
            yield s, t, lab, w, 1


def is_isomorphic(g1: Digraph, g2: Digraph) -> bool:
    if len(g1) != len(g2) or len(g1.edges) != len(g2.edges):
        return False
    inv1 = Counter(_vertex_invariant(g1, v) for v in g1.vertices)
    inv2 = Counter(_vertex_invariant(g2, v) for v in g2.vertices)
    if inv1 != inv2:
        return False
    return canonical_form(g1) == canonical_form(g2)


@dataclass(frozen=True)
class SimplePath:
    """Alternating vertex/edge sequence ``v1 e1 v2 ... v_n``."""

    vertices: tuple[str, ...]
    edges: tuple[str, ...] = ()

    def __str__(self) -> str:
        parts = [self.vertices[0]]
        for e, v in zip(self.edges, self.vertices[1:]):
            parts.append(f"-{e}->{v}")
        return "".join(parts)


def enumerate_simple_paths(g: Digraph) -> Iterator[SimplePath]:
    """Every directed simple path, zero-edge paths included, exactly once."""
    current_budget().check("path_vertices", len(g), "enumerate_simple_paths")
    outs = {v: [(e, g.edges[e].target) for e in g.out_edges(v)] for v in g.vertices}

    def extend(vs: list[str], es: list[str]) -> Iterator[SimplePath]:
        yield SimplePath(tuple(vs), tuple(es))
        for e, w in outs[vs[-1]]:
            if w not in vs:
                vs.append(w)
                es.append(e)
                yield from extend(vs, es)
                vs.pop()
                es.pop()

    for v in g.vertices:
        yield from extend([v], [])
