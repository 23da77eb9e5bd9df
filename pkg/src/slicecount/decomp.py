"""Arboreal and olive-tree decompositions of digraphs."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping

from .budget import current as current_budget
from .digraph import Digraph, SimplePath, enumerate_simple_paths


class InvalidDecomposition(ValueError):
    pass


class NotGoodError(ValueError):
    pass


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.valid


def tree_violations(nodes: Iterable[str], max_children: int = 9) -> list[str]:
    """Problems with prefix closure and well numbering of a node-id set."""
    ns = set(nodes)
    out = []
    if ns and "" not in ns:
        out.append("root missing")
    for p in sorted(ns):
        if not p:
            continue
        if not p.isdigit() or "0" in p:
            out.append(f"node {p!r} is not a string over 1..{max_children}")
            continue
        if int(p[-1]) > max_children:
            out.append(f"node {p!r} exceeds {max_children} children")
        if p[:-1] not in ns:
            out.append(f"node {p!r} has no parent")
        if p[-1] != "1" and p[:-1] + str(int(p[-1]) - 1) not in ns:
            out.append(f"node {p!r} has a missing elder sibling")
    return out


def children(nodes, p: str) -> list[str]:
    out = []
    j = 1
    while p + str(j) in nodes:
        out.append(p + str(j))
        j += 1
    return out


# Z-normality

def _reach(g: Digraph, start: set[str], allowed: set[str], forward: bool) -> set[str]:
    seen = set(start)
    stack = list(start)
    while stack:
        v = stack.pop()
        for d in g.edges.values():
            a, b = (d.source, d.target) if forward else (d.target, d.source)
            if a == v and b in allowed and b not in seen:
                seen.add(b)
                stack.append(b)
    return seen


def check_z_normal(g: Digraph, k: Iterable[str], z: Iterable[str]) -> bool:
    """True iff no vertex outside K and Z is both reachable from K and reaches K in G - Z."""
    ks, zs = set(k), set(z)
    if ks & zs:
        raise ValueError(f"K and Z overlap on {sorted(ks & zs)}")
    allowed = set(g.vertices) - zs
    fwd = _reach(g, ks, allowed, True)
    bwd = _reach(g, ks, allowed, False)
    return not ((fwd & bwd) - ks)


# arboreal decompositions

@dataclass(frozen=True)
class ArborealDecomposition:
    nodes: tuple[str, ...]
    bags: Mapping[str, frozenset[str]]
    guards: Mapping[tuple[str, str], frozenset[str]]

    @classmethod
    def build(cls, bags: Mapping[str, Iterable[str]], guards: Mapping[tuple[str, str], Iterable[str]] = {}):
        nodes = tuple(sorted(bags, key=lambda p: (len(p), p)))
        return cls(
            nodes,
            {p: frozenset(b) for p, b in bags.items()},
            {arc: frozenset(z) for arc, z in guards.items()},
        )

    def guard(self, parent: str, child: str) -> frozenset[str]:
        return self.guards.get((parent, child), frozenset())

    def children(self, p: str) -> list[str]:
        return children(set(self.nodes), p)

    def below(self, p: str) -> set[str]:
        """V(p): union of the bags at p and its descendants."""
        out = set()
        for q in self.nodes:
            if q.startswith(p):
                out |= self.bags[q]
        return out

    def to_json(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "bags": {p: sorted(self.bags[p]) for p in self.nodes},
            "guards": {f"{a}->{b}": sorted(z) for (a, b), z in sorted(self.guards.items())},
        }

    @classmethod
    def from_json(cls, data: dict) -> "ArborealDecomposition":
        guards = {}
        for key, z in data.get("guards", {}).items():
            a, _, b = key.partition("->")
            guards[(a, b)] = z
        bags = data["bags"]
        for p in data.get("nodes", []):
            bags.setdefault(p, [])
        return cls.build(bags, guards)

    @classmethod
    def load(cls, path) -> "ArborealDecomposition":
        return cls.from_json(json.loads(Path(path).read_text()))


def validate_arboreal(g: Digraph, d: ArborealDecomposition) -> ValidationReport:
    rep = ValidationReport(tree_violations(d.nodes))
    nodes = set(d.nodes)
    seen: dict[str, str] = {}
    for p in d.nodes:
        bag = d.bags.get(p, frozenset())
        if not bag:
            rep.violations.append(f"bag at {p!r} is empty")
        for v in sorted(bag):
            if v not in g.vertices:
                rep.violations.append(f"bag at {p!r} holds unknown vertex {v!r}")
            elif v in seen:
                rep.violations.append(f"vertex {v!r} is in bags {seen[v]!r} and {p!r}")
            else:
                seen[v] = p
    missing = set(g.vertices) - set(seen)
    if missing:
        rep.violations.append(f"bags do not cover {sorted(missing)}")
    for (a, b), z in d.guards.items():
        if a not in nodes or b not in nodes or b[:-1] != a:
            rep.violations.append(f"guard on non-arc {a!r}->{b!r}")
        if not z <= set(g.vertices):
            rep.violations.append(f"guard {a!r}->{b!r} holds unknown vertices")
    if rep.violations:
        return rep
    for p in d.nodes:
        for c in d.children(p):
            k = d.below(c)
            z = d.guard(p, c)
            if k & z:
                rep.violations.append(f"guard {p!r}->{c!r} meets V({c!r})")
            elif not check_z_normal(g, k, z):
                rep.violations.append(f"V({c!r}) is not normal for guard {p!r}->{c!r}")
    return rep


def arboreal_width(g: Digraph, d: ArborealDecomposition) -> int:
    rep = validate_arboreal(g, d)
    if not rep:
        raise InvalidDecomposition("; ".join(rep.violations))
    width = 0
    for p in d.nodes:
        span = set(d.bags[p])
        if p:
            span |= d.guard(p[:-1], p)
        for c in d.children(p):
            span |= d.guard(p, c)
        width = max(width, len(span) - 1)
    return width


def is_good(g: Digraph, d: ArborealDecomposition) -> bool:
    rep = validate_arboreal(g, d)
    if not rep:
        raise InvalidDecomposition("; ".join(rep.violations))
    for p in d.nodes:
        below = [d.below(c) for c in d.children(p)]
        for i, j in itertools.combinations(range(len(below)), 2):
            for e in g.edges.values():
                if e.source in below[j] and e.target in below[i]:
                    return False
    return True


def brute_force_directed_treewidth(g: Digraph, good_only: bool = False) -> tuple[int, ArborealDecomposition]:
    """Exhaustive minimum-width arboreal decomposition, good when possible.

    A memoized search over (vertex set of a subtree, guard above it): pick
    a bag, a span containing bag and guard, split the rest into blocks and
    give each block a guard inside the span. With ``good_only`` the result
    is a minimum-width good decomposition, whose width may exceed dtw.
    """
    current_budget().check("dtw_vertices", len(g), "brute_force_directed_treewidth")
    verts = sorted(g.vertices)
    if not verts:
        raise ValueError("the empty digraph has no arboreal decomposition")
    arcs = {(d.source, d.target) for d in g.edges.values()}

    def blocks_acyclic(blocks: list[frozenset[str]]):
        """Order blocks so no edge goes from a later block to an earlier one."""
        remaining = list(blocks)
        order = []
        while remaining:
            for b in remaining:
                others = set().union(*(o for o in remaining if o is not b))
                if not any(t in b for s, t in arcs if s in others):
                    order.append(b)
                    remaining.remove(b)
                    break
            else:
                return None
        return order

    def solve_width(w: int, good: bool):
        @lru_cache(maxsize=None)
        def subtree(k: frozenset[str], guard: frozenset[str]):
            for bag_size in range(1, min(len(k), w + 1) + 1):
                for bag in itertools.combinations(sorted(k), bag_size):
                    bag = frozenset(bag)
                    base = bag | guard
                    if len(base) > w + 1:
                        continue
                    rest = k - bag
                    if not rest:
                        return (bag, ())
                    free = sorted(set(verts) - base)
                    for extra in range(0, w + 2 - len(base)):
                        for add in itertools.combinations(free, extra):
                            span = base | frozenset(add)
                            kids = split(rest, span)
                            if kids is not None:
                                return (bag, kids)
            return None

        @lru_cache(maxsize=None)
        def block(kj: frozenset[str], span: frozenset[str]):
            outside = sorted(span - kj)
            for size in range(len(outside) + 1):
                for z in itertools.combinations(outside, size):
                    z = frozenset(z)
                    if check_z_normal(g, kj, z):
                        sub = subtree(kj, z)
                        if sub is not None:
                            return (z, sub)
            return None

        def split(rest: frozenset[str], span: frozenset[str]):
            for parts in _set_partitions(sorted(rest)):
                parts = [frozenset(p) for p in parts]
                if good:
                    parts = blocks_acyclic(parts)
                    if parts is None:
                        continue
                found = []
                for kj in parts:
                    sol = block(kj, span)
                    if sol is None:
                        break
                    found.append((kj, sol))
                else:
                    return tuple(found)
            return None

        return subtree(frozenset(verts), frozenset())

    for w in range(len(verts)):
        sol = solve_width(w, good=True)
        if sol is None and not good_only:
            sol = solve_width(w, good=False)
        if sol is not None:
            bags: dict[str, frozenset[str]] = {}
            guards: dict[tuple[str, str], frozenset[str]] = {}

            def emit(p: str, node) -> None:
                bag, kids = node
                bags[p] = bag
                for j, (_, (z, sub)) in enumerate(kids, 1):
                    guards[(p, p + str(j))] = z
                    emit(p + str(j), sub)

            emit("", sol)
            return w, ArborealDecomposition.build(bags, guards)
    raise AssertionError("a single-bag decomposition always exists")


def _set_partitions(items: list):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for size in range(len(rest) + 1):
        for mates in itertools.combinations(rest, size):
            remaining = [x for x in rest if x not in mates]
            for tail in _set_partitions(remaining):
                yield [[first, *mates], *tail]


# olive-tree decompositions

@dataclass(frozen=True)
class OliveTreeDecomposition:
    nodes: tuple[str, ...]
    mapping: Mapping[str, str]

    @classmethod
    def build(cls, nodes: Iterable[str], mapping: Mapping[str, str]):
        return cls(tuple(sorted(set(nodes), key=lambda p: (len(p), p))), dict(mapping))

    def below(self, u: str) -> set[str]:
        """V(u): vertices mapped to u or a descendant of u."""
        return {v for v, p in self.mapping.items() if p.startswith(u)}

    def to_json(self) -> dict:
        return {"nodes": list(self.nodes), "map": dict(sorted(self.mapping.items()))}

    @classmethod
    def from_json(cls, data: dict) -> "OliveTreeDecomposition":
        return cls.build(data["nodes"], data["map"])

    @classmethod
    def load(cls, path) -> "OliveTreeDecomposition":
        return cls.from_json(json.loads(Path(path).read_text()))


def validate_olive(g: Digraph, t: OliveTreeDecomposition) -> ValidationReport:
    rep = ValidationReport(tree_violations(t.nodes, max_children=2))
    nodes = set(t.nodes)
    used: dict[str, str] = {}
    for v, p in sorted(t.mapping.items()):
        if v not in g.vertices:
            rep.violations.append(f"mapped vertex {v!r} is not in the digraph")
        if p not in nodes:
            rep.violations.append(f"vertex {v!r} maps to unknown node {p!r}")
        if p in used:
            rep.violations.append(f"vertices {used[p]!r} and {v!r} share node {p!r}")
        used[p] = v
    unmapped = set(g.vertices) - set(t.mapping)
    if unmapped:
        rep.violations.append(f"unmapped vertices {sorted(unmapped)}")
    return rep


def _require_olive(g: Digraph, t: OliveTreeDecomposition) -> None:
    rep = validate_olive(g, t)
    if not rep:
        raise InvalidDecomposition("; ".join(rep.violations))


def _cut(g: Digraph, inside: set[str]) -> set[str]:
    return {e for e, d in g.edges.items() if (d.source in inside) != (d.target in inside)}


def olive_width(g: Digraph, t: OliveTreeDecomposition) -> int:
    _require_olive(g, t)
    return max((len(_cut(g, t.below(u))) for u in t.nodes), default=0)


def crossings(g: Digraph, path: SimplePath, k: Iterable[str]) -> int:
    """Number of path edges with exactly one endpoint in K."""
    ks = set(k)
    return sum(1 for e in path.edges if (g.source(e) in ks) != (g.target(e) in ks))


def tree_zig_zag(g: Digraph, t: OliveTreeDecomposition) -> int:
    _require_olive(g, t)
    cuts = [_cut(g, t.below(u)) for u in t.nodes]
    cuts = [c for c in cuts if c]
    best = 0
    for path in enumerate_simple_paths(g):
        es = set(path.edges)
        for c in cuts:
            best = max(best, len(es & c))
    return best


def induced_olive(t: OliveTreeDecomposition, h: Digraph) -> OliveTreeDecomposition:
    return OliveTreeDecomposition(t.nodes, {v: t.mapping[v] for v in h.vertices})


def arboreal_to_olive(g: Digraph, d: ArborealDecomposition) -> OliveTreeDecomposition:
    """Replace each node p by the line a_p^0..a_p^|W(p)| b_p^1..b_p^r.

    Lines continue through child 1; b_p^j additionally hangs the line of the
    j-th child of p. The last b-node has no line successor, so that line
    takes the first child slot and the tree stays binary.
    """
    if not is_good(g, d):
        raise NotGoodError("the arboreal decomposition violates the child-order condition")
    nodes: list[str] = []
    mapping: dict[str, str] = {}

    def line(p: str, start: str) -> None:
        cur = start
        nodes.append(cur)
        for v in sorted(d.bags[p]):
            cur += "1"
            nodes.append(cur)
            mapping[v] = cur
        kids = d.children(p)
        for j, c in enumerate(kids, 1):
            cur += "1"
            nodes.append(cur)
            line(c, cur + ("2" if j < len(kids) else "1"))

    line("", "")
    return OliveTreeDecomposition.build(nodes, mapping)
