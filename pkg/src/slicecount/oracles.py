"""Slow, independent reference implementations used to cross-check the pipeline.

Nothing here calls the algorithms it is meant to check: formulas are read
from their S-expression form, paths and walks are enumerated directly, and
gluing is re-derived from the slice fields. Only the plain data containers
(``Digraph``, ``UnitSlice``, ``SliceTerm``) are shared.
"""

from __future__ import annotations

import itertools
from collections import Counter
from typing import Callable, Iterable, Iterator, Optional

from .budget import BudgetError, current as current_budget
from .digraph import TRIVIAL_GROUP, AbelianGroup, Digraph, Edge


def _guard(g: Digraph, stage: str) -> None:
    b = current_budget()
    b.check("oracle_vertices", len(g.vertices), stage)
    b.check("oracle_edges", len(g.edges), stage)


# paths, walks, isomorphism

def brute_simple_paths(g: Digraph) -> list[tuple[tuple[str, ...], tuple[str, ...]]]:
    """All simple paths as (vertices, edges), found by growing edge sequences."""
    _guard(g, "brute_simple_paths")
    found = [((v,), ()) for v in g.vertices]
    frontier = list(found)
    while frontier:
        nxt = []
        for vs, es in frontier:
            for e, d in g.edges.items():
                if d.source == vs[-1] and d.target not in vs:
                    nxt.append((vs + (d.target,), es + (e,)))
        found += nxt
        frontier = nxt
    return found


def brute_z_normal(g: Digraph, k: Iterable[str], z: Iterable[str]) -> bool:
    """Search every walk of length <= 2|V| avoiding Z that starts in K.

    K is Z-normal iff no such walk leaves K and comes back.
    """
    ks, zs = set(k), set(z)
    limit = 2 * len(g.vertices)
    # state: (current vertex, has left K)
    layer = {(v, False) for v in ks}
    for _ in range(limit):
        nxt = set()
        for v, out in layer:
            for d in g.edges.values():
                if d.source != v or d.target in zs:
                    continue
                w = d.target
                if w in ks:
                    if out:
                        return False
                    nxt.add((w, False))
                else:
                    nxt.add((w, True))
        layer = nxt
    return True


def brute_crossings(g: Digraph, edges: Iterable[str], k: Iterable[str]) -> int:
    ks = set(k)
    return sum(1 for e in edges if (g.edges[e].source in ks) != (g.edges[e].target in ks))


def brute_is_isomorphic(g1: Digraph, g2: Digraph) -> bool:
    """Try every bijection; compares labels and edge multiplicities with weights."""
    if len(g1.vertices) != len(g2.vertices) or len(g1.edges) != len(g2.edges):
        return False
    _guard(g1, "brute_is_isomorphic")
    v1, v2 = list(g1.vertices), list(g2.vertices)
    arcs2 = Counter((d.source, d.target, d.label, d.weight) for d in g2.edges.values())
    for perm in itertools.permutations(v2):
        phi = dict(zip(v1, perm))
        if any(g1.vertices[v] != g2.vertices[phi[v]] for v in v1):
            continue
        arcs1 = Counter((phi[d.source], phi[d.target], d.label, d.weight) for d in g1.edges.values())
        if arcs1 == arcs2:
            return True
    return False


# subgraph predicates

def brute_union_k_paths(g: Digraph, k: int) -> bool:
    """Whether some k simple paths (repetition allowed) cover every vertex and edge."""
    if k < 1:
        raise ValueError("k must be positive")
    if not g.vertices:
        return False
    paths = [(set(vs), set(es)) for vs, es in brute_simple_paths(g)]
    # only maximal-by-inclusion paths matter for covering
    paths = [p for p in paths if not any(p != o and p[0] <= o[0] and p[1] <= o[1] for o in paths)]
    allv, alle = set(g.vertices), set(g.edges)
    for combo in itertools.combinations_with_replacement(range(len(paths)), min(k, len(paths))):
        vs = set().union(*(paths[n][0] for n in combo))
        es = set().union(*(paths[n][1] for n in combo))
        if vs == allv and es == alle:
            return True
    return False


def _undirected_connected(vertices: set[str], pairs: Iterable[tuple[str, str]]) -> bool:
    if not vertices:
        return True
    adj = {v: set() for v in vertices}
    for a, b in pairs:
        if a in vertices and b in vertices:
            adj[a].add(b)
            adj[b].add(a)
    start = next(iter(vertices))
    seen = {start}
    stack = [start]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen == vertices


def _degrees(g: Digraph):
    indeg = Counter(d.target for d in g.edges.values())
    outdeg = Counter(d.source for d in g.edges.values())
    return indeg, outdeg


def is_cycle(g: Digraph) -> bool:
    if not g.vertices:
        return False
    indeg, outdeg = _degrees(g)
    if any(indeg[v] != 1 or outdeg[v] != 1 for v in g.vertices):
        return False
    return _undirected_connected(set(g.vertices), [(d.source, d.target) for d in g.edges.values()])


def is_strongly_connected(g: Digraph) -> bool:
    vs = list(g.vertices)
    for v in vs:
        seen = {v}
        stack = [v]
        while stack:
            u = stack.pop()
            for d in g.edges.values():
                if d.source == u and d.target not in seen:
                    seen.add(d.target)
                    stack.append(d.target)
        if len(seen) != len(vs):
            return False
    return True


def is_out_tree_with_leaves(g: Digraph, k: int) -> bool:
    """Non-empty out-branching (edges directed away from one root) with <= k sinks."""
    if not g.vertices:
        return False
    indeg, outdeg = _degrees(g)
    roots = [v for v in g.vertices if indeg[v] == 0]
    if len(roots) != 1 or any(indeg[v] > 1 for v in g.vertices):
        return False
    seen = {roots[0]}
    stack = [roots[0]]
    while stack:
        u = stack.pop()
        for d in g.edges.values():
            if d.source == u and d.target not in seen:
                seen.add(d.target)
                stack.append(d.target)
    if len(seen) != len(g.vertices):
        return False
    return sum(1 for v in g.vertices if outdeg[v] == 0) <= k


def has_minor(g: Digraph, n: int, pattern_edges: Iterable[tuple[int, int]]) -> bool:
    """Whether the underlying undirected graph of g has the pattern as a minor.

    Pattern vertices are 0..n-1; every map of g's vertices to branch sets
    (or to nothing) is tried.
    """
    pairs = [(d.source, d.target) for d in g.edges.values()]
    pattern = [tuple(p) for p in pattern_edges]
    vs = list(g.vertices)
    if n > len(vs):
        return False
    for assign in itertools.product(range(-1, n), repeat=len(vs)):
        branch = [set() for _ in range(n)]
        for v, a in zip(vs, assign):
            if a >= 0:
                branch[a].add(v)
        if any(not b for b in branch):
            continue
        if not all(_undirected_connected(b, pairs) for b in branch):
            continue
        ok = True
        for a, b in pattern:
            if not any((s in branch[a] and t in branch[b]) or (s in branch[b] and t in branch[a]) for s, t in pairs):
                ok = False
                break
        if ok:
            return True
    return False


def excludes_minors(g: Digraph, obstructions: Iterable[tuple[int, Iterable[tuple[int, int]]]]) -> bool:
    return not any(has_minor(g, n, es) for n, es in obstructions)


def brute_subgraphs(g: Digraph) -> Iterator[Digraph]:
    """Every subgraph: a vertex subset plus an edge subset inside it."""
    _guard(g, "brute_subgraphs")
    vs = list(g.vertices)
    for vmask in itertools.product([False, True], repeat=len(vs)):
        chosen = {v for v, m in zip(vs, vmask) if m}
        inner = [e for e, d in g.edges.items() if d.source in chosen and d.target in chosen]
        for emask in itertools.product([False, True], repeat=len(inner)):
            es = [e for e, m in zip(inner, emask) if m]
            yield Digraph({v: g.vertices[v] for v in chosen}, {e: g.edges[e] for e in es}, g.group)


def brute_count_subgraphs(g: Digraph, predicate: Callable[[Digraph], bool]) -> int:
    return sum(1 for h in brute_subgraphs(g) if predicate(h))


def query_predicate(
    formula=None,
    k: Optional[int] = None,
    l: Optional[int] = None,
    alpha: Optional[int] = None,
) -> Callable[[Digraph], bool]:
    """Conjunction of formula truth, union-of-k-paths, vertex count and weight."""

    def pred(h: Digraph) -> bool:
        if l is not None and len(h.vertices) != l:
            return False
        if alpha is not None and h.group.sum(d.weight for d in h.edges.values()) != alpha:
            return False
        if k is not None and not brute_union_k_paths(h, k):
            return False
        if formula is not None and not mso_eval(formula, h):
            return False
        return True

    return pred


# formula evaluation

def _tokens(text: str) -> list[str]:
    return text.replace("(", " ( ").replace(")", " ) ").split()


def _read(tokens: list[str], pos: int = 0):
    tok = tokens[pos]
    if tok == "(":
        out = []
        pos += 1
        while tokens[pos] != ")":
            item, pos = _read(tokens, pos)
            out.append(item)
        return tuple(out), pos + 1
    return tok, pos + 1


def read_sexp(text: str):
    toks = _tokens(text)
    try:
        item, pos = _read(toks)
    except IndexError:
        raise ValueError("unbalanced parentheses") from None
    if pos != len(toks):
        raise ValueError("trailing tokens after formula")
    return item


_QUANT = {"exists-v", "exists-e", "exists-vs", "exists-es"}


def _free(f, bound=frozenset()) -> frozenset:
    if isinstance(f, str):
        return frozenset()
    head = f[0]
    if head in _QUANT:
        return _free(f[2], bound | {f[1]})
    if head in ("and", "or", "not"):
        return frozenset().union(*(_free(x, bound) for x in f[1:]))
    if head in ("in", "=", "src", "tgt"):
        return frozenset(x for x in f[1:] if x not in bound)
    if head in ("vlabel", "elabel"):
        return frozenset([f[1]]) - bound
    return frozenset()


def _native(f, g: Digraph) -> bool:
    head = f if isinstance(f, str) else f[0]
    args = [] if isinstance(f, str) else list(f[1:])
    if head == "@cycle":
        return is_cycle(g)
    if head == "@strongly-connected":
        return is_strongly_connected(g)
    if head == "@union-paths":
        return brute_union_k_paths(g, int(args[0]))
    if head == "@out-tree-leaves":
        return is_out_tree_with_leaves(g, int(args[0]))
    if head == "@excludes-minors":
        import json
        from pathlib import Path

        data = json.loads(Path(args[0]).read_text())
        obs = [(o["vertices"] if isinstance(o["vertices"], int) else len(o["vertices"]), o["edges"]) for o in data["obstructions"]]
        return excludes_minors(g, obs)
    raise ValueError(f"unknown built-in {head!r}")


def mso_eval(phi, g: Digraph, assignment: Optional[dict] = None) -> bool:
    """Evaluate a digraph-vocabulary formula by exhaustive quantification.

    ``phi`` may be formula text, a nested-tuple S-expression, or any object
    with a ``to_sexp`` method. Results of subformulas are cached on the
    values of their free variables.
    """
    if hasattr(phi, "to_sexp"):
        phi = phi.to_sexp()
    elif isinstance(phi, str):
        phi = read_sexp(phi)
    b = current_budget()
    b.check("oracle_vertices", len(g.vertices), "mso_eval")
    b.check("oracle_edges", len(g.edges), "mso_eval")
    vs = list(g.vertices)
    es = list(g.edges)
    domains = {
        "exists-v": vs,
        "exists-e": es,
        "exists-vs": [frozenset(c) for n in range(len(vs) + 1) for c in itertools.combinations(vs, n)],
        "exists-es": [frozenset(c) for n in range(len(es) + 1) for c in itertools.combinations(es, n)],
    }
    free_cache: dict[int, tuple] = {}
    memo: dict = {}

    def free_of(f) -> tuple:
        key = id(f)
        if key not in free_cache:
            free_cache[key] = (f, tuple(sorted(_free(f))))
        return free_cache[key][1]

    def ev(f, env: dict) -> bool:
        if isinstance(f, str) or (f and isinstance(f[0], str) and f[0].startswith("@")):
            if isinstance(f, str) and f in ("true", "false"):
                return f == "true"
            return _native(f, g)
        head = f[0]
        if head in ("true", "false"):
            return head == "true"
        fv = free_of(f)
        key = (id(f), tuple(env[v] for v in fv))
        if key in memo:
            return memo[key]
        if head in _QUANT:
            var = f[1]
            body = f[2]
            res = False
            for val in domains[head]:
                inner = dict(env)
                inner[var] = val
                if ev(body, inner):
                    res = True
                    break
        elif head == "and":
            res = all(ev(x, env) for x in f[1:])
        elif head == "or":
            res = any(ev(x, env) for x in f[1:])
        elif head == "not":
            res = not ev(f[1], env)
        elif head == "in":
            res = env[f[1]] in env[f[2]]
        elif head == "=":
            res = env[f[1]] == env[f[2]]
        elif head == "src":
            res = g.edges[env[f[1]]].source == env[f[2]]
        elif head == "tgt":
            res = g.edges[env[f[1]]].target == env[f[2]]
        elif head == "vlabel":
            res = g.vertices[env[f[1]]] == f[2]
        elif head == "elabel":
            res = g.edges[env[f[1]]].label == f[2]
        else:
            raise ValueError(f"unknown formula head {head!r}")
        memo[key] = res
        return res

    env = dict(assignment or {})
    missing = set(_free(phi)) - set(env)
    if missing:
        raise ValueError(f"free variables without values: {sorted(missing)}")
    return ev(phi, env)


# automata

def _oracle_run(a, t) -> set:
    sym, kids = t
    sets = [_oracle_run(a, k) for k in kids]
    out = set()
    for combo in itertools.product(*sets):
        out |= set(a.delta.get((sym, tuple(combo)), ()))
    return out


def brute_terms(alphabet: Iterable[tuple[object, int]], d: int) -> list:
    """All terms of depth <= d where a constant has depth 1."""
    syms = list(alphabet)
    cap = current_budget().oracle_terms
    layers: list = [[]]
    for depth in range(1, d + 1):
        prev = layers[-1]
        cur = []
        for sym, r in syms:
            for kids in itertools.product(prev, repeat=r):
                cur.append((sym, tuple(kids)))
                if len(cur) > cap:
                    raise BudgetError("brute_terms", len(cur), cap)
        layers.append(cur)
    return layers[-1]


def brute_enumerate_accepted(a, d: int) -> set:
    """Accepted terms of depth <= d (constant depth 1) by enumerating every term."""
    terms = brute_terms(list(a.alphabet.items()), d)
    return {t for t in terms if _oracle_run(a, t) & set(a.finals)}


# unit decompositions

def _edge_on(s, end):
    hits = [e for e in s.edges if e.source == end or e.target == end]
    return hits[0] if len(hits) == 1 else None


def oracle_glue(child, parent, j: int) -> bool:
    """Re-derived gluing test between a child slice and frontier j of its parent."""
    if tuple(child.frontiers[0]) != tuple(parent.frontiers[j]):
        return False
    for i in child.frontiers[0]:
        a = _edge_on(child, (0, i))
        b = _edge_on(parent, (j, i))
        if a is None or b is None or a.label != b.label or a.weight != b.weight:
            return False
        up = a.target == (0, i) and b.source == (j, i)
        down = a.source == (0, i) and b.target == (j, i)
        if not (up or down):
            return False
    return True


def _shapes(n: int) -> Iterator[dict[str, int]]:
    """Binary tree shapes with exactly n positions, as position -> child count."""
    if n == 1:
        yield {"": 0}
        return
    for sub in _shapes(n - 1):
        yield {"": 1, **{"1" + p: r for p, r in sub.items()}}
    for left in range(1, n - 1):
        for a in _shapes(left):
            for b in _shapes(n - 1 - left):
                out = {"": 2}
                out.update({"1" + p: r for p, r in a.items()})
                out.update({"2" + p: r for p, r in b.items()})
                yield out


def brute_unit_decompositions(slices: Iterable, max_slices: int) -> list:
    """Every unit decomposition with at most ``max_slices`` positions over the slices."""
    from .slices import SliceTerm

    pool = list(slices)
    by_arity = {r: [s for s in pool if s.arity == r] for r in (0, 1, 2)}
    out = []
    for n in range(1, max_slices + 1):
        for shape in _shapes(n):
            order = sorted(shape, key=lambda p: (len(p), p))

            def fill(idx: int, chosen: dict):
                if idx == len(order):
                    out.append(SliceTerm(dict(chosen)))
                    return
                p = order[idx]
                for s in by_arity[shape[p]]:
                    if p == "":
                        if s.frontiers[0]:
                            continue
                    elif not oracle_glue(s, chosen[p[:-1]], int(p[-1])):
                        continue
                    if not _slice_ok(s):
                        continue
                    chosen[p] = s
                    fill(idx + 1, chosen)
                    del chosen[p]

            fill(0, {})
    return out


def _slice_ok(s) -> bool:
    ends = Counter()
    for e in s.edges:
        for end in (e.source, e.target):
            if end[0] >= 0:
                ends[end] += 1
        if e.source[0] >= 0 and e.source[0] == e.target[0]:
            return False
    frontier = {(j, i) for j, f in enumerate(s.frontiers) for i in f}
    return set(ends) == frontier and all(n == 1 for n in ends.values())


def oracle_compose(t, group: AbelianGroup = TRIVIAL_GROUP) -> Digraph:
    """Composed digraph, rebuilt by following frontier vertices between slices."""
    verts = {f"v@{p}": s.center for p, s in t.slices.items() if s.center is not None}
    edges = {}
    for p, s in t.slices.items():
        for e in s.edges:
            if e.source[0] >= 0:
                continue
            pos, cur = p, e
            while cur.target[0] >= 0:
                j, i = cur.target
                if j == 0:
                    pos, k = pos[:-1], int(pos[-1])
                    cur = _edge_on(t.slices[pos], (k, i))
                else:
                    pos = pos + str(j)
                    cur = _edge_on(t.slices[pos], (0, i))
            w = 0 if e.weight is None else e.weight
            edges[f"{p}:{e.target}"] = Edge(f"v@{p}", f"v@{pos}", e.label, w)
    return Digraph(verts, edges, group)
