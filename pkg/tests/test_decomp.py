from __future__ import annotations

import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slicecount.budget import BudgetError
from slicecount.decomp import (
    ArborealDecomposition,
    InvalidDecomposition,
    NotGoodError,
    OliveTreeDecomposition,
    arboreal_to_olive,
    arboreal_width,
    brute_force_directed_treewidth,
    check_z_normal,
    induced_olive,
    is_good,
    olive_width,
    tree_zig_zag,
    validate_arboreal,
    validate_olive,
)
from slicecount.digraph import make_digraph
from slicecount.oracles import brute_crossings, brute_simple_paths, brute_z_normal

from helpers import random_dag, random_digraph

CYCLE3 = make_digraph(3, [(1, 2), (2, 3), (3, 1)])
CYCLE3_CHAIN = ArborealDecomposition.build(
    {"": ["v1"], "1": ["v2"], "11": ["v3"]},
    {("", "1"): ["v1"], ("1", "11"): ["v2"]},
)


# oracles local to this file

def oracle_tzn(g, t: OliveTreeDecomposition) -> int:
    sets = [{v for v, p in t.mapping.items() if p.startswith(u)} for u in t.nodes]
    return max((brute_crossings(g, es, k) for _, es in brute_simple_paths(g) for k in sets), default=0)


def _shapes(n):
    """Well-numbered node sets of ordered rooted trees with n nodes (with repeats)."""
    if n == 1:
        yield [""]
        return
    for nodes in _shapes(n - 1):
        for parent in nodes:
            j = 1
            while parent + str(j) in nodes:
                j += 1
            child = parent + str(j)
            yield nodes + [child]


def oracle_min_widths(g):
    """(min width, min good width) over every arboreal decomposition with <= |V| nodes."""
    verts = sorted(g.vertices)
    best = best_good = None
    seen_shapes = set()
    for n in range(1, len(verts) + 1):
        for nodes in _shapes(n):
            key = frozenset(nodes)
            if key in seen_shapes:
                continue
            seen_shapes.add(key)
            arcs = [(p[:-1], p) for p in nodes if p]
            for assign in itertools.product(nodes, repeat=len(verts)):
                if set(assign) != set(nodes):
                    continue
                bags = {p: {v for v, a in zip(verts, assign) if a == p} for p in nodes}
                below = {p: set().union(*(bags[q] for q in nodes if q.startswith(p))) for p in nodes}
                options = []
                for a, b in arcs:
                    rest = [v for v in verts if v not in below[b]]
                    opts = [set(z) for r in range(len(rest) + 1) for z in itertools.combinations(rest, r)
                            if brute_z_normal(g, below[b], z)]
                    options.append(opts)
                if any(not o for o in options):
                    continue
                good = True
                for p in nodes:
                    kids = sorted(q for q in nodes if q[:-1] == p and q)
                    for i, j in itertools.combinations(range(len(kids)), 2):
                        if any(d.source in below[kids[j]] and d.target in below[kids[i]] for d in g.edges.values()):
                            good = False
                for zs in itertools.product(*options):
                    guard = dict(zip(arcs, zs))
                    w = 0
                    for p in nodes:
                        span = set(bags[p])
                        for (a, b), z in guard.items():
                            if p in (a, b):
                                span |= z
                        w = max(w, len(span) - 1)
                    best = w if best is None else min(best, w)
                    if good:
                        best_good = w if best_good is None else min(best_good, w)
    return best, best_good


# Z-normality

def test_z_normal_examples():
    assert check_z_normal(CYCLE3, {"v1"}, {"v2"})
    assert not check_z_normal(CYCLE3, {"v1"}, set())
    assert check_z_normal(CYCLE3, set(CYCLE3.vertices), set())
    with pytest.raises(ValueError, match="overlap"):
        check_z_normal(CYCLE3, {"v1"}, {"v1"})


@settings(max_examples=200, deadline=None)
@given(st.randoms(use_true_random=False), st.integers(1, 6))
def test_z_normal_matches_walk_oracle(rnd, n):
    g = random_digraph(rnd, n)
    vs = list(g.vertices)
    k = {v for v in vs if rnd.random() < 0.4}
    z = {v for v in vs if v not in k and rnd.random() < 0.3}
    assert check_z_normal(g, k, z) == brute_z_normal(g, k, z)


# arboreal decompositions

def test_validate_arboreal_examples():
    dag = make_digraph(3, [(1, 2), (2, 3)])
    rev = ArborealDecomposition.build({"": ["v3"], "1": ["v2"], "11": ["v1"]})
    assert validate_arboreal(dag, rev).valid
    assert arboreal_width(dag, rev) == 0
    missing = ArborealDecomposition.build({"": ["v3"], "1": ["v2"]})
    rep = validate_arboreal(dag, missing)
    assert not rep.valid and any("cover" in v for v in rep.violations)
    assert validate_arboreal(CYCLE3, CYCLE3_CHAIN).valid
    assert arboreal_width(CYCLE3, CYCLE3_CHAIN) == 1


def test_validate_arboreal_reports_each_problem():
    bad = ArborealDecomposition.build({"": ["v1"], "1": ["v2"], "11": ["v3"]})
    rep = validate_arboreal(CYCLE3, bad)
    assert len(rep.violations) == 2 and all("normal" in v for v in rep.violations)
    with pytest.raises(InvalidDecomposition):
        arboreal_width(CYCLE3, bad)


def test_is_good_examples():
    assert is_good(CYCLE3, CYCLE3_CHAIN)
    isolated = make_digraph(3, [])
    star = ArborealDecomposition.build({"": ["v1"], "1": ["v2"], "2": ["v3"]})
    assert is_good(isolated, star)
    back = make_digraph(3, [(3, 2)])
    assert not is_good(back, star)


def test_brute_force_treewidth_examples():
    assert brute_force_directed_treewidth(make_digraph(1, []))[0] == 0
    w, d = brute_force_directed_treewidth(CYCLE3)
    assert w == 1 and arboreal_width(CYCLE3, d) == 1
    with pytest.raises(BudgetError):
        brute_force_directed_treewidth(make_digraph(7, []))


@pytest.mark.parametrize("seed", range(10))
def test_dags_have_width_zero(seed):
    g = random_dag(random.Random(seed), 6)
    w, d = brute_force_directed_treewidth(g)
    assert w == 0
    assert validate_arboreal(g, d).valid and is_good(g, d) and arboreal_width(g, d) == 0


def test_brute_force_treewidth_matches_exhaustive_oracle_on_three_vertices():
    pairs = [(a, b) for a in range(1, 4) for b in range(1, 4) if a != b]
    for mask in itertools.product([0, 1], repeat=len(pairs)):
        g = make_digraph(3, [p for p, on in zip(pairs, mask) if on])
        best, best_good = oracle_min_widths(g)
        w, d = brute_force_directed_treewidth(g)
        assert w == best, g
        assert arboreal_width(g, d) == w
        wg, dg = brute_force_directed_treewidth(g, good_only=True)
        assert wg == best_good and is_good(g, dg)


@pytest.mark.parametrize("seed", range(4))
def test_brute_force_treewidth_matches_exhaustive_oracle_on_four_vertices(seed):
    g = random_digraph(random.Random(100 + seed), 4, p=0.4)
    best, best_good = oracle_min_widths(g)
    assert brute_force_directed_treewidth(g)[0] == best
    assert brute_force_directed_treewidth(g, good_only=True)[0] == best_good


# olive-tree decompositions

def test_arboreal_to_olive_single_bag():
    g = make_digraph(1, [])
    ot = arboreal_to_olive(g, ArborealDecomposition.build({"": ["v1"]}))
    assert set(ot.nodes) == {"", "1"} and ot.mapping == {"v1": "1"}
    assert tree_zig_zag(g, ot) == 0


def test_arboreal_to_olive_three_cycle_bound():
    ot = arboreal_to_olive(CYCLE3, CYCLE3_CHAIN)
    assert validate_olive(CYCLE3, ot).valid
    assert tree_zig_zag(CYCLE3, ot) <= 3 * 1 + 6
    assert tree_zig_zag(CYCLE3, ot) == oracle_tzn(CYCLE3, ot)


def test_arboreal_to_olive_rejects_bad_decompositions():
    back = make_digraph(3, [(3, 2)])
    star = ArborealDecomposition.build({"": ["v1"], "1": ["v2"], "2": ["v3"]})
    with pytest.raises(NotGoodError):
        arboreal_to_olive(back, star)


def test_arboreal_to_olive_layout():
    g = make_digraph(3, [])
    d = ArborealDecomposition.build({"": ["v2", "v1"], "1": ["v3"]})
    ot = arboreal_to_olive(g, d)
    # line of the root: a0 a1 a2 then b1, whose line successor is the child's a0
    assert ot.mapping == {"v1": "1", "v2": "11", "v3": "11111"}
    assert validate_olive(g, ot).valid


@settings(max_examples=40, deadline=None)
@given(st.randoms(use_true_random=False), st.integers(1, 5))
def test_arboreal_to_olive_preserves_bound_on_random_graphs(rnd, n):
    g = random_digraph(rnd, n)
    w, d = brute_force_directed_treewidth(g, good_only=True)
    ot = arboreal_to_olive(g, d)
    assert validate_olive(g, ot).valid
    assert tree_zig_zag(g, ot) == oracle_tzn(g, ot) <= 3 * w + 6


def test_olive_width_and_tzn_examples():
    edgeless = make_digraph(3, [])
    ot = OliveTreeDecomposition.build(["", "1", "2"], {"v1": "", "v2": "1", "v3": "2"})
    assert olive_width(edgeless, ot) == 0 and tree_zig_zag(edgeless, ot) == 0
    path = make_digraph(3, [(1, 2), (2, 3)])
    ot = OliveTreeDecomposition.build(["", "1", "2"], {"v2": "", "v1": "1", "v3": "2"})
    assert olive_width(path, ot) == 1
    assert tree_zig_zag(path, ot) == oracle_tzn(path, ot) == 1


def test_three_cycle_on_a_chain():
    ot = OliveTreeDecomposition.build(["", "1", "11"], {"v1": "", "v2": "1", "v3": "11"})
    assert tree_zig_zag(CYCLE3, ot) == oracle_tzn(CYCLE3, ot)
    # v3 -> v1 -> v2 leaves and re-enters the vertices below "1"
    assert oracle_tzn(CYCLE3, ot) == 2


def test_induced_olive():
    ot = OliveTreeDecomposition.build(["", "1", "11"], {"v1": "", "v2": "1", "v3": "11"})
    assert induced_olive(ot, CYCLE3) == ot
    empty = induced_olive(ot, make_digraph([], []))
    assert empty.nodes == ot.nodes and empty.mapping == {}
    smaller = induced_olive(ot, CYCLE3.induced(["v1", "v3"]))
    assert smaller.mapping == {"v1": "", "v3": "11"}


def test_validate_olive_detects_problems():
    ot = OliveTreeDecomposition.build(["", "1"], {"v1": "", "v2": ""})
    rep = validate_olive(make_digraph(3, []), ot)
    assert any("share" in v for v in rep.violations)
    assert any("unmapped" in v for v in rep.violations)
    with pytest.raises(InvalidDecomposition):
        olive_width(make_digraph(3, []), ot)


def test_decomposition_json_round_trip():
    assert ArborealDecomposition.from_json(CYCLE3_CHAIN.to_json()) == CYCLE3_CHAIN
    ot = arboreal_to_olive(CYCLE3, CYCLE3_CHAIN)
    assert OliveTreeDecomposition.from_json(ot.to_json()) == ot
