"""Random instance generators shared by the test modules."""

from __future__ import annotations

import itertools

from slicecount.automata import TreeAutomaton
from slicecount.decomp import OliveTreeDecomposition
from slicecount.digraph import AbelianGroup, Digraph, Edge, make_digraph


def random_digraph(rnd, n, p=0.35, max_arcs=10):
    arcs = [(a, b) for a in range(1, n + 1) for b in range(1, n + 1) if a != b and rnd.random() < p]
    return make_digraph(n, arcs[:max_arcs])


def random_dag(rnd, n, p=0.5):
    order = rnd.sample(range(1, n + 1), n)
    arcs = [(order[i], order[j]) for i in range(n) for j in range(i + 1, n) if rnd.random() < p]
    return make_digraph(n, arcs)


def random_weighted(rnd, n, modulus, p=0.35, max_arcs=8):
    g = random_digraph(rnd, n, p, max_arcs)
    edges = {e: Edge(d.source, d.target, rnd.choice("bc"), rnd.randrange(modulus)) for e, d in g.edges.items()}
    verts = {v: rnd.choice("ax") for v in g.vertices}
    return Digraph(verts, edges, AbelianGroup.cyclic(modulus))


def random_binary_tree(rnd, size):
    nodes = [""]
    while len(nodes) < size:
        p = rnd.choice(nodes)
        for j in "12":
            if p + j not in nodes:
                if j == "2" or p + "1" not in nodes:
                    nodes.append(p + j)
                    break
    return nodes


def random_olive(rnd, g, extra=2):
    """Random binary tree with an injective placement of g's vertices."""
    nodes = random_binary_tree(rnd, len(g) + rnd.randrange(extra + 1))
    spots = rnd.sample(nodes, len(g))
    return OliveTreeDecomposition.build(nodes, dict(zip(sorted(g.vertices), spots)))


def random_automaton(rnd, alphabet, max_states=5, density=0.3):
    """Random, usually nondeterministic, automaton over a ranked alphabet."""
    states = list(range(rnd.randint(1, max_states)))
    delta = {}
    for sym, r in alphabet.items():
        for kids in itertools.product(states, repeat=r):
            targets = {q for q in states if rnd.random() < density}
            if targets:
                delta[(sym, kids)] = targets
    finals = {q for q in states if rnd.random() < 0.5}
    return TreeAutomaton(alphabet, states, finals, delta)
