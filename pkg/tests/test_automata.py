from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slicecount.automata import (
    AlphabetMismatch,
    FromExplicit,
    GlueCheck,
    LazyIntersection,
    LazyWeight,
    RankedAlphabet,
    TreeAutomaton,
    accepts,
    all_terms_automaton,
    complement,
    complete,
    count_accepted,
    count_runs,
    determinize,
    dump_automaton,
    enumerate_language,
    initial_automaton,
    intersect_lazy,
    inverse_project,
    leaf,
    load_automaton,
    materialize,
    minimize,
    node,
    product_intersect,
    product_union,
    project,
    run_state,
    slice_inverse_image,
    subdecomposition_automaton,
    weighted_automaton,
)
from slicecount.digraph import AbelianGroup, make_digraph
from slicecount.decomp import OliveTreeDecomposition
from slicecount.oracles import brute_enumerate_accepted, brute_terms, brute_unit_decompositions, oracle_compose
from slicecount.slices import (
    SliceTerm,
    UnitSlice,
    brute_subdecompositions,
    enumerate_alphabet,
    normalize_slice,
    olive_to_unit,
    unweight_slice,
    validate_unit_decomposition,
)

from helpers import random_automaton as _random_automaton

SIGMA = RankedAlphabet({"a": 0, "b": 0, "h": 1, "f": 2})
AF = RankedAlphabet({"a": 0, "f": 2})


def random_automaton(rnd, alphabet=SIGMA, max_states=5, density=0.3):
    return _random_automaton(rnd, alphabet, max_states, density)


def language(a, d=3):
    return {t for t in brute_terms(list(a.alphabet.items()), d) if accepts(a, t)}


TERMS3 = brute_terms(list(SIGMA.items()), 3)


def test_run_examples():
    a = TreeAutomaton(AF, {"q"}, {"q"}, {("a", ()): {"q"}})
    assert accepts(a, leaf("a"))
    assert not accepts(a, node("f", leaf("a"), leaf("a")))
    with pytest.raises(AlphabetMismatch):
        accepts(a, leaf("z"))


def test_all_terms_sequence():
    a = all_terms_automaton(AF)
    assert [count_accepted(a, d) for d in (1, 2, 3, 4)] == [1, 2, 5, 26]
    assert [len(brute_enumerate_accepted(a, d)) for d in (1, 2, 3, 4)] == [1, 2, 5, 26]


def test_empty_final_set_counts_zero():
    a = all_terms_automaton(AF)
    empty = TreeAutomaton(AF, a.states, set(), a.delta)
    assert all(count_accepted(empty, d) == 0 for d in range(1, 5))
    assert brute_enumerate_accepted(empty, 3) == set()


@settings(max_examples=200, deadline=None)
@given(st.randoms(use_true_random=False), st.integers(1, 4))
def test_count_matches_enumeration(rnd, d):
    a = random_automaton(rnd)
    accepted = brute_enumerate_accepted(a, d)
    assert count_accepted(a, d) == len(accepted)
    assert enumerate_language(a, d) == accepted


def test_determinize_example():
    nfa = TreeAutomaton(AF, {"q1", "q2"}, {"q2"}, {("a", ()): {"q1", "q2"}})
    dfa = determinize(nfa)
    assert dfa.deterministic and dfa.complete
    assert language(dfa, 3) == {leaf("a")}


@settings(max_examples=60, deadline=None)
@given(st.randoms(use_true_random=False))
def test_boolean_closure_membership_algebra(rnd):
    a, b = random_automaton(rnd), random_automaton(rnd)
    det, mini = determinize(a), minimize(a)
    inter, union = product_intersect(a, b), product_union(a, b)
    comp = complement(a)
    assert det.deterministic and det.complete and mini.deterministic
    assert minimize(mini).size == mini.size
    for t in TERMS3:
        x, y = accepts(a, t), accepts(b, t)
        assert accepts(det, t) == x and accepts(mini, t) == x and accepts(complete(a), t) == x
        assert accepts(inter, t) == (x and y)
        assert accepts(union, t) == (x or y)
        assert accepts(comp, t) == (not x)
        assert accepts(complement(comp), t) == x
        assert accepts(product_intersect(a, a), t) == x
        run_state(det, t)  # asserts a single state


def test_minimize_merges_equivalent_states():
    a = TreeAutomaton(AF, {1, 2}, {1, 2}, {("a", ()): {1}, ("f", (1, 1)): {2}, ("f", (1, 2)): {2}, ("f", (2, 1)): {1}, ("f", (2, 2)): {1}})
    assert len(minimize(a).states) == 1


@settings(max_examples=40, deadline=None)
@given(st.randoms(use_true_random=False))
def test_projection_and_inverse(rnd):
    a = random_automaton(rnd)
    pi = {"a": "a", "b": "a", "h": "h", "f": "f"}
    img = project(a, pi)
    target = RankedAlphabet({"a": 0, "h": 1, "f": 2})
    expected = {_map(t, pi) for t in language(a, 3)}
    got = {t for t in brute_terms(list(target.items()), 3) if accepts(img, t)}
    assert got == expected
    assert language(project(a, lambda s: s), 3) == language(a, 3)
    back = inverse_project(img, pi, SIGMA)
    for t in TERMS3:
        assert accepts(back, t) == accepts(img, _map(t, pi))
    if a.deterministic:
        assert inverse_project(a, lambda s: s, SIGMA).deterministic


def _map(t, pi):
    return (pi[t[0]], tuple(_map(k, pi) for k in t[1]))


def test_inverse_of_all_terms_is_all_terms():
    small = RankedAlphabet({"a": 0, "f": 2})
    back = inverse_project(all_terms_automaton(small), {"a": "a", "b": "a", "h": None, "f": "f"}.get, RankedAlphabet({"a": 0, "b": 0, "f": 2}))
    assert count_accepted(back, 3) == len(brute_terms([("a", 0), ("b", 0), ("f", 2)], 3))


def test_arity_changing_projection_is_rejected():
    a = all_terms_automaton(SIGMA)
    with pytest.raises(ValueError):
        project(a, {"a": "x", "b": "b", "h": "x", "f": "f"})


def test_weighted_automaton_examples():
    z2 = AbelianGroup.cyclic(2)
    a = weighted_automaton(AF, {"a": 1, "f": 0}, 1, z2)
    assert a.deterministic and a.complete and len(a.states) == 2
    aa = node("f", leaf("a"), leaf("a"))
    assert accepts(a, leaf("a"))
    assert accepts(a, node("f", leaf("a"), aa))
    assert not accepts(a, aa)
    single = weighted_automaton(RankedAlphabet({"c": 0}), {"c": 2}, 2, AbelianGroup.cyclic(3))
    assert language(single, 3) == {leaf("c")}


@settings(max_examples=50, deadline=None)
@given(st.randoms(use_true_random=False))
def test_weighted_automaton_matches_direct_weights(rnd):
    group = AbelianGroup.cyclic(rnd.randint(1, 4))
    w = {s: rnd.randrange(group.order) for s in SIGMA}
    target = rnd.randrange(group.order)
    a = weighted_automaton(SIGMA, w, target, group)

    def weight(t):
        return group.sum([w[t[0]], *(weight(k) for k in t[1])])

    for t in TERMS3:
        assert accepts(a, t) == (weight(t) == target)


# slice automata

ALPHABET = enumerate_alphabet(1, 1, ["a"], ["b"])


def test_initial_automaton_examples():
    only = UnitSlice(0, "a")
    a = initial_automaton([only])
    assert count_accepted(a, 5) == 1
    assert a.deterministic
    a = initial_automaton(ALPHABET)
    assert sum(len(v) for v in a.delta.values()) == len(ALPHABET)


def test_initial_automaton_accepts_exactly_unit_decompositions():
    a = initial_automaton(ALPHABET)
    valid = {t.as_term() for t in brute_unit_decompositions(ALPHABET, 3)}
    found = set()
    rnd = random.Random(3)
    for t in brute_terms([(s, s.arity) for s in ALPHABET], 2):
        ok = validate_unit_decomposition(SliceTerm.from_term(t)).valid
        assert accepts(a, t) == ok
        if ok:
            found.add(t)
    assert found == {t for t in valid if SliceTerm.from_term(t).depth() <= 1}
    for _ in range(300):
        t = _random_term(rnd, ALPHABET, 3)
        assert accepts(a, t) == validate_unit_decomposition(SliceTerm.from_term(t)).valid


def _random_term(rnd, slices, depth):
    choices = [s for s in slices if depth > 1 or s.arity == 0]
    s = rnd.choice(choices)
    return (s, tuple(_random_term(rnd, slices, depth - 1) for _ in range(s.arity)))


def _cycle_term():
    g = make_digraph(3, [(1, 2), (2, 3), (3, 1)])
    return olive_to_unit(g, OliveTreeDecomposition.build(["", "1", "11"], {"v1": "", "v2": "1", "v3": "11"}))


def test_subdecomposition_automaton_examples():
    lone = SliceTerm({"": UnitSlice(0, "a")})
    assert count_runs(subdecomposition_automaton(lone, 0), 1) == 2
    t = _cycle_term()
    a = subdecomposition_automaton(t, 0)
    got = {SliceTerm.from_term(x) for x in enumerate_language(a, t.depth() + 1)}
    assert got == brute_subdecompositions(t, 0)
    assert all(not any(s.frontiers) or all(not f for f in s.frontiers) for u in got for s in u.slices.values())


@pytest.mark.parametrize("c", [0, 1, 2, None])
def test_subdecomposition_automaton_on_three_cycle(c):
    t = _cycle_term()
    a = subdecomposition_automaton(t, c)
    language_ = {SliceTerm.from_term(x) for x in enumerate_language(a, t.depth() + 1)}
    assert language_ == brute_subdecompositions(t, c)
    assert count_runs(a, t.depth() + 1) == len(language_)
    assert all(set(u.positions) == set(t.positions) for u in language_)


def test_slice_inverse_image_examples():
    weighted = enumerate_alphabet(1, 2, ["a"], ["b"], arities=[0, 1], group=AbelianGroup.cyclic(2))
    plain = enumerate_alphabet(1, 1, ["a"], ["b"], arities=[0, 1])
    target = initial_automaton(plain)
    # identity projection gives the target intersected with unit decompositions
    same = slice_inverse_image(lambda s: s, target, plain)
    assert count_accepted(same, 3) == count_accepted(target, 3)
    # every member of the normalizing inverse image normalizes into the target
    inv = slice_inverse_image(normalize_slice, initial_automaton(enumerate_alphabet(1, 1, ["a"], ["b"], arities=[0, 1])),
                              enumerate_alphabet(1, 2, ["a"], ["b"], arities=[0, 1]))
    members = enumerate_language(inv, 3)
    assert members
    for t in members:
        assert validate_unit_decomposition(SliceTerm.from_term(t).map(normalize_slice)).valid
    # unweighting: every weighting of a member is a member
    inv = slice_inverse_image(lambda s: normalize_slice(unweight_slice(s)), initial_automaton(plain), weighted)
    for t in brute_unit_decompositions(weighted, 2):
        assert accepts(inv, t.as_term())
    assert count_accepted(inv, 2) == len(brute_unit_decompositions(weighted, 2))


def test_slice_inverse_image_rejects_non_projections():
    plain = enumerate_alphabet(1, 1, ["a"], ["b"], arities=[0, 1])
    with pytest.raises(ValueError):
        slice_inverse_image(lambda s: UnitSlice(0), initial_automaton(plain), plain)


# lazy automata

def test_materialize_lazy_initial_automaton():
    lazy = GlueCheck()
    a = materialize(lazy, RankedAlphabet.of_slices(ALPHABET))
    for t in brute_terms([(s, s.arity) for s in ALPHABET], 2):
        assert accepts(a, t) == lazy.accepts(t) == accepts(initial_automaton(ALPHABET), t)


def test_intersect_lazy_counts_weighted_subdecompositions():
    t = _cycle_term()
    group = AbelianGroup.cyclic(4)
    size = LazyWeight(lambda s: 1 if s.center else 0, 2, group)
    product = intersect_lazy(subdecomposition_automaton(t), LazyIntersection(size, GlueCheck()))
    expected = [s for s in brute_subdecompositions(t) if len(oracle_compose(s).vertices) == 2]
    assert count_runs(product, t.depth() + 1) == len(expected)


def test_from_explicit_determinizes():
    nfa = TreeAutomaton(AF, {"q1", "q2"}, {"q2"}, {("a", ()): {"q1", "q2"}, ("f", ("q1", "q2")): {"q2"}})
    lazy = FromExplicit(nfa)
    for t in brute_terms(list(AF.items()), 3):
        assert lazy.accepts(t) == accepts(nfa, t)


# serialization

@settings(max_examples=30, deadline=None)
@given(st.randoms(use_true_random=False))
def test_dump_round_trip_plain_symbols(rnd):
    a = random_automaton(rnd)
    b = load_automaton(dump_automaton(a))
    for t in TERMS3:
        assert accepts(a, t) == accepts(b, t)
    assert dump_automaton(b) == dump_automaton(load_automaton(dump_automaton(b)))


def test_dump_round_trip_slice_symbols():
    a = minimize(initial_automaton(ALPHABET))
    b = load_automaton(dump_automaton(a))
    assert b.alphabet == a.alphabet
    assert count_accepted(a, 3) == count_accepted(b, 3)
    assert dump_automaton(b) == dump_automaton(a)
