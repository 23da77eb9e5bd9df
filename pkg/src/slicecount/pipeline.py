"""Counting subgraphs that satisfy a sentence, are unions of k paths, and have a given size and weight.

The driver turns a digraph into a unit decomposition, builds the lazy
automaton for the query, intersects it with the automaton of
sub-decompositions and counts accepting runs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Optional, Union

from .automata import (
    FromExplicit,
    GlueCheck,
    Lazy,
    LazyInverse,
    LazyIntersection,
    LazyWeight,
    TreeAutomaton,
    count_runs,
    intersect_lazy,
    subdecomposition_automaton,
)
from .budget import BudgetError, current as current_budget
from .decomp import (
    ArborealDecomposition,
    NotGoodError,
    OliveTreeDecomposition,
    arboreal_to_olive,
    arboreal_width,
    brute_force_directed_treewidth,
    is_good,
    tree_zig_zag,
)
from .digraph import TRIVIAL_GROUP, AbelianGroup, Digraph
from .mso import DEFAULT_NATIVE, Formula, builtin_formula, compile_formula, conj, parse_mso, translate
from .slices import CENTER, SliceTerm, UnitSlice, normalize_slice, olive_to_unit, unweight_slice

ANY = "any"


@dataclass(frozen=True)
class SliceWeighting:
    """``size`` counts centers in Z_m; ``weight`` sums edge weights once per composed edge."""

    kind: str
    group: AbelianGroup

    def __post_init__(self) -> None:
        if self.kind not in ("size", "weight"):
            raise ValueError(f"unknown weighting {self.kind!r}")


def size_weighting(m: int) -> SliceWeighting:
    return SliceWeighting("size", AbelianGroup.cyclic(m))


def weight_weighting(group: AbelianGroup) -> SliceWeighting:
    return SliceWeighting("weight", group)


def slice_weight(s: UnitSlice, w: SliceWeighting) -> int:
    """Weight of one slice.

    For ``weight``: an edge between the center and the out-frontier adds its
    weight, an edge joining two different in-frontiers subtracts it. Along
    every sliced edge sequence these terms sum to the weight once.
    """
    g = w.group
    if w.kind == "size":
        return 1 % g.order if s.center is not None else g.identity
    total = g.identity
    for e in s.edges:
        mu = g.identity if e.weight is None else e.weight
        ends = {e.source, e.target}
        if CENTER in ends:
            other = e.target if e.source == CENTER else e.source
            if other[0] == 0:
                total = g.add(total, mu)
        elif e.source[0] != 0 and e.target[0] != 0 and e.source[0] != e.target[0]:
            total = g.add(total, g.neg(mu))
    return total


def decomposition_weight(t: SliceTerm, w: SliceWeighting) -> int:
    return w.group.sum(slice_weight(t[p], w) for p in t.positions)


class SliceFilter(Lazy):
    """Accepts every unit decomposition whose slices pass ``keep``; state is ()."""

    def __init__(self, keep: Callable[[UnitSlice], bool]) -> None:
        self.keep = keep

    def step(self, sym, kids):
        return () if self.keep(sym) else None

    def is_final(self, state) -> bool:
        return True


def _lazy(a: Union[Lazy, TreeAutomaton]) -> Lazy:
    return FromExplicit(a) if isinstance(a, TreeAutomaton) else a


def saturated_automaton(phi: Formula | str, k: int, z: int, native=DEFAULT_NATIVE) -> Lazy:
    """Lazy deterministic slice automaton for ``phi`` and "union of k paths".

    The automaton is defined on all slices, so it is z-saturated for every
    z; ``z`` and ``k`` only fix the width k*z of the sub-decompositions it is
    later intersected with, recorded on the result.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if isinstance(phi, str):
        phi = parse_mso(phi)
    a = compile_formula(translate(conj(builtin_formula("union_paths", k), phi)), native=native)
    a.k, a.z = k, z
    return a


def restricted_automaton(
    a: Union[Lazy, TreeAutomaton],
    q: Optional[int] = None,
    group: AbelianGroup = TRIVIAL_GROUP,
    l: Union[int, str] = ANY,
    m: Optional[int] = None,
    alpha: Union[int, str] = ANY,
    c: Optional[int] = None,
) -> Lazy:
    """Restrict ``a`` to decompositions with l vertices (mod m) and total weight alpha.

    ``a`` reads normalized unweighted slices; the result reads weighted
    slices of extra-width at most ``q`` and width at most ``c``. An ``any``
    size or weight skips that factor.
    """
    parts: list[Lazy] = [LazyInverse(lambda s: normalize_slice(unweight_slice(s)), _lazy(a))]
    if l != ANY:
        if m is None or not 0 <= l < m:
            raise ValueError(f"vertex count {l} must lie in 0..m-1 (m={m})")
        parts.append(LazyWeight(lambda s, w=size_weighting(m): slice_weight(s, w), l, AbelianGroup.cyclic(m)))
    if alpha != ANY:
        if alpha not in group:
            raise ValueError(f"weight {alpha!r} is not an element of the weight group")
        parts.append(LazyWeight(lambda s, w=weight_weighting(group): slice_weight(s, w), alpha, group))
    if q is not None or c is not None:
        parts.append(
            SliceFilter(lambda s: (q is None or s.extra_width <= q) and (c is None or s.width <= c))
        )
    parts.append(GlueCheck())
    return LazyIntersection(*parts)


@dataclass
class CountStats:
    states: int = 0
    transitions: int = 0
    width: Optional[int] = None
    z: int = 0
    slices: int = 0
    seconds: float = 0.0

    def to_json(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}


def count_matching_subgraphs(
    t: SliceTerm, a: Union[Lazy, TreeAutomaton], k: int, z: int, stats: Optional[CountStats] = None
) -> int:
    """Number of sub-decompositions of ``t`` of width at most k*z accepted by ``a``.

    ``a`` must be deterministic; the sub-decomposition automaton has one
    run per accepted term, so the product does too and runs can be counted.
    """
    sub = subdecomposition_automaton(t, k * z)
    product = intersect_lazy(sub, _lazy(a))
    if stats is not None:
        stats.states = len(product.states)
        stats.transitions = product.size
    return count_runs(product, t.depth() + 1)


@dataclass
class CountQuery:
    formula: Union[Formula, str]
    k: int
    l: Union[int, str] = ANY
    alpha: Union[int, str] = ANY
    decomposition: Union[ArborealDecomposition, OliveTreeDecomposition, None] = None
    z: Optional[int] = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if self.l != ANY and (not isinstance(self.l, int) or self.l < 0):
            raise ValueError(f"vertex count must be a non-negative integer or 'any', got {self.l!r}")


def prepare(g: Digraph, query: CountQuery, stats: Optional[CountStats] = None) -> tuple[SliceTerm, int]:
    """Unit decomposition of ``g`` without self-loops and the zig-zag bound z."""
    h = g.without_loops()
    d = query.decomposition
    if d is None:
        try:
            w, d = brute_force_directed_treewidth(h, good_only=True)
        except BudgetError as exc:
            raise BudgetError(exc.stage, exc.size, exc.cap, "supply --decomposition") from exc
    if isinstance(d, ArborealDecomposition):
        w = arboreal_width(h, d)
        if not is_good(h, d):
            raise NotGoodError("the supplied arboreal decomposition is not good")
        ot = arboreal_to_olive(h, d)
        z = 3 * w + 6
    else:
        ot = d
        w = None
        if query.z is not None:
            z = query.z
        else:
            current_budget().check("path_vertices", len(h), "tree_zig_zag", "supply --z with the olive-tree decomposition")
            z = max(1, tree_zig_zag(h, ot))
    t = olive_to_unit(h, ot)
    if stats is not None:
        stats.width, stats.z, stats.slices = w, z, len(t)
    return t, z


def count_subgraphs(g: Digraph, query: CountQuery, stats: Optional[CountStats] = None) -> int:
    """Subgraphs H of g with H |= phi, H a union of k paths, |V(H)| = l and weight alpha."""
    start = time.perf_counter()
    if len(g) == 0:
        return 0  # the empty digraph is not a union of paths
    if query.l != ANY and query.l > len(g):
        return 0
    t, z = prepare(g, query, stats)
    m = len(g) + 1
    phi = parse_mso(query.formula) if isinstance(query.formula, str) else query.formula
    a = restricted_automaton(saturated_automaton(phi, query.k, z), None, g.group, query.l, m, query.alpha)
    n = count_matching_subgraphs(t, a, query.k, z, stats)
    if stats is not None:
        stats.seconds = round(time.perf_counter() - start, 3)
    return n
