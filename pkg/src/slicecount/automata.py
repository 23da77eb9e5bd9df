"""Bottom-up tree automata over ranked alphabets of arity at most two.

Terms are nested pairs ``(symbol, (child, ...))``. Explicit automata keep a
sparse transition map ``(symbol, child_states) -> set of states``. Lazy
automata expose ``step``/``is_final`` and are used where the alphabet is
too large to list.
"""

from __future__ import annotations

import itertools
import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Iterator, Mapping, Optional

from .budget import BudgetError, current as current_budget
from .digraph import AbelianGroup
from .slices import (
    CENTER,
    SliceTerm,
    UnitSlice,
    identity_slice,
    incoming_identity,
    normalize_slice,
    unweight_slice,
)

Term = tuple  # (symbol, tuple[Term, ...])


def leaf(sym) -> Term:
    return (sym, ())


def node(sym, *kids: Term) -> Term:
    return (sym, tuple(kids))


def term_depth(t: Term) -> int:
    """Depth as the longest position length: a constant has depth 0."""
    return 1 + max((term_depth(k) for k in t[1]), default=-1)


def term_symbols(t: Term) -> Iterator:
    yield t[0]
    for k in t[1]:
        yield from term_symbols(k)


class AlphabetMismatch(ValueError):
    pass


def arity_of(sym) -> int:
    """Arity of a symbol that carries it (slices and interpreted slices)."""
    if isinstance(sym, UnitSlice):
        return sym.arity
    if isinstance(sym, tuple) and sym and isinstance(sym[0], UnitSlice):
        return sym[0].arity
    raise AlphabetMismatch(f"cannot infer the arity of {sym!r}")


class RankedAlphabet:
    """Ordered symbols with fixed arities."""

    def __init__(self, arities: Mapping[Hashable, int] | Iterable[tuple[Hashable, int]]) -> None:
        items = arities.items() if isinstance(arities, Mapping) else arities
        self._arity: dict = {}
        for sym, r in items:
            if r not in (0, 1, 2):
                raise ValueError(f"symbol {sym!r} has arity {r} outside 0..2")
            self._arity[sym] = r

    @classmethod
    def of_slices(cls, slices: Iterable[UnitSlice]) -> "RankedAlphabet":
        return cls((s, s.arity) for s in slices)

    def __contains__(self, sym) -> bool:
        return sym in self._arity

    def __iter__(self):
        return iter(self._arity)

    def __len__(self) -> int:
        return len(self._arity)

    def __eq__(self, other) -> bool:
        return isinstance(other, RankedAlphabet) and self._arity == other._arity

    def arity(self, sym) -> int:
        return self._arity[sym]

    def of_arity(self, r: int) -> list:
        return [s for s, a in self._arity.items() if a == r]

    def items(self):
        return self._arity.items()


@dataclass
class TreeAutomaton:
    alphabet: RankedAlphabet
    states: frozenset
    finals: frozenset
    delta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.states = frozenset(self.states)
        self.finals = frozenset(self.finals)
        self.delta = {k: frozenset(v) for k, v in self.delta.items() if v}
        for (sym, kids), targets in self.delta.items():
            if sym not in self.alphabet:
                raise AlphabetMismatch(f"transition on unknown symbol {sym!r}")
            if self.alphabet.arity(sym) != len(kids):
                raise AlphabetMismatch(f"symbol {sym!r} used with {len(kids)} children")
            if not (set(kids) | targets) <= self.states:
                raise ValueError("transition mentions an undeclared state")
        if not self.finals <= self.states:
            raise ValueError("final states must be states")

    @property
    def deterministic(self) -> bool:
        return all(len(v) == 1 for v in self.delta.values())

    @property
    def complete(self) -> bool:
        for sym, r in self.alphabet.items():
            for kids in itertools.product(self.states, repeat=r):
                if (sym, kids) not in self.delta:
                    return False
        return True

    @property
    def size(self) -> int:
        return len(self.states) + sum(len(v) for v in self.delta.values())

    def transitions(self) -> Iterator[tuple]:
        for (sym, kids), targets in self.delta.items():
            for q in targets:
                yield sym, kids, q


def run(a: TreeAutomaton, t: Term) -> frozenset:
    """States reachable at the root of ``t`` (a set, singleton or empty when deterministic)."""
    sym, kids = t
    if sym not in a.alphabet:
        raise AlphabetMismatch(f"symbol {sym!r} is not in the alphabet")
    sets = [run(a, k) for k in kids]
    out = set()
    for combo in itertools.product(*sets):
        out |= a.delta.get((sym, combo), frozenset())
    return frozenset(out)


def run_state(a: TreeAutomaton, t: Term):
    """The unique state of a deterministic automaton, or None."""
    states = run(a, t)
    assert len(states) <= 1, "run is not a function on a deterministic automaton"
    return next(iter(states), None)


def accepts(a: TreeAutomaton, t: Term) -> bool:
    return bool(run(a, t) & a.finals)


def relabel(a: TreeAutomaton) -> TreeAutomaton:
    """Rename states to 0..n-1 in a deterministic order."""
    order = {}
    for q in _state_order(a):
        order[q] = len(order)
    return TreeAutomaton(
        a.alphabet,
        set(order.values()),
        {order[q] for q in a.finals},
        {(s, tuple(order[k] for k in kids)): {order[q] for q in v} for (s, kids), v in a.delta.items()},
    )


def _natural(q) -> tuple:
    text = repr(q)
    return (len(text), text)


def _state_order(a: TreeAutomaton) -> list:
    seen = {}
    for (sym, kids), targets in a.delta.items():
        for q in list(kids) + sorted(targets, key=_natural):
            seen.setdefault(q, None)
    for q in sorted(a.states, key=_natural):
        seen.setdefault(q, None)
    return list(seen)


def determinize(a: TreeAutomaton) -> TreeAutomaton:
    """Reachable subset construction; the result is deterministic and complete."""
    cap = current_budget().states
    by_sym = defaultdict(list)
    for (sym, kids), targets in a.delta.items():
        by_sym[sym].append((kids, targets))
    reached: list[frozenset] = []
    index: dict[frozenset, int] = {}
    delta = {}

    def add(sset: frozenset) -> None:
        if sset not in index:
            index[sset] = len(reached)
            reached.append(sset)
            if len(reached) > cap:
                raise BudgetError("determinize", len(reached), cap)

    def target(sym, subsets) -> frozenset:
        out = set()
        for kids, targets in by_sym[sym]:
            if all(k in s for k, s in zip(kids, subsets)):
                out |= targets
        return frozenset(out)

    add(frozenset())
    for sym in a.alphabet.of_arity(0):
        t = target(sym, ())
        add(t)
        delta[(sym, ())] = {t}
    done = 0
    while done < len(reached):
        new = reached[done]
        done += 1
        for sym in a.alphabet.of_arity(1):
            t = target(sym, (new,))
            add(t)
            delta[(sym, (new,))] = {t}
        for sym in a.alphabet.of_arity(2):
            for other in reached[:done]:
                for pair in ((new, other), (other, new)):
                    if (sym, pair) not in delta:
                        t = target(sym, pair)
                        add(t)
                        delta[(sym, pair)] = {t}
    finals = {s for s in reached if s & a.finals}
    return relabel(TreeAutomaton(a.alphabet, set(reached), finals, delta))


def complete(a: TreeAutomaton) -> TreeAutomaton:
    """Add a rejecting sink for every missing transition."""
    sink = ("sink",)
    while sink in a.states:
        sink = sink + ("'",)
    states = set(a.states) | {sink}
    delta = dict(a.delta)
    for sym, r in a.alphabet.items():
        for kids in itertools.product(sorted(states, key=repr), repeat=r):
            delta.setdefault((sym, kids), {sink})
    return TreeAutomaton(a.alphabet, states, a.finals, delta)


def _det_complete(a: TreeAutomaton) -> TreeAutomaton:
    if a.deterministic:
        return a if a.complete else complete(a)
    return determinize(a)


def _reachable(a: TreeAutomaton) -> TreeAutomaton:
    reach = set()
    changed = True
    while changed:
        changed = False
        for (sym, kids), targets in a.delta.items():
            if all(k in reach for k in kids) and not targets <= reach:
                reach |= targets
                changed = True
    delta = {k: v for k, v in a.delta.items() if all(q in reach for q in k[1])}
    return TreeAutomaton(a.alphabet, reach, a.finals & reach, delta)


def minimize(a: TreeAutomaton) -> TreeAutomaton:
    """Minimal deterministic complete automaton by partition refinement."""
    a = _reachable(_det_complete(a))
    if not a.states:
        return a
    cls = {q: int(q in a.finals) for q in a.states}
    trans = [(sym, kids, next(iter(t))) for (sym, kids), t in a.delta.items()]
    while True:
        sig = defaultdict(set)
        for sym, kids, t in trans:
            for k, q in enumerate(kids):
                ctx = tuple(cls[x] if n != k else -1 for n, x in enumerate(kids))
                sig[q].add((sym, k, ctx, cls[t]))
        keys = {q: (cls[q], frozenset(sig[q])) for q in a.states}
        numbering = {}
        for q in sorted(a.states, key=lambda q: (cls[q], repr(q))):
            numbering.setdefault(keys[q], len(numbering))
        new = {q: numbering[keys[q]] for q in a.states}
        if len(set(new.values())) == len(set(cls.values())):
            cls = new
            break
        cls = new
    delta = {(sym, tuple(cls[k] for k in kids)): {cls[t]} for sym, kids, t in trans}
    return relabel(TreeAutomaton(a.alphabet, set(cls.values()), {cls[q] for q in a.finals}, delta))


def complement(a: TreeAutomaton) -> TreeAutomaton:
    d = _det_complete(a)
    return TreeAutomaton(d.alphabet, d.states, d.states - d.finals, d.delta)


def _product(a1: TreeAutomaton, a2: TreeAutomaton, final: Callable[[bool, bool], bool]) -> TreeAutomaton:
    if a1.alphabet != a2.alphabet:
        raise AlphabetMismatch("products need a common alphabet")
    d1, d2 = _det_complete(a1), _det_complete(a2)
    t1 = {k: next(iter(v)) for k, v in d1.delta.items()}
    t2 = {k: next(iter(v)) for k, v in d2.delta.items()}
    reached: list = []
    seen = set()
    delta = {}

    def add(p):
        if p not in seen:
            seen.add(p)
            reached.append(p)

    for sym in a1.alphabet.of_arity(0):
        p = (t1[(sym, ())], t2[(sym, ())])
        add(p)
        delta[(sym, ())] = {p}
    done = 0
    while done < len(reached):
        new = reached[done]
        done += 1
        for sym in a1.alphabet.of_arity(1):
            p = (t1[(sym, (new[0],))], t2[(sym, (new[1],))])
            add(p)
            delta[(sym, (new,))] = {p}
        for sym in a1.alphabet.of_arity(2):
            for other in reached[:done]:
                for x, y in ((new, other), (other, new)):
                    if (sym, (x, y)) not in delta:
                        p = (t1[(sym, (x[0], y[0]))], t2[(sym, (x[1], y[1]))])
                        add(p)
                        delta[(sym, (x, y))] = {p}
    finals = {p for p in reached if final(p[0] in d1.finals, p[1] in d2.finals)}
    return relabel(TreeAutomaton(a1.alphabet, set(reached), finals, delta))


def product_intersect(a1: TreeAutomaton, a2: TreeAutomaton) -> TreeAutomaton:
    return _product(a1, a2, lambda x, y: x and y)


def product_union(a1: TreeAutomaton, a2: TreeAutomaton) -> TreeAutomaton:
    return _product(a1, a2, lambda x, y: x or y)


def project(a: TreeAutomaton, pi: Mapping | Callable, target: Optional[RankedAlphabet] = None) -> TreeAutomaton:
    """Image automaton under an arity-preserving symbol map."""
    f = pi if callable(pi) else pi.__getitem__
    images = {}
    for sym, r in a.alphabet.items():
        img = f(sym)
        if target is not None and target.arity(img) != r:
            raise ValueError(f"projection changes the arity of {sym!r}")
        if img in images and images[img] != r:
            raise ValueError(f"projection merges symbols of different arity into {img!r}")
        images[img] = r
    alphabet = target or RankedAlphabet(images)
    delta = defaultdict(set)
    for (sym, kids), targets in a.delta.items():
        delta[(f(sym), kids)] |= targets
    return TreeAutomaton(alphabet, a.states, a.finals, delta)


def inverse_project(a: TreeAutomaton, pi: Mapping | Callable, source: RankedAlphabet) -> TreeAutomaton:
    """Automaton accepting the terms over ``source`` whose image ``a`` accepts."""
    f = pi if callable(pi) else pi.__getitem__
    delta = {}
    for sym, r in source.items():
        img = f(sym)
        if img in a.alphabet and a.alphabet.arity(img) != r:
            raise ValueError(f"projection changes the arity of {sym!r}")
        for (s2, kids), targets in a.delta.items():
            if s2 == img:
                delta[(sym, kids)] = targets
    return TreeAutomaton(source, a.states, a.finals, delta)


def count_runs(a: TreeAutomaton, d: int) -> int:
    """Accepting runs on terms of depth <= d (a constant has depth 1).

    Equals the number of accepted terms whenever every accepted term has a
    single accepting run, in particular for deterministic automata.
    """
    by_target = defaultdict(list)
    for sym, kids, q in a.transitions():
        by_target[q].append(kids)
    counts = {q: 0 for q in a.states}
    for _ in range(d):
        prev = counts
        counts = {}
        for q in a.states:
            total = 0
            for kids in by_target[q]:
                prod = 1
                for k in kids:
                    prod *= prev[k]
                    if not prod:
                        break
                total += prod
            counts[q] = total
    return sum(counts[q] for q in a.finals)


def count_accepted(a: TreeAutomaton, d: int) -> int:
    """Number of accepted terms of depth <= d, where a constant has depth 1."""
    if not a.deterministic:
        a = determinize(a)
    return count_runs(a, d)


def enumerate_language(a: TreeAutomaton, d: int) -> set[Term]:
    """Accepted terms of depth <= d (constant depth 1), by unfolding transitions."""
    by_target = defaultdict(list)
    for sym, kids, q in a.transitions():
        by_target[q].append((sym, kids))
    memo: dict = {}

    def terms(q, depth: int) -> set:
        if depth <= 0:
            return set()
        key = (q, depth)
        if key not in memo:
            out = set()
            for sym, kids in by_target[q]:
                for combo in itertools.product(*(terms(k, depth - 1) for k in kids)):
                    out.add((sym, tuple(combo)))
            memo[key] = out
        return memo[key]

    result = set()
    for q in a.finals:
        result |= {t for t in terms(q, d) if accepts(a, t)}
    return result


# weighted terms

def weighted_automaton(alphabet: RankedAlphabet, weight: Mapping | Callable, target: int, group: AbelianGroup) -> TreeAutomaton:
    """States are group elements; a term reaches the sum of its symbol weights."""
    w = weight if callable(weight) else weight.__getitem__
    states = list(group.elements)
    delta = {}
    for sym, r in alphabet.items():
        base = w(sym)
        for kids in itertools.product(states, repeat=r):
            delta[(sym, kids)] = {group.sum([base, *kids])}
    return TreeAutomaton(alphabet, states, {target}, delta)


# slice automata

def initial_automaton(slices: Iterable[UnitSlice]) -> TreeAutomaton:
    """Accepts exactly the unit decompositions over the given slices."""
    slices = list(slices)
    delta = {}
    states = set()
    for s in slices:
        kids = tuple(incoming_identity(s, j) for j in range(1, s.arity + 1))
        out = identity_slice(s)
        delta[(s, kids)] = {out}
        states |= set(kids) | {out}
    eps = UnitSlice(1)
    states.add(eps)
    return TreeAutomaton(RankedAlphabet.of_slices(slices), states, {eps}, delta)


def _sub_slices(s: UnitSlice, c: Optional[int]) -> Iterator[UnitSlice]:
    centered = [n for n, e in enumerate(s.edges) if CENTER in (e.source, e.target)]
    free = [n for n in range(len(s.edges)) if n not in centered]
    centers = [None] if s.center is None else [None, s.center]
    for center in centers:
        pool = free + (centered if center is not None else [])
        for size in range(len(pool) + 1):
            for chosen in itertools.combinations(pool, size):
                edges = [s.edges[n] for n in sorted(chosen)]
                fr = [[] for _ in s.frontiers]
                for e in edges:
                    for end in (e.source, e.target):
                        if end != CENTER:
                            fr[end[0]].append(end[1])
                if c is None or max(len(f) for f in fr) <= c:
                    yield UnitSlice(s.arity, center, fr, edges)


def subdecomposition_automaton(t: SliceTerm, c: Optional[int] = None) -> TreeAutomaton:
    """Accepts the sub-decompositions of ``t`` of width at most ``c``.

    States are (position, identity slice). The same leaf slice may fit
    several positions, so the automaton is unambiguous rather than
    deterministic: each accepted term has one accepting run.
    """
    delta = defaultdict(set)
    states = set()
    symbols = {}
    for p in t.positions:
        for sub in _sub_slices(t[p], c):
            kids = tuple((p + str(j), incoming_identity(sub, j)) for j in range(1, sub.arity + 1))
            out = (p, identity_slice(sub))
            delta[(sub, kids)].add(out)
            states |= set(kids) | {out}
            symbols[sub] = sub.arity
    final = ("", UnitSlice(1))
    states.add(final)
    return TreeAutomaton(RankedAlphabet(symbols), states, {final}, delta)


def slice_projection_check(pi: Callable[[UnitSlice], UnitSlice], samples: Iterable[UnitSlice]) -> None:
    """Raise if ``pi`` breaks arity or empty out-frontier on the samples."""
    for s in samples:
        img = pi(s)
        if img.arity != s.arity or (not s.frontiers[0]) != (not img.frontiers[0]):
            raise ValueError(f"{pi!r} is not a slice projection on {s!r}")


def slice_inverse_image(pi: Callable[[UnitSlice], UnitSlice], a: TreeAutomaton, source: Iterable[UnitSlice]) -> TreeAutomaton:
    """Inverse image under a slice projection, restricted to unit decompositions."""
    source = list(source)
    slice_projection_check(pi, source)
    alphabet = RankedAlphabet.of_slices(source)
    inv = inverse_project(a, pi, alphabet)
    return product_intersect(inv, initial_automaton(source))


NORMALIZE = normalize_slice
UNWEIGHT = unweight_slice


# lazy automata

class Lazy:
    """Deterministic automaton given by a transition function.

    ``step`` returns ``None`` for the rejecting sink, which every subclass
    treats as absorbing.
    """

    def step(self, sym, kids: tuple):
        raise NotImplementedError

    def is_final(self, state) -> bool:
        raise NotImplementedError

    def run(self, t: Term):
        sym, kids = t
        states = tuple(self.run(k) for k in kids)
        if any(s is None for s in states):
            return None
        return self.step(sym, states)

    def accepts(self, t: Term) -> bool:
        s = self.run(t)
        return s is not None and self.is_final(s)

    def accepts_term(self, t: SliceTerm) -> bool:
        return self.accepts(t.as_term())


class FromExplicit(Lazy):
    def __init__(self, a: TreeAutomaton) -> None:
        if not a.deterministic:
            a = determinize(a)
        self.delta = {k: next(iter(v)) for k, v in a.delta.items()}
        self.finals = a.finals

    def step(self, sym, kids):
        return self.delta.get((sym, kids))

    def is_final(self, state) -> bool:
        return state in self.finals


class LazyIntersection(Lazy):
    def __init__(self, *parts: Lazy) -> None:
        self.parts = parts

    def step(self, sym, kids):
        out = []
        for n, part in enumerate(self.parts):
            s = part.step(sym, tuple(k[n] for k in kids))
            if s is None:
                return None
            out.append(s)
        return tuple(out)

    def is_final(self, state) -> bool:
        return all(p.is_final(s) for p, s in zip(self.parts, state))


class LazyInverse(Lazy):
    """Runs ``inner`` on the image of every symbol under ``pi``."""

    def __init__(self, pi: Callable, inner: Lazy) -> None:
        self.pi = pi
        self.inner = inner
        self._images: dict = {}

    def step(self, sym, kids):
        img = self._images.get(sym)
        if img is None:
            img = self._images[sym] = self.pi(sym)
        return self.inner.step(img, kids)

    def is_final(self, state) -> bool:
        return self.inner.is_final(state)


class GlueCheck(Lazy):
    """Lazy initial automaton: the state is the identity slice of the subterm."""

    def __init__(self) -> None:
        self._memo: dict = {}
        self.final = UnitSlice(1)

    def step(self, sym: UnitSlice, kids):
        key = (sym, kids)
        if key not in self._memo:
            ok = all(incoming_identity(sym, j) == k for j, k in enumerate(kids, 1))
            self._memo[key] = identity_slice(sym) if ok else None
        return self._memo[key]

    def is_final(self, state) -> bool:
        return state == self.final


class LazyWeight(Lazy):
    """Lazy weighted-term automaton over a finite abelian group."""

    def __init__(self, weight: Callable, target: int, group: AbelianGroup) -> None:
        self.weight = weight
        self.target = target
        self.group = group
        self._memo: dict = {}

    def step(self, sym, kids):
        w = self._memo.get(sym)
        if w is None:
            w = self._memo[sym] = self.weight(sym)
        return self.group.sum([w, *kids])

    def is_final(self, state) -> bool:
        return state == self.target


def materialize(lazy: Lazy, alphabet: RankedAlphabet, cap: Optional[int] = None) -> TreeAutomaton:
    """Explicit deterministic automaton for the reachable part of a lazy one."""
    cap = current_budget().states if cap is None else cap
    tcap = current_budget().transitions
    reached: list = []
    seen = set()
    delta = {}
    explored = [0]

    def add(s) -> None:
        if s is not None and s not in seen:
            seen.add(s)
            reached.append(s)
            if len(reached) > cap:
                raise BudgetError("materialize", len(reached), cap)
        explored[0] += 1
        if explored[0] > tcap:
            raise BudgetError("materialize", explored[0], tcap, "too many transitions explored")

    for sym in alphabet.of_arity(0):
        s = lazy.step(sym, ())
        add(s)
        if s is not None:
            delta[(sym, ())] = {s}
    done = 0
    while done < len(reached):
        new = reached[done]
        done += 1
        for sym in alphabet.of_arity(1):
            s = lazy.step(sym, (new,))
            add(s)
            if s is not None:
                delta[(sym, (new,))] = {s}
        for sym in alphabet.of_arity(2):
            for other in reached[:done]:
                for pair in ((new, other), (other, new)):
                    if (sym, pair) not in delta:
                        s = lazy.step(sym, pair)
                        add(s)
                        if s is not None:
                            delta[(sym, pair)] = {s}
    finals = {s for s in reached if lazy.is_final(s)}
    return relabel(TreeAutomaton(alphabet, set(reached), finals, delta))


def intersect_lazy(a: TreeAutomaton, lazy: Lazy) -> TreeAutomaton:
    """Product of an explicit automaton with a lazy deterministic one.

    Only pairs reachable through the transitions of ``a`` are built; the
    result has one run per run of ``a``.
    """
    by_arity = defaultdict(list)
    for sym, kids, q in a.transitions():
        by_arity[len(kids)].append((sym, kids, q))
    pairs = defaultdict(set)  # state of a -> lazy states met with it
    delta = defaultdict(set)
    done_combo = set()
    for sym, _, q in by_arity[0]:
        s = lazy.step(sym, ())
        if s is not None:
            pairs[q].add(s)
            delta[(sym, ())].add((q, s))
    changed = True
    while changed:
        changed = False
        for r in (1, 2):
            for n, (sym, kids, q) in enumerate(by_arity[r]):
                options = [sorted(pairs[k], key=repr) for k in kids]
                for combo in itertools.product(*options):
                    key = (r, n, combo)
                    if key in done_combo:
                        continue
                    done_combo.add(key)
                    s = lazy.step(sym, combo)
                    if s is None:
                        continue
                    kid_states = tuple(zip(kids, combo))
                    delta[(sym, kid_states)].add((q, s))
                    if s not in pairs[q]:
                        pairs[q].add(s)
                        changed = True
    states = {(q, s) for q, ss in pairs.items() for s in ss}
    finals = {(q, s) for q, s in states if q in a.finals and lazy.is_final(s)}
    return TreeAutomaton(a.alphabet, states, finals, delta)


# serialization

def _sym_code(sym) -> str:
    if isinstance(sym, UnitSlice):
        text = sym.code()
    else:
        text = json.dumps(sym, separators=(",", ":"))
    if any(ch.isspace() for ch in text):
        raise ValueError(f"symbol {sym!r} contains whitespace and cannot be dumped")
    return text


def _sym_parse(text: str):
    data = json.loads(text)
    if isinstance(data, dict):
        return UnitSlice.from_json(data)
    return data


def dump_automaton(a: TreeAutomaton) -> str:
    names = {q: f"q{n}" for n, q in enumerate(_state_order(a))}
    lines = ["automaton 1"]
    for sym, r in a.alphabet.items():
        lines.append(f"symbol {r} {_sym_code(sym)}")
    for q in names:
        lines.append(f"state {names[q]}")
    for q in sorted(a.finals, key=lambda q: int(names[q][1:])):
        lines.append(f"final {names[q]}")
    for (sym, kids), targets in a.delta.items():
        lhs = " ".join(names[k] for k in kids)
        for q in sorted(targets, key=lambda q: int(names[q][1:])):
            lines.append(f"trans {len(kids)} {_sym_code(sym)} {lhs} -> {names[q]}".replace("  ", " "))
    return "\n".join(lines) + "\n"


def load_automaton(text: str) -> TreeAutomaton:
    alphabet = []
    states, finals = [], []
    delta = defaultdict(set)
    for raw in text.splitlines():
        parts = raw.split()
        if not parts or parts[0] == "automaton":
            continue
        kind = parts[0]
        if kind == "symbol":
            alphabet.append((_sym_parse(parts[2]), int(parts[1])))
        elif kind == "state":
            states.append(parts[1])
        elif kind == "final":
            finals.append(parts[1])
        elif kind == "trans":
            r = int(parts[1])
            sym = _sym_parse(parts[2])
            kids = tuple(parts[3 : 3 + r])
            if parts[3 + r] != "->":
                raise ValueError(f"malformed transition line: {raw!r}")
            delta[(sym, kids)].add(parts[4 + r])
        else:
            raise ValueError(f"unknown line kind {kind!r}")
    return TreeAutomaton(RankedAlphabet(alphabet), states, finals, delta)


def all_terms_automaton(alphabet: RankedAlphabet) -> TreeAutomaton:
    delta = {(sym, ("*",) * r): {"*"} for sym, r in alphabet.items()}
    return TreeAutomaton(alphabet, {"*"}, {"*"}, delta)
