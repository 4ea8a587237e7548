"""Büchi automata over arbitrary hashable labels and the algorithms the checker needs.

States are integer indices ``0 .. n-1``. Labels are compared by equality and ordered
by their printed form, so every iteration order below is deterministic.
"""

import itertools
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Generic, Hashable, Iterable, Iterator, Sequence, TypeVar

import networkx as nx

from .errors import BudgetExceeded, MissingProvenance, ValidationError

logger = logging.getLogger("hytslcheck.buchi")

L = TypeVar("L")

DEFAULT_COMPLEMENT_BUDGET = 10**6
DEFAULT_RANK_LIMIT = 8


@dataclass(frozen=True)
class Provenance:
    """Where a product transition came from: per-trace statements and the formula letter."""

    components: tuple
    letter: Any = None


@dataclass(frozen=True)
class Transition(Generic[L]):
    source: int
    label: L
    target: int
    provenance: Provenance | None = field(default=None, compare=False)


def label_key(label: Any) -> str:
    return str(label)


@dataclass(frozen=True)
class Lasso(Generic[L]):
    """The ultimately periodic word ``stem loop loop ...`` with an optional run."""

    stem: tuple
    loop: tuple
    stem_path: tuple = ()
    loop_path: tuple = ()

    def __post_init__(self):
        if not self.loop:
            raise ValueError("a lasso needs a nonempty loop")

    def __len__(self) -> int:
        return len(self.stem) + len(self.loop)

    def letter(self, position: int):
        if position < len(self.stem):
            return self.stem[position]
        return self.loop[(position - len(self.stem)) % len(self.loop)]

    def __str__(self) -> str:
        stem = " ".join(f"({label})" for label in self.stem)
        loop = " ".join(f"({label})" for label in self.loop)
        return f"{stem} [{loop}]^w".strip()


class BuchiAutomaton(Generic[L]):
    """An immutable Büchi automaton."""

    def __init__(
        self,
        num_states: int,
        initial: int,
        transitions: Iterable[Transition],
        accepting: Iterable[int],
        names: Sequence[str] | None = None,
    ):
        self.num_states = num_states
        self.initial = initial
        self.accepting = frozenset(accepting)
        self.names = tuple(names) if names is not None else tuple(f"q{i}" for i in range(num_states))

        unique: dict[tuple, Transition] = {}
        for t in transitions:
            unique.setdefault((t.source, t.label, t.target), t)
        self.transitions = tuple(
            sorted(unique.values(), key=lambda t: (t.source, label_key(t.label), t.target))
        )
        self._validate()

        self._outgoing: list[list[Transition]] = [[] for _ in range(num_states)]
        self._by_label: dict[tuple[int, Any], list[int]] = {}
        for t in self.transitions:
            self._outgoing[t.source].append(t)
            self._by_label.setdefault((t.source, t.label), []).append(t.target)

    def _validate(self) -> None:
        if not 0 <= self.initial < self.num_states:
            raise ValidationError(f"initial state {self.initial} out of range")
        if any(not 0 <= q < self.num_states for q in self.accepting):
            raise ValidationError("accepting state out of range")
        for t in self.transitions:
            if not (0 <= t.source < self.num_states and 0 <= t.target < self.num_states):
                raise ValidationError(f"transition {t.source}->{t.target} leaves the state space")
        if len(self.names) != self.num_states:
            raise ValidationError("one name per state is required")

    @property
    def states(self) -> range:
        return range(self.num_states)

    @property
    def all_accepting(self) -> bool:
        return len(self.accepting) == self.num_states

    @property
    def alphabet(self) -> tuple:
        return tuple(sorted({t.label for t in self.transitions}, key=label_key))

    def outgoing(self, state: int) -> list[Transition]:
        return self._outgoing[state]

    def successors_on(self, state: int, label: Any) -> list[int]:
        return self._by_label.get((state, label), [])

    def between(self, source: int, target: int) -> list[Transition]:
        return [t for t in self._outgoing[source] if t.target == target]

    def name(self, state: int) -> str:
        return self.names[state]

    def __repr__(self) -> str:
        return (
            f"BuchiAutomaton(states={self.num_states}, transitions={len(self.transitions)}, "
            f"accepting={len(self.accepting)})"
        )


def explore(
    initial: Hashable,
    successors: Callable[[Hashable], Iterable[tuple[Any, Hashable, Provenance | None]]],
    is_accepting: Callable[[Hashable], bool],
    name: Callable[[Hashable], str] = str,
    budget: int | None = None,
    what: str = "construction",
) -> BuchiAutomaton:
    """Breadth-first construction of the part reachable from ``initial``."""
    index: dict[Hashable, int] = {initial: 0}
    order = [initial]
    transitions: list[Transition] = []
    queue = deque([initial])
    while queue:
        key = queue.popleft()
        source = index[key]
        for label, target_key, provenance in successors(key):
            if target_key not in index:
                index[target_key] = len(order)
                order.append(target_key)
                queue.append(target_key)
                if budget is not None and len(order) > budget:
                    raise BudgetExceeded(len(order), budget, what)
            transitions.append(Transition(source, label, index[target_key], provenance))
    accepting = [i for i, key in enumerate(order) if is_accepting(key)]
    return BuchiAutomaton(len(order), 0, transitions, accepting, [name(key) for key in order])


def _reachable(automaton: BuchiAutomaton, start: int) -> list[int]:
    seen = {start}
    order = [start]
    queue = deque([start])
    while queue:
        q = queue.popleft()
        for t in automaton.outgoing(q):
            if t.target not in seen:
                seen.add(t.target)
                order.append(t.target)
                queue.append(t.target)
    return order


def _graph(automaton: BuchiAutomaton, nodes: Iterable[int] | None = None) -> nx.DiGraph:
    graph = nx.DiGraph()
    keep = set(automaton.states if nodes is None else nodes)
    graph.add_nodes_from(sorted(keep))
    graph.add_edges_from(
        (t.source, t.target) for t in automaton.transitions if t.source in keep and t.target in keep
    )
    return graph


def _nontrivial(graph: nx.DiGraph, component: set[int]) -> bool:
    if len(component) > 1:
        return True
    (node,) = component
    return graph.has_edge(node, node)


def _accepting_cycle_states(automaton: BuchiAutomaton) -> set[int]:
    """Reachable states lying in a nontrivial SCC that contains an accepting state."""
    graph = _graph(automaton, _reachable(automaton, automaton.initial))
    good: set[int] = set()
    for component in nx.strongly_connected_components(graph):
        if _nontrivial(graph, component) and component & automaton.accepting:
            good |= component
    return good


def _path(automaton: BuchiAutomaton, source: int, targets: set[int], allowed: set[int] | None = None):
    """Shortest transition path from ``source`` to a state in ``targets`` (first step mandatory
    when ``source`` itself is a target)."""
    parents: dict[int, Transition] = {}
    seen = {source}
    queue = deque([source])
    while queue:
        q = queue.popleft()
        for t in automaton.outgoing(q):
            if allowed is not None and t.target not in allowed:
                continue
            if t.target in targets:
                path = [t]
                node = q
                while node != source:
                    step = parents[node]
                    path.append(step)
                    node = step.source
                return tuple(reversed(path))
            if t.target not in seen:
                seen.add(t.target)
                parents[t.target] = t
                queue.append(t.target)
    return None


def is_empty(automaton: BuchiAutomaton) -> Lasso | None:
    """Return an accepting lasso, or None when the language is empty."""
    good = _accepting_cycle_states(automaton)
    for q in sorted(good & automaton.accepting):
        loop = _path(automaton, q, {q}, allowed=good)
        if loop is None:
            continue
        stem = () if q == automaton.initial else _path(automaton, automaton.initial, {q})
        return Lasso(
            tuple(t.label for t in stem),
            tuple(t.label for t in loop),
            stem,
            loop,
        )
    return None


def accepts(automaton: BuchiAutomaton, lasso: Lasso) -> bool:
    """Exact membership of the word ``stem loop^w``."""
    stem_length = len(lasso.stem)
    length = len(lasso)

    def following(position: int) -> int:
        return position + 1 if position + 1 < length else stem_length

    start = (automaton.initial, 0)
    successors: dict[tuple[int, int], list[tuple[int, int]]] = {}
    stack = [start]
    seen = {start}
    while stack:
        node = stack.pop()
        q, position = node
        nxt = following(position)
        succ = [(target, nxt) for target in automaton.successors_on(q, lasso.letter(position))]
        successors[node] = succ
        for s in succ:
            if s not in seen:
                seen.add(s)
                stack.append(s)

    # Tarjan on the loop part; stem positions never lie on a cycle
    index: dict[tuple[int, int], int] = {}
    low: dict[tuple[int, int], int] = {}
    on_stack: set[tuple[int, int]] = set()
    scc_stack: list[tuple[int, int]] = []
    counter = 0
    for root in sorted(n for n in seen if n[1] >= stem_length):
        if root in index:
            continue
        work = [(root, 0)]
        while work:
            node, i = work.pop()
            if i == 0:
                index[node] = low[node] = counter
                counter += 1
                scc_stack.append(node)
                on_stack.add(node)
            succ = successors[node]
            if i < len(succ):
                work.append((node, i + 1))
                child = succ[i]
                if child not in index:
                    work.append((child, 0))
                elif child in on_stack:
                    low[node] = min(low[node], index[child])
                continue
            if low[node] == index[node]:
                component = []
                while True:
                    member = scc_stack.pop()
                    on_stack.discard(member)
                    component.append(member)
                    if member == node:
                        break
                cyclic = len(component) > 1 or node in successors[node]
                if cyclic and any(q in automaton.accepting for q, _ in component):
                    return True
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
    return False


class _AutomatonSpace:
    """Adapter exposing an automaton to the product exploration."""

    def __init__(self, automaton: BuchiAutomaton):
        self.automaton = automaton
        self.initial = automaton.initial
        self.all_accepting = automaton.all_accepting

    def successors(self, state: int) -> Iterator[tuple[Any, int, Provenance | None]]:
        for t in self.automaton.outgoing(state):
            yield t.label, t.target, t.provenance

    def successors_on(self, state: int, label: Any) -> list[int]:
        return self.automaton.successors_on(state, label)

    def is_accepting(self, state: int) -> bool:
        return state in self.automaton.accepting

    def name(self, state: int) -> str:
        return self.automaton.name(state)


class _SubsetComplement:
    """Complement of an automaton whose states are all accepting.

    Such an automaton rejects a word exactly when some prefix has no run, so the
    complement is the subset construction accepting in the empty set.
    """

    all_accepting = False

    def __init__(self, automaton: BuchiAutomaton, alphabet: Sequence[Any]):
        self.automaton = automaton
        self.alphabet = alphabet
        self.initial = frozenset({automaton.initial})

    def successors_on(self, state: frozenset, label: Any) -> list[frozenset]:
        targets = set()
        for q in state:
            targets.update(self.automaton.successors_on(q, label))
        return [frozenset(targets)]

    def successors(self, state: frozenset):
        for label in self.alphabet:
            for target in self.successors_on(state, label):
                yield label, target, None

    def is_accepting(self, state: frozenset) -> bool:
        return not state

    def name(self, state: frozenset) -> str:
        return "{" + ",".join(self.automaton.name(q) for q in sorted(state)) + "}"


class _RankComplement:
    """Rank-based complement: level rankings bounded by ``2|Q|`` with a breakpoint set."""

    all_accepting = False

    def __init__(self, automaton: BuchiAutomaton, alphabet: Sequence[Any]):
        self.automaton = automaton
        self.alphabet = alphabet
        self.max_rank = 2 * automaton.num_states
        self.initial = (((automaton.initial, self.max_rank),), frozenset())

    def successors_on(self, state, label):
        ranking, breakpoint = state
        bounds: dict[int, int] = {}
        for q, rank in ranking:
            for target in self.automaton.successors_on(q, label):
                bounds[target] = min(bounds.get(target, rank), rank)
        targets = sorted(bounds)
        choices = []
        for target in targets:
            ranks = range(bounds[target] + 1)
            if target in self.automaton.accepting:
                ranks = [r for r in ranks if r % 2 == 0]
            choices.append(ranks)
        if breakpoint:
            moved = set()
            for q in breakpoint:
                moved.update(self.automaton.successors_on(q, label))
        result = []
        for ranks in itertools.product(*choices):
            next_ranking = tuple(zip(targets, ranks))
            even = {q for q, r in next_ranking if r % 2 == 0}
            next_breakpoint = frozenset(even & moved) if breakpoint else frozenset(even)
            result.append((next_ranking, next_breakpoint))
        return result

    def successors(self, state):
        for label in self.alphabet:
            for target in self.successors_on(state, label):
                yield label, target, None

    def is_accepting(self, state) -> bool:
        return not state[1]

    def name(self, state) -> str:
        ranking, breakpoint = state
        ranks = ",".join(f"{self.automaton.name(q)}:{r}" for q, r in ranking)
        marked = ",".join(self.automaton.name(q) for q in sorted(breakpoint))
        return f"<{ranks}|{marked}>"


def _complement_space(automaton: BuchiAutomaton, alphabet: Sequence[Any], rank_limit: int):
    if automaton.all_accepting:
        return _SubsetComplement(automaton, alphabet)
    if automaton.num_states > rank_limit:
        raise BudgetExceeded(automaton.num_states, rank_limit, "rank-based complement input")
    return _RankComplement(automaton, alphabet)


def complement(
    automaton: BuchiAutomaton,
    max_states: int = DEFAULT_COMPLEMENT_BUDGET,
    alphabet: Iterable[Any] = (),
    rank_limit: int = DEFAULT_RANK_LIMIT,
) -> BuchiAutomaton:
    """Automaton for every word over ``alphabet`` (plus the automaton's own letters)
    that the automaton rejects."""
    letters = tuple(sorted(set(automaton.alphabet) | set(alphabet), key=label_key))
    space = _complement_space(automaton, letters, rank_limit)
    result = explore(
        space.initial, space.successors, space.is_accepting, space.name, max_states, "complement"
    )
    logger.info("complement: %d -> %d states", automaton.num_states, result.num_states)
    return result


def _product(left, right, budget: int | None, what: str) -> BuchiAutomaton:
    if right.all_accepting:
        initial = (left.initial, right.initial)

        def successors(key):
            p, q = key
            for label, p2, provenance in left.successors(p):
                for q2 in right.successors_on(q, label):
                    yield label, (p2, q2), provenance

        return explore(
            initial,
            successors,
            lambda key: left.is_accepting(key[0]),
            lambda key: f"{left.name(key[0])}|{right.name(key[1])}",
            budget,
            what,
        )

    if left.all_accepting:

        def successors(key):
            p, q = key
            for label, p2, provenance in left.successors(p):
                for q2 in right.successors_on(q, label):
                    yield label, (p2, q2), provenance

        return explore(
            (left.initial, right.initial),
            successors,
            lambda key: right.is_accepting(key[1]),
            lambda key: f"{left.name(key[0])}|{right.name(key[1])}",
            budget,
            what,
        )

    def successors(key):
        p, q, track = key
        if track == 1 and left.is_accepting(p):
            track = 2
        elif track == 2 and right.is_accepting(q):
            track = 1
        for label, p2, provenance in left.successors(p):
            for q2 in right.successors_on(q, label):
                yield label, (p2, q2, track), provenance

    return explore(
        (left.initial, right.initial, 1),
        successors,
        lambda key: key[2] == 1 and left.is_accepting(key[0]),
        lambda key: f"{left.name(key[0])}|{right.name(key[1])}|{key[2]}",
        budget,
        what,
    )


def intersect(a: BuchiAutomaton, b: BuchiAutomaton) -> BuchiAutomaton:
    """Automaton for ``L(a) & L(b)``; transitions keep ``a``'s provenance."""
    return _product(_AutomatonSpace(a), _AutomatonSpace(b), None, "intersection")


def difference(
    a: BuchiAutomaton,
    b: BuchiAutomaton,
    budget: int = DEFAULT_COMPLEMENT_BUDGET,
    rank_limit: int = DEFAULT_RANK_LIMIT,
) -> BuchiAutomaton:
    """Automaton for ``L(a) - L(b)``, built on the fly against ``b``'s complement."""
    letters = tuple(sorted(set(a.alphabet) | set(b.alphabet), key=label_key))
    space = _complement_space(b, letters, rank_limit)
    result = _product(_AutomatonSpace(a), space, budget, "difference")
    logger.info(
        "difference: %d x complement(%d) -> %d states", a.num_states, b.num_states, result.num_states
    )
    return result


def restrict(automaton: BuchiAutomaton, keep: Iterable[int]) -> BuchiAutomaton:
    """Sub-automaton on ``keep`` (which must contain the initial state), renumbered in order."""
    kept = sorted(set(keep) | {automaton.initial})
    index = {q: i for i, q in enumerate(kept)}
    transitions = [
        Transition(index[t.source], t.label, index[t.target], t.provenance)
        for t in automaton.transitions
        if t.source in index and t.target in index
    ]
    return BuchiAutomaton(
        len(kept),
        index[automaton.initial],
        transitions,
        [index[q] for q in kept if q in automaton.accepting],
        [automaton.name(q) for q in kept],
    )


def trim(automaton: BuchiAutomaton) -> BuchiAutomaton:
    """Drop states that are unreachable or cannot reach an accepting cycle."""
    good = _accepting_cycle_states(automaton)
    reachable = set(_reachable(automaton, automaton.initial))
    graph = _graph(automaton, reachable).reverse(copy=False)
    useful: set[int] = set(good)
    for q in good:
        useful |= nx.descendants(graph, q)
    return restrict(automaton, useful)


def enumerate_simple_cycles(automaton: BuchiAutomaton) -> Iterator[tuple[Transition, ...]]:
    """Every simple cycle once, self-loops included, parallel transitions expanded."""
    cycles = []
    for cycle in nx.simple_cycles(_graph(automaton)):
        pivot = cycle.index(min(cycle))
        cycles.append(tuple(cycle[pivot:] + cycle[:pivot]))
    cycles.sort(key=lambda c: (len(c), c))
    for cycle in cycles:
        hops = [automaton.between(q, cycle[(i + 1) % len(cycle)]) for i, q in enumerate(cycle)]
        yield from itertools.product(*hops)


def universal_projection(
    automaton: BuchiAutomaton,
    m: int,
    join: Callable[[tuple], Any] = tuple,
) -> BuchiAutomaton:
    """Relabel every transition with the join of its first ``m`` provenance components."""
    transitions = []
    for t in automaton.transitions:
        if t.provenance is None:
            raise MissingProvenance(f"transition {t.source}->{t.target} carries no provenance")
        components = tuple(t.provenance.components[:m])
        transitions.append(Transition(t.source, join(components), t.target, Provenance(components)))
    return BuchiAutomaton(
        automaton.num_states, automaton.initial, transitions, automaton.accepting, automaton.names
    )


def _closed_paths(automaton: BuchiAutomaton, start: int, max_length: int) -> Iterator[tuple[Transition, ...]]:
    stack: list[tuple[int, tuple[Transition, ...]]] = [(start, ())]
    found = []
    while stack:
        q, path = stack.pop()
        if len(path) == max_length:
            continue
        for t in automaton.outgoing(q):
            extended = path + (t,)
            if t.target == start:
                found.append(extended)
            stack.append((t.target, extended))
    found.sort(key=lambda p: (len(p), [(t.source, label_key(t.label), t.target) for t in p]))
    return iter(found)


def _loops(automaton: BuchiAutomaton, loop_bound: int | None) -> list[tuple[Transition, ...]]:
    loops: list[tuple[Transition, ...]] = []
    if loop_bound is None:
        for cycle in enumerate_simple_cycles(automaton):
            for r in range(len(cycle)):
                loops.append(cycle[r:] + cycle[:r])
    else:
        for q in automaton.states:
            loops.extend(_closed_paths(automaton, q, loop_bound))
    loops = [
        loop for loop in loops if any(t.source in automaton.accepting for t in loop)
    ]
    loops.sort(key=lambda p: (len(p), [(t.source, label_key(t.label), t.target) for t in p]))
    return loops


def enumerate_lassos(
    automaton: BuchiAutomaton,
    stem_bound: int,
    loop_bound: int | None = None,
) -> Iterator[Lasso]:
    """Accepting lassos ordered by total length.

    Loops are simple cycles (in every rotation) when ``loop_bound`` is None, otherwise
    all closed paths up to ``loop_bound`` transitions.
    """
    loops = _loops(automaton, loop_bound)
    if not loops:
        return
    longest = max(len(loop) for loop in loops)
    stems: list[dict[int, list[tuple[Transition, ...]]]] = [{automaton.initial: [()]}]

    def stems_of_length(length: int) -> dict[int, list[tuple[Transition, ...]]]:
        while len(stems) <= length:
            layer: dict[int, list[tuple[Transition, ...]]] = {}
            for q in sorted(stems[-1]):
                for path in stems[-1][q]:
                    for t in automaton.outgoing(q):
                        layer.setdefault(t.target, []).append(path + (t,))
            stems.append(layer)
        return stems[length]

    for total in range(1, stem_bound + longest + 1):
        for stem_length in range(0, min(stem_bound, total - 1) + 1):
            loop_length = total - stem_length
            layer = None
            for loop in loops:
                if len(loop) != loop_length:
                    continue
                if layer is None:
                    layer = stems_of_length(stem_length)
                for stem in layer.get(loop[0].source, ()):
                    yield Lasso(
                        tuple(t.label for t in stem),
                        tuple(t.label for t in loop),
                        stem,
                        loop,
                    )
