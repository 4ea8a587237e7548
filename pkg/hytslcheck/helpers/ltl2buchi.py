"""LTL skeleton to Büchi automaton over total valuations of the propositions.

Closure construction: a state fixes the truth of every elementary subformula
(propositions, ``X`` and ``U`` formulas). Each ``U`` contributes one acceptance set;
the generalized condition is degeneralized with a counter.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .buchi import BuchiAutomaton, Lasso, explore, trim
from .formulas import And, BoolConst, Next, Not, Prop, TemporalFormula, Until, evaluate_on_lasso

logger = logging.getLogger("hytslcheck.ltl2buchi")


@dataclass(frozen=True)
class Valuation:
    """Total truth assignment: ``true`` holds the propositions set, the rest of ``universe`` is false."""

    true: frozenset
    universe: tuple

    def holds(self, prop: str) -> bool:
        return prop in self.true

    def __str__(self) -> str:
        return "{" + ", ".join(p if p in self.true else f"!{p}" for p in self.universe) + "}"


def all_valuations(universe: Sequence[str]) -> list[Valuation]:
    universe = tuple(universe)
    return [
        Valuation(frozenset(p for p, bit in zip(universe, bits) if bit), universe)
        for bits in itertools.product((True, False), repeat=len(universe))
    ]


def propositions(f: TemporalFormula) -> list[str]:
    found: set[str] = set()

    def walk(node: TemporalFormula) -> None:
        match node:
            case Prop(name):
                found.add(name)
            case Not(operand) | Next(operand):
                walk(operand)
            case And(left, right) | Until(left, right):
                walk(left)
                walk(right)

    walk(f)
    return sorted(found)


def _elementary(f: TemporalFormula, props: Sequence[str]) -> list[TemporalFormula]:
    found: dict[TemporalFormula, None] = {Prop(p): None for p in props}

    def walk(node: TemporalFormula) -> None:
        match node:
            case Prop():
                found.setdefault(node, None)
            case Next(operand):
                found.setdefault(node, None)
                walk(operand)
            case Until(left, right):
                found.setdefault(node, None)
                walk(left)
                walk(right)
            case Not(operand):
                walk(operand)
            case And(left, right):
                walk(left)
                walk(right)

    walk(f)
    return list(found)


class _Closure:
    def __init__(self, f: TemporalFormula, props: Sequence[str]):
        self.formula = f
        self.props = tuple(props)
        self.elementary = _elementary(f, self.props)
        self.position = {node: i for i, node in enumerate(self.elementary)}
        self.untils = [node for node in self.elementary if isinstance(node, Until)]
        self.nexts = [node for node in self.elementary if isinstance(node, Next)]
        self.candidates = list(itertools.product((True, False), repeat=len(self.elementary)))
        self._successors: dict[tuple, list[tuple]] = {}

    def value(self, state: tuple, node: TemporalFormula) -> bool:
        match node:
            case BoolConst(value):
                return value
            case Not(operand):
                return not self.value(state, operand)
            case And(left, right):
                return self.value(state, left) and self.value(state, right)
        return state[self.position[node]]

    def valuation(self, state: tuple) -> Valuation:
        return Valuation(frozenset(p for p in self.props if state[self.position[Prop(p)]]), self.props)

    def locally_consistent(self, state: tuple) -> bool:
        # an until whose right side holds now must hold
        return all(
            state[self.position[u]] or not self.value(state, u.right) for u in self.untils
        )

    def successors(self, state: tuple) -> list[tuple]:
        if state not in self._successors:
            result = []
            for candidate in self.candidates:
                if not self.locally_consistent(candidate):
                    continue
                if any(state[self.position[n]] != self.value(candidate, n.operand) for n in self.nexts):
                    continue
                if any(
                    state[self.position[u]]
                    != (
                        self.value(state, u.right)
                        or (self.value(state, u.left) and candidate[self.position[u]])
                    )
                    for u in self.untils
                ):
                    continue
                result.append(candidate)
            self._successors[state] = result
        return self._successors[state]

    def fulfils(self, state: tuple, index: int) -> bool:
        u = self.untils[index]
        return not state[self.position[u]] or self.value(state, u.right)

    def name(self, state: tuple) -> str:
        shown = [str(node) if bit else f"!{node}" for node, bit in zip(self.elementary, state)]
        return "{" + ", ".join(shown) + "}"


def translate(f: TemporalFormula, props: Iterable[str] | None = None) -> BuchiAutomaton:
    """Büchi automaton accepting exactly the valuation words satisfying ``f``."""
    universe = sorted(set(props or ()) | set(propositions(f)))
    closure = _Closure(f, universe)
    rounds = max(len(closure.untils), 1)
    initial_sets = [
        s for s in closure.candidates if closure.locally_consistent(s) and closure.value(s, f)
    ]

    def step(state: tuple, counter: int):
        if closure.untils and closure.fulfils(state, counter):
            counter = (counter + 1) % rounds
        label = closure.valuation(state)
        for target in closure.successors(state):
            yield label, (target, counter), None

    def successors(key):
        if key == "init":
            for state in initial_sets:
                yield from step(state, 0)
        else:
            yield from step(*key)

    def is_accepting(key) -> bool:
        if key == "init":
            return not closure.untils
        state, counter = key
        return not closure.untils or (counter == 0 and closure.fulfils(state, 0))

    def name(key) -> str:
        if key == "init":
            return "init"
        state, counter = key
        return f"{closure.name(state)}#{counter}" if len(closure.untils) > 1 else closure.name(state)

    start = (initial_sets[0], 0) if len(initial_sets) == 1 else "init"
    automaton = trim(explore(start, successors, is_accepting, name))
    logger.debug("translate %s: %d states", f, automaton.num_states)
    return automaton


def eval_ltl(f: TemporalFormula, word: Lasso, t: int = 0) -> bool:
    """Evaluate an LTL skeleton on an ultimately periodic word of Valuations."""

    def leaf(node: TemporalFormula, position: int) -> bool:
        if isinstance(node, Prop):
            return word.letter(position).holds(node.name)
        raise ValueError(f"unexpected leaf {node} in an LTL skeleton")

    return evaluate_on_lasso(f, leaf, len(word.stem), len(word.loop), t)


def to_valuations(word: Lasso, atom_map: Mapping[str, object]) -> Lasso:
    """Turn a word over sets of true atoms into a word over Valuations of skeleton names."""
    name_of = {atom: name for name, atom in atom_map.items()}
    universe = tuple(sorted(atom_map))

    def convert(letter) -> Valuation:
        return Valuation(frozenset(name_of[atom] for atom in letter), universe)

    return Lasso(tuple(convert(x) for x in word.stem), tuple(convert(x) for x in word.loop))
