"""Program statements, program automata, self-composition and the combined product."""

import itertools
import logging
import re
from dataclasses import dataclass, field, replace
from math import lcm
from typing import Collection, Iterable, Mapping, Sequence, Union

from .buchi import BuchiAutomaton, Lasso, Provenance, Transition, explore
from .errors import ParseError, SortMismatch, ValidationError
from .formulas import Atom, AtomSet
from .grammar import build_term, make_ident, parse_raw
from .terms import (
    BOOL,
    CELL,
    INPUT,
    INT,
    TRUE,
    Apply,
    Assignment,
    Ident,
    Term,
    UpdateTerm,
    Var,
    conjunction,
    equals,
    evaluate,
    ident_key,
    infer_sort,
    negation,
    print_term,
    rename,
    sort_of_value,
    variables,
)

logger = logging.getLogger("hytslcheck.program")

SYSTEM = "system"
PROGRAM = "program"
TMP_PREFIX = "__tmp"


@dataclass(frozen=True)
class Assert:
    predicate: Term

    def __str__(self) -> str:
        return f"assert({print_term(self.predicate)})"


@dataclass(frozen=True)
class Assign:
    target: Ident
    source: Term

    def __str__(self) -> str:
        return f"{self.target} := {print_term(self.source)}"


@dataclass(frozen=True)
class Havoc:
    target: Ident

    def __str__(self) -> str:
        return f"{self.target} := *"


@dataclass(frozen=True)
class Seq:
    first: "Statement"
    second: "Statement"

    def __str__(self) -> str:
        return f"{self.first}; {self.second}"


Statement = Union[Assert, Assign, Havoc, Seq]


def sequence(statements: Iterable[Statement]) -> Statement:
    """Left-nested composition, the canonical shape of every composed label."""
    result = None
    for s in statements:
        result = s if result is None else Seq(result, s)
    if result is None:
        return Assert(TRUE)
    return result


def flatten(statements: "Statement | Iterable[Statement]") -> list[Statement]:
    """Basic statements of a statement (or statement sequence) in execution order."""
    if isinstance(statements, (Assert, Assign, Havoc, Seq)):
        statements = [statements]
    result: list[Statement] = []
    stack = list(reversed(list(statements)))
    while stack:
        s = stack.pop()
        if isinstance(s, Seq):
            stack.append(s.second)
            stack.append(s.first)
        else:
            result.append(s)
    return result


def is_basic(s: Statement) -> bool:
    return not isinstance(s, Seq)


def rename_statement(s: Statement, trace: str) -> Statement:
    match s:
        case Assert(predicate):
            return Assert(rename(predicate, trace))
        case Assign(target, source):
            return Assign(target.on_trace(trace), rename(source, trace))
        case Havoc(target):
            return Havoc(target.on_trace(trace))
        case Seq(first, second):
            return Seq(rename_statement(first, trace), rename_statement(second, trace))
    raise TypeError(f"not a statement: {s!r}")


def statement_idents(s: Statement) -> set[Ident]:
    found: set[Ident] = set()
    for basic in flatten(s):
        match basic:
            case Assert(predicate):
                found |= variables(predicate)
            case Assign(target, source):
                found |= {target} | variables(source)
            case Havoc(target):
                found.add(target)
    return found


def build_statement(raw: tuple, inputs: Collection[str] = ()) -> Statement:
    tag = raw[0]
    if tag == "seq":
        return Seq(build_statement(raw[1], inputs), build_statement(raw[2], inputs))
    if tag == "assert":
        return Assert(build_term(raw[1], inputs))
    target = make_ident(raw[1][0], raw[1][1], inputs)
    if target.kind != CELL:
        raise ValidationError(f"cannot assign to input {target}")
    if tag == "havoc":
        return Havoc(target)
    return Assign(target, build_term(raw[2], inputs))


def parse_statement(text: str, inputs: Collection[str] = ()) -> Statement:
    """Parse ``assert(...)``, ``c := term``, ``c := *``, ``c--``/``c++`` joined by ``;``."""
    return build_statement(parse_raw(text, "statements"), inputs)


@dataclass(frozen=True)
class ProgramAutomaton:
    """A Büchi automaton over statements together with its variable declarations.

    ``cells`` is the frame of the matching relation: every cell not written by a
    statement keeps its value. ``initial`` pins the values before the first step.
    """

    automaton: BuchiAutomaton
    cells: frozenset
    inputs: frozenset = frozenset()
    initial: Assignment = field(default_factory=Assignment)
    sorts: Mapping[str, str] = field(default_factory=dict)
    mode: str = SYSTEM

    def sort_of(self, ident: Ident) -> str:
        return self.sorts.get(ident.name, INT)

    @property
    def idents(self) -> frozenset:
        return self.cells | self.inputs

    def with_automaton(self, automaton: BuchiAutomaton) -> "ProgramAutomaton":
        return replace(self, automaton=automaton)


def default_value(sort: str):
    return False if sort == BOOL else 0


def check_statement(
    s: Statement,
    declared: Collection[Ident],
    cells: Collection[Ident],
    sort_of,
) -> None:
    """Raise ValidationError for undeclared names, writes to inputs or ill-sorted statements."""
    for ident in statement_idents(s):
        if ident not in declared:
            raise ValidationError(f"undeclared identifier {ident} in {s}")
    try:
        for basic in flatten(s):
            match basic:
                case Assert(predicate):
                    if infer_sort(predicate, sort_of) != BOOL:
                        raise ValidationError(f"assertion {basic} is not boolean")
                case Assign(target, source):
                    if target not in cells:
                        raise ValidationError(f"{target} is not a cell in {basic}")
                    if infer_sort(source, sort_of) != sort_of(target):
                        raise ValidationError(f"{basic} changes the sort of {target}")
                case Havoc(target):
                    if target not in cells:
                        raise ValidationError(f"{target} is not a cell in {basic}")
    except SortMismatch as exc:
        raise ValidationError(str(exc)) from exc


_DECLARATION = re.compile(r"^(cells|inputs|init|mode)\s*:(.*)$")
_STATE = re.compile(r"^state\s+([A-Za-z_][A-Za-z0-9_]*)((?:\s+(?:initial|accepting))*)\s*$")
_TRANS = re.compile(r"^trans\s+([A-Za-z_][A-Za-z0-9_]*)\s*->\s*([A-Za-z_][A-Za-z0-9_]*)\s*:(.*)$")


def _parse_names(text: str, line: int) -> list[tuple[str, str]]:
    entries = []
    for entry in filter(None, (e.strip() for e in text.split(","))):
        name, _, sort = (part.strip() for part in entry.partition(":"))
        sort = sort or INT
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", name) or sort not in (INT, BOOL):
            raise ParseError(f"bad declaration {entry!r}", line)
        entries.append((name, sort))
    return entries


def _parse_literal(text: str, line: int):
    text = text.strip()
    if text in ("true", "false"):
        return text == "true"
    if re.fullmatch(r"-?[0-9]+", text):
        return int(text)
    raise ParseError(f"bad initial value {text!r}", line)


def parse_program_automaton(text: str, mode: str | None = None) -> ProgramAutomaton:
    """Parse the line-oriented automaton format (``cells:``, ``inputs:``, ``init:``,
    ``state``, ``trans``); ``#`` starts a comment."""
    cells: dict[str, str] = {}
    inputs: dict[str, str] = {}
    init: dict[str, object] = {}
    states: dict[str, tuple[bool, bool]] = {}
    edges: list[tuple[str, str, str, int]] = []
    declared_mode = SYSTEM

    for number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if match := _DECLARATION.match(line):
            key, rest = match.group(1), match.group(2)
            if key == "cells":
                cells.update(_parse_names(rest, number))
            elif key == "inputs":
                inputs.update(_parse_names(rest, number))
            elif key == "mode":
                declared_mode = rest.strip()
                if declared_mode not in (SYSTEM, PROGRAM):
                    raise ParseError(f"unknown mode {declared_mode!r}", number)
            else:
                for entry in filter(None, (e.strip() for e in rest.split(","))):
                    name, eq, value = entry.partition("=")
                    if not eq:
                        raise ParseError(f"bad initial value {entry!r}", number)
                    init[name.strip()] = _parse_literal(value, number)
        elif match := _STATE.match(line):
            flags = match.group(2).split()
            if match.group(1) in states:
                raise ParseError(f"state {match.group(1)} declared twice", number)
            states[match.group(1)] = ("initial" in flags, "accepting" in flags)
        elif match := _TRANS.match(line):
            edges.append((match.group(1), match.group(2), match.group(3).strip(), number))
        else:
            raise ParseError(f"cannot read {line!r}", number)

    mode = mode or declared_mode
    overlap = set(cells) & set(inputs)
    if overlap:
        raise ValidationError(f"declared both as cell and input: {', '.join(sorted(overlap))}")
    initial_states = [name for name, (is_initial, _) in states.items() if is_initial]
    if len(initial_states) != 1:
        raise ValidationError(f"expected exactly one initial state, found {len(initial_states)}")
    if mode == SYSTEM:
        rejecting = [name for name, (_, accepting) in states.items() if not accepting]
        if rejecting:
            raise ValidationError(f"system automata accept everywhere; not accepting: {', '.join(rejecting)}")

    sorts = {**cells, **inputs}
    sort_of = lambda ident: sorts.get(ident.name, INT)  # noqa: E731
    cell_idents = frozenset(Ident(name, CELL) for name in cells)
    input_idents = frozenset(Ident(name, INPUT) for name in inputs)
    declared = cell_idents | input_idents
    index = {name: i for i, name in enumerate(states)}

    transitions = []
    for source, target, label, number in edges:
        for state in (source, target):
            if state not in index:
                raise ValidationError(f"line {number}: undeclared state {state}")
        try:
            statement = parse_statement(label, inputs)
        except ParseError as exc:
            raise ParseError(str(exc), number) from exc
        if mode == SYSTEM and not is_basic(statement):
            raise ValidationError(f"line {number}: system automata use basic statements only")
        if any(i.trace is not None for i in statement_idents(statement)):
            raise ValidationError(f"line {number}: trace indices are not allowed in automata")
        check_statement(statement, declared, cell_idents, sort_of)
        transitions.append(Transition(index[source], statement, index[target]))

    values = {ident: default_value(sorts[ident.name]) for ident in cell_idents}
    for name, value in init.items():
        if name not in sorts:
            raise ValidationError(f"initial value for undeclared identifier {name}")
        if sort_of_value(value) != sorts[name]:
            raise ValidationError(f"initial value {value!r} does not match the sort of {name}")
        values[Ident(name, INPUT if name in inputs else CELL)] = value

    automaton = BuchiAutomaton(
        len(states),
        index[initial_states[0]],
        transitions,
        [index[name] for name, (_, accepting) in states.items() if accepting],
        list(states),
    )
    logger.info(
        "parsed %s automaton: %d states, %d transitions",
        mode,
        automaton.num_states,
        len(automaton.transitions),
    )
    return ProgramAutomaton(automaton, cell_idents, input_idents, Assignment(values), sorts, mode)


def _same(left, right) -> bool:
    return sort_of_value(left) == sort_of_value(right) and left == right


def matches_step(
    prev: Assignment,
    cur: Assignment,
    s: Statement,
    cells: Collection[Ident] | None = None,
) -> bool:
    """Whether the step ``prev -> cur`` is allowed by the basic statement ``s``.

    Cells other than the written one keep their value; inputs are unconstrained.
    """
    if cells is None:
        cells = [ident for ident in prev.universe if ident.kind == CELL]
    match s:
        case Assert(predicate):
            written = None
            if evaluate(predicate, prev) is not True:
                return False
        case Assign(target, source):
            written = target
            if not _same(evaluate(source, prev), cur[target]):
                return False
        case Havoc(target):
            written = target
        case _:
            raise ValueError(f"matches_step needs a basic statement, got {s}")
    return all(_same(prev[c], cur[c]) for c in cells if c != written)


def self_compose(program: ProgramAutomaton, traces: Sequence[str]) -> ProgramAutomaton:
    """The n-fold product of ``program`` with itself, one renamed copy per trace."""
    if not program.automaton.all_accepting:
        raise ValidationError("self-composition needs an automaton whose states all accept")
    automaton = program.automaton
    n = len(traces)
    tuples = list(itertools.product(automaton.states, repeat=n))
    index = {states: i for i, states in enumerate(tuples)}
    transitions = []
    for states in tuples:
        for choice in itertools.product(*(automaton.outgoing(q) for q in states)):
            parts = tuple(rename_statement(t.label, trace) for t, trace in zip(choice, traces))
            target = tuple(t.target for t in choice)
            transitions.append(
                Transition(index[states], sequence(parts), index[target], Provenance(parts))
            )
    names = ["(" + ",".join(automaton.name(q) for q in states) + ")" for states in tuples]
    composed = BuchiAutomaton(
        len(tuples),
        index[(automaton.initial,) * n],
        transitions,
        range(len(tuples)),
        names,
    )
    logger.info("self-composition x%d: %d states, %d transitions", n, composed.num_states, len(composed.transitions))
    return on_traces(program, composed, traces)


def tmp_cell(j: int) -> Ident:
    return Ident(f"{TMP_PREFIX}{j}", CELL)


def combine(
    s: Statement,
    true_atoms: Collection[Atom],
    atom_set: AtomSet,
    inputs: Iterable[Ident],
) -> Statement:
    """Compile a formula letter into the statement ``save; s; havoc inputs; check preds; check updates``."""
    save_values = [Assign(tmp_cell(j), u.source) for j, u in enumerate(atom_set.updates)]
    new_inputs = [Havoc(i) for i in sorted(inputs, key=str)]
    check_preds = Assert(
        conjunction(p.term if p in true_atoms else negation(p.term) for p in atom_set.predicates)
    )
    checks = []
    for j, u in enumerate(atom_set.updates):
        same = equals(Var(u.target), Var(tmp_cell(j)))
        checks.append(same if u in true_atoms else Apply("!=", same.args))
    check_updates = Assert(conjunction(checks))
    return sequence([*save_values, s, *new_inputs, check_preds, check_updates])


def combined_product(
    program: ProgramAutomaton,
    formula_automaton: BuchiAutomaton,
    atom_map: Mapping[str, Atom],
) -> ProgramAutomaton:
    """Product of a program automaton with a valuation automaton, labels compiled by ``combine``.

    Inputs become cells of the product and fresh ``__tmp`` cells hold update sources.
    """
    atom_set = AtomSet(
        tuple(sorted((a for a in atom_map.values() if not isinstance(a, UpdateTerm)), key=str)),
        tuple(sorted((a for a in atom_map.values() if isinstance(a, UpdateTerm)), key=str)),
    )
    automaton = program.automaton
    inputs = sorted(program.inputs, key=ident_key)
    cache: dict[tuple, Statement] = {}

    def label_for(statement: Statement, letter) -> Statement:
        key = (statement, letter)
        if key not in cache:
            true_atoms = {atom_map[name] for name in letter.true}
            cache[key] = combine(statement, true_atoms, atom_set, inputs)
        return cache[key]

    def successors(key):
        p, q = key
        for t in automaton.outgoing(p):
            components = t.provenance.components if t.provenance is not None else (t.label,)
            for u in formula_automaton.outgoing(q):
                yield (
                    label_for(t.label, u.label),
                    (t.target, u.target),
                    Provenance(components, u.label),
                )

    product = explore(
        (automaton.initial, formula_automaton.initial),
        successors,
        lambda key: key[1] in formula_automaton.accepting,
        lambda key: f"{automaton.name(key[0])}.{key[1]}",
    )
    sorts = dict(program.sorts)
    for j, u in enumerate(atom_set.updates):
        sorts[tmp_cell(j).name] = program.sort_of(u.target)
    tmps = frozenset(tmp_cell(j) for j in range(len(atom_set.updates)))
    logger.info("combined product: %d states, %d transitions", product.num_states, len(product.transitions))
    return ProgramAutomaton(
        product,
        program.cells | program.inputs | tmps,
        frozenset(),
        program.initial,
        sorts,
        PROGRAM,
    )


def lasso_automaton(
    program: ProgramAutomaton,
    lassos: Sequence[Lasso],
    traces: Sequence[str],
) -> ProgramAutomaton:
    """Automaton accepting exactly the synchronized tuple of the given statement lassos."""
    stem_length = max(len(lasso.stem) for lasso in lassos)
    loop_length = lcm(*(len(lasso.loop) for lasso in lassos))
    total = stem_length + loop_length
    transitions = []
    for position in range(total):
        parts = tuple(
            rename_statement(lasso.letter(position), trace) for lasso, trace in zip(lassos, traces)
        )
        target = position + 1 if position + 1 < total else stem_length
        transitions.append(Transition(position, sequence(parts), target, Provenance(parts)))
    automaton = BuchiAutomaton(
        total,
        0,
        transitions,
        range(stem_length, total),
        [f"p{i}" for i in range(total)],
    )
    return on_traces(program, automaton, traces)


def on_traces(program: ProgramAutomaton, automaton: BuchiAutomaton, traces: Sequence[str]) -> ProgramAutomaton:
    """Declarations of ``program`` copied once per trace, attached to ``automaton``."""
    initial = {}
    for trace in traces:
        for ident, value in program.initial.items():
            initial[ident.on_trace(trace)] = value
    return ProgramAutomaton(
        automaton,
        frozenset(c.on_trace(trace) for c in program.cells for trace in traces),
        frozenset(i.on_trace(trace) for i in program.inputs for trace in traces),
        Assignment(initial),
        dict(program.sorts),
        program.mode,
    )
