"""Temporal stream logic formulas with trace quantifiers.

Derived operators are eliminated while building: ``a || b`` becomes ``!(!a && !b)``,
``F a`` becomes ``true U a`` and ``G a`` becomes ``!(true U !a)``. A maximal
subformula free of temporal operators and update terms is kept as a single
predicate atom.
"""

from dataclasses import dataclass
from math import lcm
from typing import Callable, Collection, Iterable, Mapping, Sequence, Union

from .buchi import Lasso
from .errors import NonPrenexError, ParseError, SortMismatch, ValidationError
from .grammar import build_term, is_pure, make_ident, parse_raw
from .terms import (
    BOOL,
    CELL,
    INT,
    TRUE,
    Apply,
    Assignment,
    Computation,
    Const,
    Ident,
    PredicateTerm,
    UpdateTerm,
    Var,
    evaluate,
    infer_sort,
    sort_of_value,
    substitute,
    update_holds,
    variables,
)

FORALL = "forall"
EXISTS = "exists"


@dataclass(frozen=True)
class Prop:
    """Proposition of an LTL skeleton."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class BoolConst:
    value: bool

    def __str__(self) -> str:
        return "true" if self.value else "false"


@dataclass(frozen=True)
class Not:
    operand: "TemporalFormula"

    def __str__(self) -> str:
        return f"!{_wrap(self.operand)}"


@dataclass(frozen=True)
class And:
    left: "TemporalFormula"
    right: "TemporalFormula"

    def __str__(self) -> str:
        return f"{_wrap(self.left)} && {_wrap(self.right)}"


@dataclass(frozen=True)
class Next:
    operand: "TemporalFormula"

    def __str__(self) -> str:
        return f"X {_wrap(self.operand)}"


@dataclass(frozen=True)
class Until:
    left: "TemporalFormula"
    right: "TemporalFormula"

    def __str__(self) -> str:
        return f"{_wrap(self.left)} U {_wrap(self.right)}"


TemporalFormula = Union[PredicateTerm, UpdateTerm, Prop, BoolConst, Not, And, Next, Until]
Atom = Union[PredicateTerm, UpdateTerm]

TRUE_PREDICATE = PredicateTerm(TRUE)


def _wrap(node: TemporalFormula) -> str:
    text = str(node)
    if isinstance(node, (Prop, BoolConst)):
        return text
    if isinstance(node, PredicateTerm) and not isinstance(node.term, Apply):
        return text
    return f"({text})"


def eventually(node: TemporalFormula) -> TemporalFormula:
    return Until(TRUE_PREDICATE, node)


def globally(node: TemporalFormula) -> TemporalFormula:
    return Not(Until(TRUE_PREDICATE, Not(node)))


def negated(node: TemporalFormula) -> TemporalFormula:
    return node.operand if isinstance(node, Not) else Not(node)


@dataclass(frozen=True)
class Formula:
    """A prenex quantifier block followed by a quantifier-free temporal core."""

    prefix: tuple[tuple[str, str], ...]
    core: TemporalFormula

    def __str__(self) -> str:
        head = "".join(f"{q} {v}. " for q, v in self.prefix)
        return head + str(self.core)

    @property
    def traces(self) -> tuple[str, ...]:
        return tuple(v for _, v in self.prefix)

    @property
    def quantifiers(self) -> tuple[str, ...]:
        return tuple(q for q, _ in self.prefix)

    def blocks(self) -> list[tuple[str, tuple[str, ...]]]:
        """Group the prefix into maximal blocks of equal quantifiers."""
        grouped: list[tuple[str, tuple[str, ...]]] = []
        for quantifier, trace in self.prefix:
            if grouped and grouped[-1][0] == quantifier:
                grouped[-1] = (quantifier, grouped[-1][1] + (trace,))
            else:
                grouped.append((quantifier, (trace,)))
        return grouped


@dataclass(frozen=True)
class AtomSet:
    """Predicate and update atoms of one formula, each ordered by printed form."""

    predicates: tuple[PredicateTerm, ...] = ()
    updates: tuple[UpdateTerm, ...] = ()

    def __iter__(self):
        yield from self.predicates
        yield from self.updates

    def __len__(self) -> int:
        return len(self.predicates) + len(self.updates)


def _build_temporal(raw: tuple, inputs: Collection[str]) -> TemporalFormula:
    tag = raw[0]
    if tag == "quant":
        raise NonPrenexError("trace quantifiers must form a prefix of the formula")
    if is_pure(raw):
        term = build_term(raw, inputs)
        if isinstance(term, Const) and term.sort != BOOL:
            raise ParseError(f"integer constant {term.value} used as a formula")
        if isinstance(term, Apply) and term.symbol in ("+", "-", "*", "neg"):
            raise ParseError(f"arithmetic term {term} used as a formula")
        return PredicateTerm(term)
    if tag == "update":
        (name, trace), source = raw[1], raw[2]
        target = make_ident(name, trace, inputs)
        if target.kind != CELL:
            raise ValidationError(f"update term targets input {target}")
        return UpdateTerm(target, build_term(source, inputs))
    if tag == "next":
        return Next(_build_temporal(raw[1], inputs))
    if tag == "eventually":
        return eventually(_build_temporal(raw[1], inputs))
    if tag == "globally":
        return globally(_build_temporal(raw[1], inputs))
    if tag == "until":
        return Until(_build_temporal(raw[1], inputs), _build_temporal(raw[2], inputs))
    if tag == "apply":
        symbol, args = raw[1], raw[2]
        if symbol == "!":
            return Not(_build_temporal(args[0], inputs))
        if symbol == "&&":
            return And(_build_temporal(args[0], inputs), _build_temporal(args[1], inputs))
        if symbol == "||":
            left = _build_temporal(args[0], inputs)
            right = _build_temporal(args[1], inputs)
            return Not(And(Not(left), Not(right)))
        raise ParseError(f"operator {symbol!r} applied to a temporal formula")
    raise ParseError(f"unexpected construct {tag!r}")


def _trace_indices(node: TemporalFormula) -> set[str]:
    found: set[str] = set()
    for atom in iter_atoms(node):
        idents = variables(atom.term) if isinstance(atom, PredicateTerm) else variables(atom.source) | {atom.target}
        found |= {i.trace for i in idents if i.trace is not None}
    return found


def parse_formula(text: str, inputs: Collection[str] = ()) -> Formula:
    """Parse a (Hyper)TSL formula; names in ``inputs`` are inputs, all others cells."""
    raw = parse_raw(text, "expr")
    prefix: list[tuple[str, str]] = []
    while raw[0] == "quant":
        prefix.append((raw[1], raw[2]))
        raw = raw[3]
    core = _build_temporal(raw, inputs)

    names = [v for _, v in prefix]
    if len(set(names)) != len(names):
        raise ValidationError("a trace variable is quantified twice")
    unbound = _trace_indices(core) - set(names)
    if unbound:
        raise ValidationError(f"unquantified trace variable(s): {', '.join(sorted(unbound))}")
    if prefix and _has_untraced(core):
        raise ValidationError("every identifier of a quantified formula needs a trace index")
    return Formula(tuple(prefix), core)


def _has_untraced(node: TemporalFormula) -> bool:
    for atom in iter_atoms(node):
        idents = variables(atom.term) if isinstance(atom, PredicateTerm) else variables(atom.source) | {atom.target}
        if any(i.trace is None for i in idents):
            return True
    return False


def iter_atoms(node: TemporalFormula) -> Iterable[Atom]:
    match node:
        case PredicateTerm() | UpdateTerm():
            yield node
        case Not(operand) | Next(operand):
            yield from iter_atoms(operand)
        case And(left, right) | Until(left, right):
            yield from iter_atoms(left)
            yield from iter_atoms(right)


def _core(f: "Formula | TemporalFormula") -> TemporalFormula:
    return f.core if isinstance(f, Formula) else f


def atoms(f: "Formula | TemporalFormula") -> AtomSet:
    """Predicate and update atoms of a formula; constant predicates are not atoms."""
    predicates = set()
    updates = set()
    for atom in iter_atoms(_core(f)):
        if isinstance(atom, UpdateTerm):
            updates.add(atom)
        elif not isinstance(atom.term, Const):
            predicates.add(atom)
    return AtomSet(tuple(sorted(predicates, key=str)), tuple(sorted(updates, key=str)))


def ltl_skeleton(f: "Formula | TemporalFormula") -> tuple[TemporalFormula, dict[str, Atom]]:
    """Replace every atom with a fresh proposition ``a0, a1, ...``."""
    atom_set = atoms(f)
    atom_map = {f"a{j}": atom for j, atom in enumerate(atom_set)}
    name_of = {atom: name for name, atom in atom_map.items()}

    def walk(node: TemporalFormula) -> TemporalFormula:
        match node:
            case PredicateTerm(term=Const(value=value)):
                return BoolConst(value)
            case PredicateTerm() | UpdateTerm():
                return Prop(name_of[node])
            case Not(operand):
                return Not(walk(operand))
            case Next(operand):
                return Next(walk(operand))
            case And(left, right):
                return And(walk(left), walk(right))
            case Until(left, right):
                return Until(walk(left), walk(right))
        return node

    return walk(_core(f)), atom_map


def check_sorts(f: "Formula | TemporalFormula", sort_of: Callable[[Ident], str]) -> None:
    """Raise SortMismatch when a predicate is not boolean or an update changes sort."""
    for atom in iter_atoms(_core(f)):
        if isinstance(atom, PredicateTerm):
            if infer_sort(atom.term, sort_of) != BOOL:
                raise SortMismatch(f"predicate {atom} is not boolean")
        elif infer_sort(atom.source, sort_of) != sort_of(atom.target):
            raise SortMismatch(f"update {atom} changes the sort of {atom.target}")


def evaluate_on_lasso(
    f: TemporalFormula,
    leaf: Callable[[TemporalFormula, int], bool],
    stem_length: int,
    loop_length: int,
    t: int = 0,
) -> bool:
    """Fixpoint evaluation on an ultimately periodic sequence of positions.

    Positions ``>= stem_length`` repeat with period ``loop_length``; ``leaf`` decides
    atoms (and propositions) at canonical positions.
    """
    if loop_length <= 0:
        raise ValueError("evaluation needs a nonempty loop")
    cache: dict[tuple[int, int], bool] = {}

    def canonical(position: int) -> int:
        if position < stem_length:
            return position
        return stem_length + (position - stem_length) % loop_length

    def holds(node: TemporalFormula, position: int) -> bool:
        position = canonical(position)
        key = (id(node), position)
        if key in cache:
            return cache[key]
        match node:
            case BoolConst(value):
                result = value
            case Not(operand):
                result = not holds(operand, position)
            case And(left, right):
                result = holds(left, position) and holds(right, position)
            case Next(operand):
                result = holds(operand, position + 1)
            case Until(left, right):
                result = False
                for j in range(position, max(position, stem_length) + loop_length + 1):
                    if holds(right, j):
                        result = True
                        break
                    if not holds(left, j):
                        break
            case _:
                result = leaf(node, position)
        cache[key] = result
        return result

    return holds(f, t)


def holds_at(atom: Atom, computation: Computation, t: int) -> bool:
    """Truth of one atom at position ``t``; updates are judged against ``t - 1``."""
    if isinstance(atom, UpdateTerm):
        return update_holds(atom, computation.at(t - 1), computation.at(t))
    value = evaluate(atom.term, computation.at(t))
    if sort_of_value(value) != BOOL:
        raise SortMismatch(f"predicate {atom} evaluated to {value!r}")
    return value


def eval_tsl(f: "Formula | TemporalFormula", computation: Computation, t: int = 0) -> bool:
    """Evaluate a quantifier-free formula on an ultimately periodic computation."""
    if not computation.periodic:
        raise ValueError("eval_tsl needs an ultimately periodic computation")
    core = _core(f)

    def leaf(node: TemporalFormula, position: int) -> bool:
        if isinstance(node, (PredicateTerm, UpdateTerm)):
            return holds_at(node, computation, position)
        raise ValueError(f"unexpected proposition {node} in a TSL formula")

    # updates at position t read t-1, so periodicity starts one position late
    return evaluate_on_lasso(core, leaf, len(computation.stem) + 1, len(computation.loop), t)


def seq_of(computation: Computation, atom_set: AtomSet) -> Lasso:
    """Word of true-atom sets induced by a computation."""
    if not computation.periodic:
        raise ValueError("seq_of needs an ultimately periodic computation")
    stem_length = len(computation.stem) + 1
    loop_length = len(computation.loop)

    def letter(t: int) -> frozenset:
        return frozenset(atom for atom in atom_set if holds_at(atom, computation, t))

    stem = tuple(letter(t) for t in range(stem_length))
    loop = tuple(letter(t) for t in range(stem_length, stem_length + loop_length))
    return Lasso(stem, loop)


def hyper_computation(assigned: Sequence[tuple[str, Computation]]) -> Computation:
    """Zip computations into one computation over trace-tagged identifiers."""
    if any(not comp.periodic for _, comp in assigned):
        raise ValueError("hyper computations need ultimately periodic components")
    stem_length = max((len(comp.stem) for _, comp in assigned), default=0)
    loop_length = lcm(*(len(comp.loop) for _, comp in assigned)) if assigned else 1

    def merged(t: int) -> Assignment:
        values: dict[Ident, object] = {}
        for trace, comp in assigned:
            for ident, value in comp.at(t).items():
                values[ident.on_trace(trace)] = value
        return Assignment(values)

    return Computation(
        merged(-1),
        tuple(merged(t) for t in range(stem_length)),
        tuple(merged(t) for t in range(stem_length, stem_length + loop_length)),
    )


def eval_hypertsl(
    f: Formula,
    computations: Sequence[Computation],
    assigned: Sequence[tuple[str, Computation]] = (),
) -> bool:
    """Evaluate a prenex formula over a finite set of ultimately periodic computations.

    ``assigned`` binds trace variables of the core that the prefix leaves free.
    """
    if not f.prefix and not assigned:
        return all(eval_tsl(f.core, comp) for comp in computations)

    def satisfied(index: int, assigned: tuple[tuple[str, Computation], ...]) -> bool:
        if index == len(f.prefix):
            return eval_tsl(f.core, hyper_computation(assigned))
        quantifier, trace = f.prefix[index]
        branches = (satisfied(index + 1, assigned + ((trace, comp),)) for comp in computations)
        return all(branches) if quantifier == FORALL else any(branches)

    return satisfied(0, tuple(assigned))


def negate(f: Formula) -> Formula:
    """Dual formula: quantifiers flipped, core negated."""
    prefix = tuple((EXISTS if q == FORALL else FORALL, v) for q, v in f.prefix)
    return Formula(prefix, negated(f.core))


def erase_traces(f: Formula) -> Formula:
    """Drop a single-trace prefix and the trace tags of every identifier."""
    if len(f.prefix) != 1:
        raise ValidationError("only single-trace formulas can be erased")

    def untrace_term(term):
        return substitute(term, lambda ident: Var(ident.untraced()))

    def walk(node: TemporalFormula) -> TemporalFormula:
        match node:
            case PredicateTerm(term):
                return PredicateTerm(untrace_term(term))
            case UpdateTerm(target, source):
                return UpdateTerm(target.untraced(), untrace_term(source))
            case Not(operand):
                return Not(walk(operand))
            case Next(operand):
                return Next(walk(operand))
            case And(left, right):
                return And(walk(left), walk(right))
            case Until(left, right):
                return Until(walk(left), walk(right))
        return node

    return Formula((), walk(f.core))


def default_sort_of(sorts: Mapping[str, str]) -> Callable[[Ident], str]:
    return lambda ident: sorts.get(ident.name, INT)

