"""Terms over memory cells and inputs, assignments, computations and the evaluation function.

The theory is fixed: linear integer arithmetic plus booleans. Integers are Python ints
(arbitrary precision), booleans are Python bools; ``bool`` is always checked before
``int`` since it is a subclass.
"""

from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Union

from .errors import SortMismatch, UnboundVariable

Value = Union[int, bool]

CELL = "cell"
INPUT = "input"

INT = "int"
BOOL = "bool"

ARITHMETIC = {"+", "-", "*"}
COMPARISONS = {"<", "<=", ">", ">="}
EQUALITIES = {"=", "!="}
CONNECTIVES = {"&&", "||"}
ARITY = {
    "+": 2,
    "-": 2,
    "*": 2,
    "neg": 1,
    "=": 2,
    "!=": 2,
    "<": 2,
    "<=": 2,
    ">": 2,
    ">=": 2,
    "&&": 2,
    "||": 2,
    "!": 1,
}

# printing precedence, higher binds tighter
_PRECEDENCE = {"||": 1, "&&": 2, "+": 4, "-": 4, "*": 5, "neg": 6, "!": 6}
for _op in COMPARISONS | EQUALITIES:
    _PRECEDENCE[_op] = 3
_ATOMIC = 7


def sort_of_value(value: Value) -> str:
    """Return the sort of a scalar value."""
    if isinstance(value, bool):
        return BOOL
    if isinstance(value, int):
        return INT
    raise SortMismatch(f"unsupported value {value!r}")


@dataclass(frozen=True)
class Ident:
    """A memory cell or input, optionally tagged with a trace variable."""

    name: str
    kind: str = CELL
    trace: str | None = None

    def __str__(self) -> str:
        return self.name if self.trace is None else f"{self.name}[{self.trace}]"

    def on_trace(self, trace: str) -> "Ident":
        return Ident(self.name, self.kind, trace)

    def untraced(self) -> "Ident":
        return Ident(self.name, self.kind)

    def at(self, step: int) -> str:
        """Flat solver name of this identifier at a time step, e.g. ``n[pi]@3``."""
        return f"{self}@{step}"


def ident_key(ident: Ident) -> tuple[str, str, str]:
    return (ident.name, ident.trace or "", ident.kind)


@dataclass(frozen=True)
class Const:
    value: Value
    sort: str = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "sort", sort_of_value(self.value))

    def __str__(self) -> str:
        return print_term(self)


@dataclass(frozen=True)
class Var:
    ident: Ident

    def __str__(self) -> str:
        return str(self.ident)


@dataclass(frozen=True)
class Apply:
    symbol: str
    args: tuple

    def __post_init__(self):
        if self.symbol not in ARITY:
            raise ValueError(f"unknown function symbol {self.symbol!r}")
        if len(self.args) != ARITY[self.symbol]:
            raise ValueError(
                f"symbol {self.symbol!r} expects {ARITY[self.symbol]} arguments, got {len(self.args)}"
            )

    def __str__(self) -> str:
        return print_term(self)


Term = Union[Const, Var, Apply]

TRUE = Const(True)
FALSE = Const(False)


@dataclass(frozen=True)
class PredicateTerm:
    """A boolean-sorted term used as an atom of a temporal formula."""

    term: Term

    def __str__(self) -> str:
        return print_term(self.term)


@dataclass(frozen=True)
class UpdateTerm:
    """``[c <- source]``: the cell's new value equals ``source`` evaluated one step earlier."""

    target: Ident
    source: Term

    def __post_init__(self):
        if self.target.kind != CELL:
            raise ValueError(f"update target {self.target} is not a cell")

    def __str__(self) -> str:
        return f"[{self.target} <- {print_term(self.source)}]"


class Assignment:
    """A total map from identifiers to values over a fixed universe."""

    __slots__ = ("_values", "_hash")

    def __init__(self, values: Mapping[Ident, Value] | Iterable[tuple[Ident, Value]] = ()):
        self._values = dict(values)
        self._hash = None

    def __getitem__(self, ident: Ident) -> Value:
        try:
            return self._values[ident]
        except KeyError:
            raise UnboundVariable(str(ident)) from None

    def __contains__(self, ident: object) -> bool:
        return ident in self._values

    def __iter__(self) -> Iterator[Ident]:
        return iter(sorted(self._values, key=ident_key))

    def __len__(self) -> int:
        return len(self._values)

    @property
    def universe(self) -> frozenset[Ident]:
        return frozenset(self._values)

    def items(self) -> list[tuple[Ident, Value]]:
        return [(ident, self._values[ident]) for ident in self]

    def updated(self, changes: Mapping[Ident, Value]) -> "Assignment":
        values = dict(self._values)
        values.update(changes)
        return Assignment(values)

    def restrict(self, idents: Iterable[Ident]) -> "Assignment":
        keep = set(idents)
        return Assignment({i: v for i, v in self._values.items() if i in keep})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Assignment):
            return NotImplemented
        if self._values.keys() != other._values.keys():
            return False
        return all(
            sort_of_value(v) == sort_of_value(other._values[i]) and v == other._values[i]
            for i, v in self._values.items()
        )

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset((i, v, type(v)) for i, v in self._values.items()))
        return self._hash

    def __repr__(self) -> str:
        inner = ", ".join(f"{i}={print_term(Const(v))}" for i, v in self.items())
        return "{" + inner + "}"


@dataclass(frozen=True)
class Computation:
    """An initial assignment followed by a finite or ultimately periodic run.

    A computation with an empty ``loop`` is finite (a bounded prefix); otherwise the
    steps are ``stem`` followed by ``loop`` repeated forever.
    """

    initial: Assignment
    stem: tuple[Assignment, ...] = ()
    loop: tuple[Assignment, ...] = ()

    @property
    def periodic(self) -> bool:
        return bool(self.loop)

    @property
    def horizon(self) -> int:
        """Number of positions after which every position repeats an earlier one."""
        return len(self.stem) + 2 * len(self.loop)

    def __len__(self) -> int:
        return len(self.stem) + len(self.loop)

    def at(self, t: int) -> Assignment:
        if t == -1:
            return self.initial
        if t < -1:
            raise IndexError(t)
        if t < len(self.stem):
            return self.stem[t]
        if not self.loop:
            raise IndexError(f"position {t} beyond finite computation of length {len(self.stem)}")
        return self.loop[(t - len(self.stem)) % len(self.loop)]

    def steps(self, count: int) -> list[Assignment]:
        return [self.at(t) for t in range(count)]


def variables(term: Term) -> set[Ident]:
    """All identifiers occurring in a term."""
    if isinstance(term, Var):
        return {term.ident}
    if isinstance(term, Apply):
        found: set[Ident] = set()
        for arg in term.args:
            found |= variables(arg)
        return found
    return set()


def _expect(value: Value, sort: str, symbol: str) -> None:
    if sort_of_value(value) != sort:
        raise SortMismatch(f"operator {symbol!r} expects {sort}, got {value!r}")


def evaluate(term: Term, a: Assignment) -> Value:
    """Evaluate a term under an assignment."""
    if isinstance(term, Const):
        return term.value
    if isinstance(term, Var):
        return a[term.ident]
    symbol = term.symbol
    values = [evaluate(arg, a) for arg in term.args]
    if symbol in ARITHMETIC or symbol == "neg" or symbol in COMPARISONS:
        for v in values:
            _expect(v, INT, symbol)
    elif symbol in CONNECTIVES or symbol == "!":
        for v in values:
            _expect(v, BOOL, symbol)
    elif symbol in EQUALITIES:
        if sort_of_value(values[0]) != sort_of_value(values[1]):
            raise SortMismatch(f"operator {symbol!r} compares {values[0]!r} with {values[1]!r}")

    if symbol == "+":
        return values[0] + values[1]
    if symbol == "-":
        return values[0] - values[1]
    if symbol == "*":
        return values[0] * values[1]
    if symbol == "neg":
        return -values[0]
    if symbol == "=":
        return values[0] == values[1]
    if symbol == "!=":
        return values[0] != values[1]
    if symbol == "<":
        return values[0] < values[1]
    if symbol == "<=":
        return values[0] <= values[1]
    if symbol == ">":
        return values[0] > values[1]
    if symbol == ">=":
        return values[0] >= values[1]
    if symbol == "&&":
        return values[0] and values[1]
    if symbol == "||":
        return values[0] or values[1]
    return not values[0]


def update_holds(update: UpdateTerm, prev: Assignment, cur: Assignment) -> bool:
    """Whether ``cur`` assigns the update's target the source's value under ``prev``."""
    expected = evaluate(update.source, prev)
    actual = cur[update.target]
    return sort_of_value(expected) == sort_of_value(actual) and expected == actual


def infer_sort(term: Term, sort_of: Callable[[Ident], str] | Mapping[str, str] | None = None) -> str:
    """Statically infer the sort of a term; identifiers default to int."""
    if sort_of is None:
        lookup = lambda ident: INT  # noqa: E731
    elif callable(sort_of):
        lookup = sort_of
    else:
        lookup = lambda ident: sort_of.get(ident.name, INT)  # noqa: E731

    def walk(t: Term) -> str:
        if isinstance(t, Const):
            return t.sort
        if isinstance(t, Var):
            return lookup(t.ident)
        arg_sorts = [walk(arg) for arg in t.args]
        symbol = t.symbol
        if symbol in ARITHMETIC or symbol == "neg":
            if any(s != INT for s in arg_sorts):
                raise SortMismatch(f"arithmetic on non-integer operand in {print_term(t)}")
            return INT
        if symbol in COMPARISONS:
            if any(s != INT for s in arg_sorts):
                raise SortMismatch(f"comparison of non-integer operand in {print_term(t)}")
            return BOOL
        if symbol in EQUALITIES:
            if arg_sorts[0] != arg_sorts[1]:
                raise SortMismatch(f"equality between {arg_sorts[0]} and {arg_sorts[1]} in {print_term(t)}")
            return BOOL
        if any(s != BOOL for s in arg_sorts):
            raise SortMismatch(f"connective on non-boolean operand in {print_term(t)}")
        return BOOL

    return walk(term)


def rename(term: Term, trace: str) -> Term:
    """Tag every identifier of an untraced term with ``trace``."""
    if isinstance(term, Var):
        return Var(term.ident.on_trace(trace))
    if isinstance(term, Apply):
        return Apply(term.symbol, tuple(rename(arg, trace) for arg in term.args))
    return term


def substitute(term: Term, mapping: Callable[[Ident], Term]) -> Term:
    """Replace every variable by ``mapping(ident)``."""
    if isinstance(term, Var):
        return mapping(term.ident)
    if isinstance(term, Apply):
        return Apply(term.symbol, tuple(substitute(arg, mapping) for arg in term.args))
    return term


def conjunction(terms: Iterable[Term]) -> Term:
    """Left-nested conjunction; the empty conjunction is ``true``."""
    result = None
    for t in terms:
        result = t if result is None else Apply("&&", (result, t))
    return TRUE if result is None else result


def disjunction(terms: Iterable[Term]) -> Term:
    result = None
    for t in terms:
        result = t if result is None else Apply("||", (result, t))
    return FALSE if result is None else result


def negation(term: Term) -> Term:
    return Apply("!", (term,))


def equals(left: Term, right: Term) -> Term:
    return Apply("=", (left, right))


def _precedence(term: Term) -> int:
    if isinstance(term, Apply):
        return _PRECEDENCE[term.symbol]
    if isinstance(term, Const) and term.sort == INT and term.value < 0:
        return _PRECEDENCE["neg"]
    return _ATOMIC


def _wrap(term: Term, minimum: int) -> str:
    text = print_term(term)
    return f"({text})" if _precedence(term) < minimum else text


def print_term(term: Term) -> str:
    """Render a term in the concrete syntax accepted by the parser."""
    if isinstance(term, Const):
        if term.sort == BOOL:
            return "true" if term.value else "false"
        return str(term.value)
    if isinstance(term, Var):
        return str(term.ident)
    symbol = term.symbol
    prec = _PRECEDENCE[symbol]
    if symbol == "neg":
        return "-" + _wrap(term.args[0], _ATOMIC)
    if symbol == "!":
        return "!" + _wrap(term.args[0], _ATOMIC)
    left, right = term.args
    if symbol in COMPARISONS or symbol in EQUALITIES:
        return f"{_wrap(left, prec + 1)} {symbol} {_wrap(right, prec + 1)}"
    return f"{_wrap(left, prec)} {symbol} {_wrap(right, prec + 1)}"
