"""Satisfiability backends for quantifier-free linear integer arithmetic with booleans.

Every backend answers ``check(variables, clauses)`` where ``variables`` maps flat
names to sorts and ``clauses`` are terms over ``Var(Ident(name))``. Backends hold
only plain configuration so they can be shipped to worker processes.
"""

import logging
import re
import subprocess
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import z3

from .errors import SolverError
from .terms import BOOL, INT, Apply, Const, Ident, Term, Var, evaluate, sort_of_value
from .terms import variables as free_variables

logger = logging.getLogger("hytslcheck.solvers")

SAT = "sat"
UNSAT = "unsat"
UNKNOWN = "unknown"


@dataclass(frozen=True)
class SatResult:
    status: str
    model: dict | None = field(default=None, compare=False)
    reason: str = ""

    @property
    def sat(self) -> bool:
        return self.status == SAT

    @property
    def unsat(self) -> bool:
        return self.status == UNSAT


def _z3_term(term: Term, symbols: dict):
    match term:
        case Const(value):
            return z3.BoolVal(value) if isinstance(value, bool) else z3.IntVal(value)
        case Var(ident):
            return symbols[ident.name]
        case Apply("neg", (arg,)):
            return -_z3_term(arg, symbols)
        case Apply("!", (arg,)):
            return z3.Not(_z3_term(arg, symbols))
        case Apply(symbol, (left, right)):
            a, b = _z3_term(left, symbols), _z3_term(right, symbols)
            if symbol == "&&":
                return z3.And(a, b)
            if symbol == "||":
                return z3.Or(a, b)
            return {
                "+": lambda: a + b,
                "-": lambda: a - b,
                "*": lambda: a * b,
                "=": lambda: a == b,
                "!=": lambda: a != b,
                "<": lambda: a < b,
                "<=": lambda: a <= b,
                ">": lambda: a > b,
                ">=": lambda: a >= b,
            }[symbol]()
    raise ValueError(f"cannot translate {term!r}")


@dataclass(frozen=True)
class Z3Solver:
    """In-process z3; a query that hits ``timeout`` answers unknown."""

    timeout: float = 5.0
    name: str = "z3"

    def check(self, variables: Mapping[str, str], clauses: Sequence[Term]) -> SatResult:
        symbols = {
            name: z3.Bool(name) if sort == BOOL else z3.Int(name) for name, sort in variables.items()
        }
        solver = z3.Solver()
        solver.set("timeout", int(self.timeout * 1000))
        for clause in clauses:
            solver.add(_z3_term(clause, symbols))
        answer = solver.check()
        if answer == z3.unsat:
            return SatResult(UNSAT)
        if answer == z3.unknown:
            reason = solver.reason_unknown()
            logger.warning("z3 answered unknown: %s", reason)
            return SatResult(UNKNOWN, reason=reason)
        model = solver.model()
        values = {}
        for name, sort in variables.items():
            value = model.eval(symbols[name], model_completion=True)
            values[name] = z3.is_true(value) if sort == BOOL else value.as_long()
        return SatResult(SAT, values)


_SMT_SYMBOLS = {
    "&&": "and",
    "||": "or",
    "!": "not",
    "neg": "-",
    "!=": "distinct",
}


def smtlib_term(term: Term) -> str:
    """SMT-LIB v2 rendering of a term; identifiers become quoted symbols."""
    match term:
        case Const(value) if isinstance(value, bool):
            return "true" if value else "false"
        case Const(value):
            return str(value) if value >= 0 else f"(- {-value})"
        case Var(ident):
            return f"|{ident.name}|"
        case Apply(symbol, args):
            inner = " ".join(smtlib_term(arg) for arg in args)
            return f"({_SMT_SYMBOLS.get(symbol, symbol)} {inner})"
    raise ValueError(f"cannot translate {term!r}")


def smtlib_script(variables: Mapping[str, str], clauses: Sequence[Term]) -> str:
    lines = ["(set-logic QF_LIA)", "(set-option :produce-models true)"]
    for name, sort in variables.items():
        lines.append(f"(declare-const |{name}| {'Bool' if sort == BOOL else 'Int'})")
    for clause in clauses:
        lines.append(f"(assert {smtlib_term(clause)})")
    lines += ["(check-sat)", "(get-model)", "(exit)"]
    return "\n".join(lines) + "\n"


_TOKEN = re.compile(r"\(|\)|\|[^|]*\||[^\s()]+")


def _sexprs(text: str) -> list:
    stack: list[list] = [[]]
    for token in _TOKEN.findall(text):
        if token == "(":
            stack.append([])
        elif token == ")":
            if len(stack) == 1:
                raise SolverError(f"unbalanced solver output: {text[:200]!r}")
            done = stack.pop()
            stack[-1].append(done)
        else:
            stack[-1].append(token)
    if len(stack) != 1:
        raise SolverError(f"unbalanced solver output: {text[:200]!r}")
    return stack[0]


def _smt_value(node, sort: str):
    if sort == BOOL and node in ("true", "false"):
        return node == "true"
    if isinstance(node, str) and re.fullmatch(r"[0-9]+", node):
        return int(node)
    if isinstance(node, list) and len(node) == 2 and node[0] == "-":
        return -_smt_value(node[1], INT)
    raise SolverError(f"cannot read model value {node!r}")


def parse_smtlib_answer(output: str, variables: Mapping[str, str]) -> SatResult:
    """Read ``check-sat`` and ``get-model`` answers from a solver's standard output."""
    nodes = _sexprs(output)
    if not nodes or nodes[0] not in (SAT, UNSAT, UNKNOWN):
        raise SolverError(f"unexpected solver answer: {output[:200]!r}")
    status = nodes[0]
    if status != SAT:
        return SatResult(status)
    model = {name: (False if sort == BOOL else 0) for name, sort in variables.items()}
    for node in nodes[1:]:
        if not isinstance(node, list):
            continue
        entries = node[1:] if node and node[0] == "model" else node
        for entry in entries:
            if isinstance(entry, list) and len(entry) == 5 and entry[0] == "define-fun":
                name = entry[1].strip("|")
                if name in variables:
                    model[name] = _smt_value(entry[4], variables[name])
    return SatResult(SAT, model)


@dataclass(frozen=True)
class SmtLibSolver:
    """An external SMT-LIB v2 solver fed one script per query over stdin."""

    command: tuple[str, ...]
    timeout: float = 5.0
    name: str = "smtlib"

    def check(self, variables: Mapping[str, str], clauses: Sequence[Term]) -> SatResult:
        script = smtlib_script(variables, clauses)
        try:
            completed = subprocess.run(
                list(self.command),
                input=script,
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
        except subprocess.TimeoutExpired:
            logger.warning("solver %s timed out after %ss", self.command[0], self.timeout)
            return SatResult(UNKNOWN, reason="timeout")
        except OSError as exc:
            raise SolverError(f"cannot start solver {self.command[0]}: {exc}") from exc
        if not completed.stdout.strip():
            raise SolverError(
                f"solver {self.command[0]} exited with {completed.returncode}: {completed.stderr.strip()}"
            )
        return parse_smtlib_answer(completed.stdout, variables)


def _domain(sort: str, bound: int) -> list:
    if sort == BOOL:
        return [False, True]
    values = [0]
    for v in range(1, bound + 1):
        values += [v, -v]
    return values


def _step_of(name: str) -> int:
    _, _, step = name.rpartition("@")
    return int(step) if step.lstrip("-").isdigit() else 0


@dataclass(frozen=True)
class BoundedSolver:
    """Enumeration over integers in ``[-bound, bound]``.

    Values forced by an equation are computed instead of enumerated and may leave
    the range. ``unsat`` means no model within the bound.
    """

    bound: int = 32
    node_limit: int = 2_000_000
    name: str = "builtin"

    def check(self, variables: Mapping[str, str], clauses: Sequence[Term]) -> SatResult:
        order = sorted(variables, key=lambda name: (_step_of(name), name))
        position = {name: i for i, name in enumerate(order)}
        idents = {name: Ident(name) for name in order}

        def last(clause: Term) -> int:
            return max((position[i.name] for i in variables_of[clause]), default=-1)

        variables_of = {clause: free_variables(clause) for clause in clauses}
        ground = [clause for clause in clauses if not variables_of[clause]]
        if any(evaluate(clause, {}) is not True for clause in ground):
            return SatResult(UNSAT)
        checks: list[list[Term]] = [[] for _ in order]
        definitions: dict[int, Term] = {}
        for clause in clauses:
            if not variables_of[clause]:
                continue
            at = last(clause)
            checks[at].append(clause)
            if isinstance(clause, Apply) and clause.symbol == "=" and at not in definitions:
                for side, other in (clause.args, reversed(clause.args)):
                    if (
                        isinstance(side, Var)
                        and position[side.ident.name] == at
                        and all(position[i.name] < at for i in free_variables(other))
                    ):
                        definitions[at] = other
                        break

        values: dict[Ident, object] = {}
        visited = 0

        def search(index: int) -> bool:
            nonlocal visited
            if index == len(order):
                return True
            name = order[index]
            sort = variables[name]
            if index in definitions:
                forced = evaluate(definitions[index], values)
                candidates = [forced] if sort_of_value(forced) == sort else []
            else:
                candidates = _domain(sort, self.bound)
            for value in candidates:
                visited += 1
                if visited > self.node_limit:
                    raise _Exhausted
                values[idents[name]] = value
                if all(evaluate(clause, values) is True for clause in checks[index]):
                    if search(index + 1):
                        return True
            values.pop(idents[name], None)
            return False

        try:
            found = search(0)
        except _Exhausted:
            logger.warning("bounded solver gave up after %d nodes", self.node_limit)
            return SatResult(UNKNOWN, reason="node limit")
        except RecursionError:
            return SatResult(UNKNOWN, reason="too many variables")
        if not found:
            return SatResult(UNSAT)
        return SatResult(SAT, {name: values[idents[name]] for name in order})


class _Exhausted(Exception):
    pass


def make_solver(kind: str = "z3", command: Sequence[str] | None = None, timeout: float = 5.0, value_bound: int = 32):
    """Backend for the configuration: an external command wins over ``kind``."""
    if command:
        return SmtLibSolver(tuple(command), timeout)
    if kind == "z3":
        return Z3Solver(timeout)
    if kind == "builtin":
        return BoundedSolver(value_bound)
    raise ValueError(f"unknown solver {kind!r}")
