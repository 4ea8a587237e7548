"""Exception hierarchy shared by the parsers, automata constructions and solvers."""


class HytslError(Exception):
    """Base class for every error raised by hytslcheck."""


class ParseError(HytslError, ValueError):
    """Raised when a term, formula, statement or automaton file does not parse."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "")
            message = f"{where}: {message}"
        super().__init__(message)


class NonPrenexError(ParseError):
    """Raised when a trace quantifier occurs below a temporal or boolean operator."""


class ValidationError(HytslError, ValueError):
    """Raised when a parsed object is well-formed but semantically invalid."""


class UnboundVariable(HytslError, KeyError):
    """Raised when an assignment is asked for an identifier outside its universe."""

    def __str__(self) -> str:
        return f"unbound variable {self.args[0]}" if self.args else "unbound variable"


class SortMismatch(HytslError, TypeError):
    """Raised when an operator is applied to operands of the wrong sort."""


class BudgetExceeded(HytslError):
    """Raised when a construction generates more states than allowed."""

    def __init__(self, generated: int, limit: int, what: str = "complement"):
        self.generated = generated
        self.limit = limit
        super().__init__(f"{what} exceeded its budget ({generated} states, limit {limit})")


class MissingProvenance(HytslError):
    """Raised when a transition of a product automaton carries no provenance record."""


class SolverError(HytslError):
    """Raised when an SMT backend crashes, times out or answers something unreadable."""
