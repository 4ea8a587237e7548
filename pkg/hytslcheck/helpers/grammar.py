"""Lexer and LALR grammar for terms, temporal formulas and program statements.

One grammar serves all three languages. Parsing yields a raw tuple tree; the builders
in ``terms``-level ``build_term`` here, and in the formula and program modules, turn raw
trees into typed ASTs and reject constructs that do not belong to the requested
language.
"""

from typing import Any, Collection

import ply.lex
import ply.yacc

from .errors import ParseError
from .terms import CELL, INPUT, Apply, Const, Ident, Term, Var

reserved = {
    "true": "TRUE",
    "false": "FALSE",
    "assert": "ASSERT",
    "forall": "FORALL",
    "exists": "EXISTS",
    "X": "NEXT",
    "F": "EVENTUALLY",
    "G": "GLOBALLY",
    "U": "UNTIL",
}

tokens = [
    "ID",
    "INT",
    "LPAREN",
    "RPAREN",
    "LBRACKET",
    "RBRACKET",
    "PLUS",
    "MINUS",
    "STAR",
    "EQ",
    "NEQ",
    "LE",
    "LT",
    "GE",
    "GT",
    "AND",
    "OR",
    "NOT",
    "ASSIGN",
    "SEMI",
    "DOT",
] + list(reserved.values())


def t_ID(t: Any) -> Any:
    r"[a-zA-Z_][a-zA-Z0-9_]*"
    t.type = reserved.get(t.value, "ID")
    return t


def t_INT(t: Any) -> Any:
    r"[0-9]+"
    t.value = int(t.value)
    return t


t_LPAREN = r"\("
t_RPAREN = r"\)"
t_LBRACKET = r"\["
t_RBRACKET = r"\]"
t_ASSIGN = r":="
t_PLUS = r"\+"
t_MINUS = r"-"
t_STAR = r"\*"
t_NEQ = r"\!="
t_EQ = r"="
t_LE = r"<="
t_LT = r"<"
t_GE = r">="
t_GT = r">"
t_AND = r"&&"
t_OR = r"\|\|"
t_NOT = r"\!"
t_SEMI = r";"
t_DOT = r"\."
t_ignore = " \t\r"
t_ignore_COMMENT = r"\#.*"


def t_newline(t: Any) -> None:
    r"\n+"
    t.lexer.lineno += len(t.value)


def _column(data: str, pos: int) -> int:
    return pos - data.rfind("\n", 0, pos)


def t_error(t: Any) -> None:
    raise ParseError(
        f"unexpected character {t.value[0]!r}",
        t.lexer.lineno,
        _column(t.lexer.lexdata, t.lexpos),
    )


precedence = (
    ("right", "QUANT"),
    ("right", "UNTIL"),
    ("left", "OR"),
    ("left", "AND"),
    ("right", "NEXT", "EVENTUALLY", "GLOBALLY"),
    ("nonassoc", "EQ", "NEQ", "LT", "LE", "GT", "GE"),
    ("left", "PLUS", "MINUS"),
    ("left", "STAR"),
    ("right", "NOT", "UMINUS"),
)

_BINARY = {
    "+": "+",
    "-": "-",
    "*": "*",
    "=": "=",
    "!=": "!=",
    "<": "<",
    "<=": "<=",
    ">": ">",
    ">=": ">=",
    "&&": "&&",
    "||": "||",
}


def p_statements_one(p: Any) -> None:
    "statements : statement"
    p[0] = p[1]


def p_statements_more(p: Any) -> None:
    "statements : statements SEMI statement"
    p[0] = ("seq", p[1], p[3])


def p_statement_assert(p: Any) -> None:
    "statement : ASSERT LPAREN expr RPAREN"
    p[0] = ("assert", p[3])


def p_statement_assign(p: Any) -> None:
    "statement : lvalue ASSIGN expr"
    p[0] = ("assign", p[1], p[3])


def p_statement_havoc(p: Any) -> None:
    "statement : lvalue ASSIGN STAR"
    p[0] = ("havoc", p[1])


def p_statement_step(p: Any) -> None:
    """statement : lvalue MINUS MINUS
    | lvalue PLUS PLUS"""
    name, trace = p[1]
    symbol = p[2]
    p[0] = ("assign", p[1], ("apply", symbol, (("var", name, trace), ("const", 1))))


def p_lvalue(p: Any) -> None:
    """lvalue : ID
    | ID LBRACKET ID RBRACKET"""
    p[0] = (p[1], p[3] if len(p) == 5 else None)


def p_expr_binary(p: Any) -> None:
    """expr : expr PLUS expr
    | expr MINUS expr
    | expr STAR expr
    | expr EQ expr
    | expr NEQ expr
    | expr LT expr
    | expr LE expr
    | expr GT expr
    | expr GE expr
    | expr AND expr
    | expr OR expr"""
    p[0] = ("apply", _BINARY[p[2]], (p[1], p[3]))


def p_expr_until(p: Any) -> None:
    "expr : expr UNTIL expr"
    p[0] = ("until", p[1], p[3])


def p_expr_uminus(p: Any) -> None:
    "expr : MINUS expr %prec UMINUS"
    p[0] = ("apply", "neg", (p[2],))


def p_expr_not(p: Any) -> None:
    "expr : NOT expr"
    p[0] = ("apply", "!", (p[2],))


def p_expr_temporal(p: Any) -> None:
    """expr : NEXT expr
    | EVENTUALLY expr
    | GLOBALLY expr"""
    p[0] = ({"X": "next", "F": "eventually", "G": "globally"}[p[1]], p[2])


def p_expr_quantifier(p: Any) -> None:
    """expr : FORALL ID DOT expr %prec QUANT
    | EXISTS ID DOT expr %prec QUANT"""
    p[0] = ("quant", p[1], p[2], p[4])


def p_expr_group(p: Any) -> None:
    "expr : LPAREN expr RPAREN"
    p[0] = p[2]


def p_expr_int(p: Any) -> None:
    "expr : INT"
    p[0] = ("const", p[1])


def p_expr_bool(p: Any) -> None:
    """expr : TRUE
    | FALSE"""
    p[0] = ("const", p[1] == "true")


def p_expr_var(p: Any) -> None:
    "expr : lvalue"
    p[0] = ("var", p[1][0], p[1][1])


def p_expr_update(p: Any) -> None:
    # "<-" is LT followed by MINUS, so "n<-1" elsewhere still reads as n < -1
    "expr : LBRACKET lvalue LT MINUS expr RBRACKET"
    p[0] = ("update", p[2], p[5])


def p_error(t: Any) -> None:
    if t is None:
        raise ParseError("unexpected end of input")
    raise ParseError(
        f"syntax error near {t.value!r}",
        t.lineno,
        _column(t.lexer.lexdata, t.lexpos),
    )


_lexer = None
_parsers: dict[str, ply.yacc.LRParser] = {}


def _get_lexer() -> ply.lex.Lexer:
    global _lexer
    if _lexer is None:
        _lexer = ply.lex.lex(debug=False)
    return _lexer


def _get_parser(start: str) -> ply.yacc.LRParser:
    if start not in _parsers:
        _parsers[start] = ply.yacc.yacc(
            start=start,
            debug=False,
            write_tables=False,
            errorlog=ply.yacc.NullLogger(),
        )
    return _parsers[start]


def parse_raw(text: str, start: str = "expr") -> tuple:
    """Parse ``text`` into a raw tuple tree rooted at the grammar symbol ``start``."""
    lexer = _get_lexer().clone()
    lexer.lineno = 1
    if not text.strip():
        raise ParseError("empty input")
    return _get_parser(start).parse(text, lexer=lexer)


def make_ident(name: str, trace: str | None, inputs: Collection[str]) -> Ident:
    return Ident(name, INPUT if name in inputs else CELL, trace)


def _is_constant(term: Term) -> bool:
    if isinstance(term, Const):
        return True
    if isinstance(term, Apply):
        return all(_is_constant(arg) for arg in term.args)
    return False


def build_term(raw: tuple, inputs: Collection[str] = ()) -> Term:
    """Turn a raw tree into a Term, rejecting temporal operators and quantifiers."""
    tag = raw[0]
    if tag == "const":
        return Const(raw[1])
    if tag == "var":
        return Var(make_ident(raw[1], raw[2], inputs))
    if tag == "apply":
        args = tuple(build_term(arg, inputs) for arg in raw[2])
        if raw[1] == "*" and not (_is_constant(args[0]) or _is_constant(args[1])):
            raise ParseError("non-linear multiplication: one factor must be a constant")
        return Apply(raw[1], args)
    if tag == "update":
        raise ParseError("update term is not allowed inside a function term")
    if tag == "quant":
        raise ParseError("quantifier is not allowed inside a function term")
    raise ParseError(f"temporal operator {tag!r} is not allowed inside a function term")


def is_pure(raw: tuple) -> bool:
    """Whether a raw tree is free of temporal operators, update terms and quantifiers."""
    tag = raw[0]
    if tag in ("const", "var"):
        return True
    if tag == "apply":
        return all(is_pure(arg) for arg in raw[2])
    return False


def parse_term(text: str, inputs: Collection[str] = ()) -> Term:
    """Parse a function or predicate term; names listed in ``inputs`` become inputs."""
    return build_term(parse_raw(text, "expr"), inputs)
