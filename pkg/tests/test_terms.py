"""Tests for terms and the shared grammar: parsing, printing, evaluation, sorts."""

import random

import pytest

from hytslcheck.helpers.errors import ParseError, SortMismatch, UnboundVariable
from hytslcheck.helpers.grammar import parse_term
from hytslcheck.helpers.terms import (
    BOOL,
    CELL,
    INPUT,
    INT,
    Apply,
    Assignment,
    Computation,
    Const,
    Ident,
    UpdateTerm,
    Var,
    evaluate,
    infer_sort,
    print_term,
    rename,
    update_holds,
    variables,
)

n, m, b = Ident("n"), Ident("m"), Ident("b")
i = Ident("i", INPUT)


def _assignment(**values):
    kinds = {"i": INPUT}
    return Assignment({Ident(k, kinds.get(k, CELL)): v for k, v in values.items()})


class TestParsing:
    def test_precedence(self):
        term = parse_term("n + 2 * m < 3 && b")
        assert term.symbol == "&&"
        left = term.args[0]
        assert left.symbol == "<"
        assert left.args[0] == Apply("+", (Var(n), Apply("*", (Const(2), Var(m)))))

    def test_inputs_are_tagged(self):
        term = parse_term("i >= n", inputs={"i"})
        assert variables(term) == {i, n}

    def test_trace_index(self):
        term = parse_term("n[pi] = n[pi2]")
        assert variables(term) == {Ident("n", CELL, "pi"), Ident("n", CELL, "pi2")}

    def test_unary_minus(self):
        assert parse_term("-n") == Apply("neg", (Var(n),))
        assert parse_term("-3") == Apply("neg", (Const(3),))

    def test_nonlinear_rejected(self):
        with pytest.raises(ParseError):
            parse_term("n * m")

    def test_temporal_operator_rejected(self):
        with pytest.raises(ParseError):
            parse_term("G n > 0")

    def test_error_location(self):
        with pytest.raises(ParseError) as info:
            parse_term("n + ) 1")
        assert info.value.line == 1
        assert info.value.column == 5

    def test_bad_character(self):
        with pytest.raises(ParseError):
            parse_term("n $ 1")

    def test_arrow_and_double_minus_are_arithmetic(self):
        assert parse_term("n<-1") == parse_term("n < -1")
        assert evaluate(parse_term("5--3"), Assignment()) == 8
        assert parse_term("n--m") == Apply("-", (Var(n), Apply("neg", (Var(m),))))


def _random_term(rng: random.Random, depth: int, sort: str):
    if depth == 0 or rng.random() < 0.25:
        if sort == INT:
            return rng.choice([Var(n), Var(m), Const(rng.randint(0, 5))])
        return rng.choice([Var(b), Const(True), Const(False)])
    if sort == INT:
        symbol = rng.choice(["+", "-", "*", "neg"])
        if symbol == "neg":
            return Apply("neg", (_random_term(rng, depth - 1, INT),))
        if symbol == "*":
            return Apply("*", (Const(rng.randint(0, 4)), _random_term(rng, depth - 1, INT)))
        return Apply(symbol, (_random_term(rng, depth - 1, INT), _random_term(rng, depth - 1, INT)))
    symbol = rng.choice(["<", "<=", "=", "!=", "&&", "||", "!"])
    if symbol == "!":
        return Apply("!", (_random_term(rng, depth - 1, BOOL),))
    if symbol in ("&&", "||"):
        return Apply(symbol, (_random_term(rng, depth - 1, BOOL), _random_term(rng, depth - 1, BOOL)))
    return Apply(symbol, (_random_term(rng, depth - 1, INT), _random_term(rng, depth - 1, INT)))


class TestPrinting:
    def test_simple(self):
        assert print_term(parse_term("(n + 1) * 2 = m")) == "(n + 1) * 2 = m"
        assert print_term(parse_term("n - (m - 1)")) == "n - (m - 1)"
        assert print_term(parse_term("!(b && true)")) == "!(b && true)"

    def test_print_then_parse_is_identity(self):
        rng = random.Random(7)
        for _ in range(300):
            term = _random_term(rng, 4, rng.choice([INT, BOOL]))
            assert parse_term(print_term(term)) == term

    def test_nested_negation(self):
        term = Apply("neg", (Apply("neg", (Var(n),)),))
        assert print_term(term) == "-(-n)"
        assert parse_term(print_term(term)) == term
        assert parse_term("--n") == term


class TestEvaluation:
    def test_arithmetic_and_comparison(self):
        a = _assignment(n=3, m=-2, b=True)
        assert evaluate(parse_term("n + 2 * m"), a) == -1
        assert evaluate(parse_term("-n < m"), a) is True
        assert evaluate(parse_term("b && n != m"), a) is True

    def test_bool_is_not_int(self):
        a = _assignment(n=1, b=True)
        with pytest.raises(SortMismatch):
            evaluate(parse_term("n = b"), a)
        with pytest.raises(SortMismatch):
            evaluate(parse_term("b + 1"), a)

    def test_unbound(self):
        with pytest.raises(UnboundVariable):
            evaluate(parse_term("n + m"), _assignment(n=1))

    def test_infer_sort(self):
        sorts = {"b": BOOL}
        assert infer_sort(parse_term("n + 1"), sorts) == INT
        assert infer_sort(parse_term("b || n > 0"), sorts) == BOOL
        with pytest.raises(SortMismatch):
            infer_sort(parse_term("b < 1"), sorts)

    def test_rename(self):
        term = rename(parse_term("n + i", inputs={"i"}), "pi")
        assert variables(term) == {n.on_trace("pi"), i.on_trace("pi")}
        assert print_term(term) == "n[pi] + i[pi]"


class TestUpdates:
    def test_update_reads_previous_step(self):
        update = UpdateTerm(n, parse_term("n + m"))
        prev = _assignment(n=1, m=2)
        assert update_holds(update, prev, _assignment(n=3, m=0))
        assert not update_holds(update, prev, _assignment(n=2, m=0))

    def test_update_on_input_rejected(self):
        with pytest.raises(ValueError):
            UpdateTerm(i, Const(0))


class TestComputation:
    def test_positions(self):
        initial = _assignment(n=0)
        steps = [_assignment(n=v) for v in range(4)]
        comp = Computation(initial, tuple(steps[:2]), tuple(steps[2:]))
        assert comp.at(-1) == initial
        assert [comp.at(t)[n] for t in range(6)] == [0, 1, 2, 3, 2, 3]
        assert comp.horizon == 6

    def test_finite_computation_bounds(self):
        comp = Computation(_assignment(n=0), (_assignment(n=1),))
        assert not comp.periodic
        with pytest.raises(IndexError):
            comp.at(1)

    def test_assignment_equality_respects_sorts(self):
        assert _assignment(n=1) != Assignment({n: True})
        assert hash(_assignment(n=1, m=2)) == hash(_assignment(m=2, n=1))
