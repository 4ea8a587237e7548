import pytest

from hytslcheck.helpers.buchi import Lasso, accepts
from hytslcheck.helpers.errors import ParseError, ValidationError
from hytslcheck.helpers.formulas import AtomSet
from hytslcheck.helpers.grammar import parse_term
from hytslcheck.helpers.program import (
    PROGRAM,
    Assert,
    Assign,
    Havoc,
    Seq,
    combine,
    flatten,
    lasso_automaton,
    matches_step,
    parse_program_automaton,
    parse_statement,
    self_compose,
    sequence,
    statement_idents,
)
from hytslcheck.helpers.terms import BOOL, CELL, INPUT, Assignment, Const, Ident, PredicateTerm, UpdateTerm

n, c = Ident("n"), Ident("c")
i = Ident("i", INPUT)

HEADER = "cells: n\ninputs: i\nstate q0 initial accepting\n"


# ======================== Statements ========================

class TestStatements:
    def test_parse_sequence(self):
        s = parse_statement("n := n + 1; assert(n > 0); n := *")
        assert [str(b) for b in flatten(s)] == ["n := n + 1", "assert(n > 0)", "n := *"]
        assert isinstance(s, Seq) and isinstance(s.first, Seq)

    def test_decrement_sugar(self):
        assert parse_statement("n--") == Assign(n, parse_term("n - 1"))
        assert str(parse_statement("n++")) == "n := n + 1"

    def test_negative_literal_in_assertion(self):
        assert str(parse_statement("assert(n<-1)")) == "assert(n < -1)"
        assert str(parse_statement("n--; assert(n<-1)")) == "n := n - 1; assert(n < -1)"

    def test_assignment_to_input(self):
        with pytest.raises(ValidationError):
            parse_statement("i := 0", inputs={"i"})

    def test_empty_sequence_is_skip(self):
        assert str(sequence([])) == "assert(true)"


# ======================== Automaton files ========================

class TestParseAutomaton:
    def test_gni(self, gni):
        assert gni.cells == frozenset({c})
        assert gni.inputs == frozenset({i})
        assert gni.automaton.num_states == 3
        assert len(gni.automaton.transitions) == 4
        assert gni.initial[c] == 0

    def test_initial_values_and_sorts(self, three_state):
        done = Ident("done")
        assert three_state.sort_of(done) == BOOL
        assert three_state.initial[n] == 3
        assert three_state.initial[done] is False
        assert three_state.automaton.name(three_state.automaton.initial) == "start"

    def test_rejecting_state_in_system_mode(self):
        text = HEADER + "state q1\ntrans q0 -> q1: n := 1\n"
        with pytest.raises(ValidationError):
            parse_program_automaton(text)
        program = parse_program_automaton("mode: program\n" + text)
        assert program.mode == PROGRAM
        assert program.automaton.accepting == frozenset({0})

    def test_write_to_input(self):
        with pytest.raises(ValidationError):
            parse_program_automaton(HEADER + "trans q0 -> q0: i := 1\n")

    def test_undeclared_identifier(self):
        with pytest.raises(ValidationError):
            parse_program_automaton(HEADER + "trans q0 -> q0: m := 1\n")

    def test_undeclared_state(self):
        with pytest.raises(ValidationError):
            parse_program_automaton(HEADER + "trans q0 -> q9: n := 1\n")

    def test_ill_sorted_assertion(self):
        with pytest.raises(ValidationError):
            parse_program_automaton(HEADER + "trans q0 -> q0: assert(n + 1)\n")

    def test_composite_label_needs_program_mode(self):
        with pytest.raises(ValidationError):
            parse_program_automaton(HEADER + "trans q0 -> q0: n := 1; n := 2\n")

    def test_syntax_error_has_line(self):
        with pytest.raises(ParseError) as info:
            parse_program_automaton(HEADER + "trans q0 -> q0: n := := 1\n")
        assert info.value.line == 4

    def test_unknown_line(self):
        with pytest.raises(ParseError):
            parse_program_automaton(HEADER + "stat q1\n")

    def test_two_initial_states(self):
        with pytest.raises(ValidationError):
            parse_program_automaton(HEADER + "state q1 initial accepting\n")


# ======================== Step semantics ========================

class TestMatchesStep:
    cells = [n, c]

    def test_assignment_reads_previous_values(self):
        s = Assign(n, parse_term("n + c"))
        prev = Assignment({n: 1, c: 2})
        assert matches_step(prev, Assignment({n: 3, c: 2}), s, self.cells)
        assert not matches_step(prev, Assignment({n: 3, c: 5}), s, self.cells)

    def test_assert_keeps_everything(self):
        s = Assert(parse_term("n > 0"))
        assert matches_step(Assignment({n: 1, c: 0}), Assignment({n: 1, c: 0}), s, self.cells)
        assert not matches_step(Assignment({n: 0, c: 0}), Assignment({n: 0, c: 0}), s, self.cells)

    def test_havoc_frees_one_cell(self):
        s = Havoc(n)
        assert matches_step(Assignment({n: 1, c: 0}), Assignment({n: -7, c: 0}), s, self.cells)
        assert not matches_step(Assignment({n: 1, c: 0}), Assignment({n: -7, c: 1}), s, self.cells)

    def test_inputs_are_free(self):
        s = Assert(parse_term("i > 0", inputs={"i"}))
        prev = Assignment({n: 0, i: 1})
        assert matches_step(prev, Assignment({n: 0, i: -4}), s, [n])

    def test_sorts_are_respected(self):
        s = Assign(n, Const(1))
        assert not matches_step(Assignment({n: 0}), Assignment({n: True}), s, [n])

    def test_composite_rejected(self):
        with pytest.raises(ValueError):
            matches_step(Assignment({n: 0}), Assignment({n: 0}), parse_statement("n := 1; n := 2"))


# ======================== Products ========================

class TestCombine:
    def test_statement_order(self):
        positive = PredicateTerm(parse_term("n > 0"))
        update = UpdateTerm(n, parse_term("n + 7"))
        s = combine(Assign(n, Const(42)), {positive, update}, AtomSet((positive,), (update,)), [i])
        assert [str(b) for b in flatten(s)] == [
            "__tmp0 := n + 7",
            "n := 42",
            "i := *",
            "assert(n > 0)",
            "assert(n = __tmp0)",
        ]

    def test_false_atoms_are_negated(self):
        positive = PredicateTerm(parse_term("n > 0"))
        update = UpdateTerm(n, parse_term("n + 7"))
        s = combine(Assert(parse_term("true")), set(), AtomSet((positive,), (update,)), [])
        assert [str(b) for b in flatten(s)][-2:] == ["assert(!(n > 0))", "assert(n != __tmp0)"]


class TestSelfCompose:
    def test_sizes_and_renaming(self, gni):
        composed = self_compose(gni, ["pi", "pi2"])
        assert composed.automaton.num_states == 9
        assert len(composed.automaton.transitions) == 16
        assert composed.cells == frozenset({c.on_trace("pi"), c.on_trace("pi2")})
        assert composed.initial[c.on_trace("pi2")] == 0
        label = composed.automaton.transitions[0]
        assert len(label.provenance.components) == 2
        assert {ident.trace for b in flatten(label.label) for ident in statement_idents(b)} == {"pi", "pi2"}

    def test_requires_all_accepting(self):
        program = parse_program_automaton("mode: program\n" + HEADER + "state q1\ntrans q0 -> q1: n := 1\n")
        with pytest.raises(ValidationError):
            self_compose(program, ["pi"])


class TestLassoAutomaton:
    def test_synchronizes_lengths(self, gni):
        one = Lasso((parse_statement("c := 0"),), (parse_statement("c := 1"),))
        two = Lasso((), (parse_statement("c := 1"), parse_statement("c := 0")))
        product = lasso_automaton(gni, [one, two], ["pi", "pi2"])
        assert product.automaton.num_states == 3
        word = Lasso(
            tuple(t.label for t in product.automaton.transitions[:1]),
            tuple(t.label for t in product.automaton.transitions[1:]),
        )
        assert accepts(product.automaton, word)
        assert str(product.automaton.transitions[0].label) == "c[pi] := 0; c[pi2] := 1"
        assert product.cells == frozenset({Ident("c", CELL, "pi"), Ident("c", CELL, "pi2")})
