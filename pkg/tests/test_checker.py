"""End-to-end tests of the decision procedures on small systems."""

import pytest

from hytslcheck.helpers.checker import (
    NO_VIOLATION,
    NO_WITNESS,
    RESOURCE,
    SATISFIED,
    VIOLATED,
    WITNESS_FOUND,
    CheckOptions,
    check,
    check_existential,
    check_tsl,
    check_universal,
    refute_forall_exists,
    witness_exists_forall,
)
from hytslcheck.helpers.errors import ValidationError
from hytslcheck.helpers.formulas import erase_traces, parse_formula
from hytslcheck.helpers.program import flatten, parse_program_automaton

CONSTANT = """
cells: c
state q0 initial accepting
trans q0 -> q0: c := 0
"""

COUNTDOWN = """
cells: n
state a initial accepting
state b accepting
trans a -> b: n := 0
trans b -> b: n--
"""

HAVOC_COUNTDOWN = """
mode: program
cells: n
state a initial accepting
state b accepting
trans a -> b: n := *
trans b -> b: n := n - 1; assert(n >= 0)
"""


def _statements(lasso):
    return [str(s) for s in flatten(list(lasso.stem) + list(lasso.loop))]


@pytest.fixture
def constant():
    return parse_program_automaton(CONSTANT)


# ======================== TSL ========================

class TestCheckTsl:
    def test_constant_cell(self, constant):
        verdict = check_tsl(constant, parse_formula("G !(c = 1)"))
        assert verdict.outcome == SATISFIED
        assert verdict.exit_code == 0
        assert [name for name, _, _ in verdict.stats] == ["raw", "product", "k-pruned", "cycle-pruned"]

    def test_update_term(self, constant):
        assert check_tsl(constant, parse_formula("G [c <- 0]")).outcome == SATISFIED
        assert check_tsl(constant, parse_formula("F [c <- c + 1]")).outcome == VIOLATED

    def test_invariant_proved_by_windows(self):
        program = parse_program_automaton(COUNTDOWN)
        for cycle_iters in (0, 1):
            verdict = check_tsl(program, parse_formula("G n <= 0"), CheckOptions(k=2, cycle_iters=cycle_iters))
            assert verdict.outcome == SATISFIED

    def test_bounded_loop_needs_cycle_removal(self):
        program = parse_program_automaton(HAVOC_COUNTDOWN)
        verdict = check_tsl(program, parse_formula("false"), CheckOptions(cycle_iters=0))
        assert verdict.outcome == NO_VIOLATION
        assert verdict.exit_code == 0
        assert verdict.notes
        assert check_tsl(program, parse_formula("false"), CheckOptions(cycle_iters=1)).outcome == SATISFIED

    def test_false_is_violated(self, gni):
        verdict = check_tsl(gni, parse_formula("false", {"i"}))
        assert verdict.outcome == VIOLATED
        assert verdict.exit_code == 1
        assert len(verdict.lassos) == 1 and len(verdict.witnesses) == 1

    def test_flag_is_eventually_set(self, three_state):
        verdict = check_tsl(three_state, parse_formula("G !done"))
        assert verdict.outcome == VIOLATED
        statements = _statements(verdict.lassos[0])
        assert statements[0] == "n := 3"
        assert "done := true" in statements

    def test_undeclared_identifier(self, constant):
        with pytest.raises(ValidationError):
            check_tsl(constant, parse_formula("G m = 0"))

    def test_quantified_formula_rejected(self, constant):
        with pytest.raises(ValidationError):
            check_tsl(constant, parse_formula("forall pi. G c[pi] = 0"))


# ======================== Universal and existential ========================

class TestCheckUniversal:
    def test_tautology(self, gni):
        assert check_universal(gni, parse_formula("forall pi. G c[pi] = c[pi]", {"i"})).outcome == SATISFIED

    def test_two_traces_disagree(self, gni):
        verdict = check_universal(gni, parse_formula("forall pi. forall pi2. G c[pi] = c[pi2]", {"i"}))
        assert verdict.outcome == VIOLATED
        assert verdict.traces == ("pi", "pi2")
        assert len(verdict.lassos) == 2

    def test_single_trace_agrees_with_tsl(self, gni):
        formula = parse_formula("forall pi. G c[pi] = 0", {"i"})
        universal = check_universal(gni, formula)
        plain = check_tsl(gni, erase_traces(formula))
        assert universal.outcome == plain.outcome == VIOLATED


class TestCheckExistential:
    @pytest.mark.parametrize("text", ["exists pi. G c[pi] = 0", "exists pi. F c[pi] = 1"])
    def test_witness(self, gni, text):
        verdict = check_existential(gni, parse_formula(text, {"i"}))
        assert verdict.outcome == WITNESS_FOUND
        assert verdict.exit_code == 2
        assert verdict.witnesses

    def test_no_witness(self, gni):
        verdict = check_existential(gni, parse_formula("exists pi. G false", {"i"}))
        assert verdict.outcome == NO_WITNESS
        assert verdict.exit_code == 0


# ======================== Alternation ========================

class TestRefuteForallExists:
    def test_noninterference(self, gni, gni_formula):
        verdict = refute_forall_exists(gni, gni_formula, CheckOptions())
        assert verdict.outcome == VIOLATED
        assert verdict.traces == ("pi",)
        lasso = verdict.lassos[0]
        assert lasso.stem == ()
        assert [str(s) for s in flatten(list(lasso.loop))] == ["assert(i[pi] < 0)", "c[pi] := 0"]
        assert verdict.partner.startswith("confirmed")
        assert [name for name, _, _ in verdict.stats][-2:] == ["projected", "difference"]
        assert any(note.startswith("partner re-evaluation: none of") for note in verdict.notes)

    def test_noninterference_window_and_cycle_bounds(self, gni, gni_formula):
        assert refute_forall_exists(gni, gni_formula, CheckOptions(k=1, cycle_iters=0)).outcome == NO_VIOLATION
        assert refute_forall_exists(gni, gni_formula, CheckOptions(k=2, cycle_iters=0)).outcome == VIOLATED

    def test_counting_loops(self, cyc, cyc_formula):
        verdict = refute_forall_exists(cyc, cyc_formula, CheckOptions(k=1, cycle_iters=1))
        assert verdict.outcome == VIOLATED
        lasso = verdict.lassos[0]
        assert [str(s) for s in lasso.stem][:3] == ["n[pi] := *", "p[pi] := *", "assert(p[pi] = 0)"]
        assert {str(s) for s in lasso.loop} == {"n[pi] := n[pi] - 1"}
        assert verdict.partner.startswith("confirmed")
        assert "partner re-evaluation skipped: the counterexample is a finite prefix" in verdict.notes

    def test_counting_loops_need_cycle_removal(self, cyc, cyc_formula):
        assert refute_forall_exists(cyc, cyc_formula, CheckOptions(k=1, cycle_iters=0)).outcome == NO_VIOLATION

    def test_difference_budget_falls_back_to_lassos(self, gni, gni_formula):
        verdict = refute_forall_exists(gni, gni_formula, CheckOptions(k=2, cycle_iters=0, complement_budget=1))
        assert verdict.outcome == VIOLATED
        assert any("exceeded its budget" in note for note in verdict.notes)

    def test_cycle_budget_is_a_resource_verdict(self, cyc, cyc_formula):
        verdict = refute_forall_exists(cyc, cyc_formula, CheckOptions(k=1, cycle_iters=1, complement_budget=1))
        assert verdict.outcome == RESOURCE
        assert verdict.exit_code == 3

    def test_deterministic(self, gni, gni_formula):
        first = refute_forall_exists(gni, gni_formula, CheckOptions(confirm_partner=False))
        second = refute_forall_exists(gni, gni_formula, CheckOptions(confirm_partner=False))
        assert first.lassos == second.lassos
        assert first.stats == second.stats
        assert first.partner == ""


class TestWitnessExistsForall:
    def test_trivial_body(self, gni):
        formula = parse_formula("exists pi. forall pi2. G c[pi] = c[pi]", {"i"})
        verdict = witness_exists_forall(gni, formula)
        assert verdict.outcome == WITNESS_FOUND
        assert verdict.notes[-1].startswith("searched as a counterexample")


# ======================== Dispatch ========================

class TestDispatch:
    def test_routes_by_prefix(self, gni, gni_formula, constant):
        assert check(constant, parse_formula("G !(c = 1)")).outcome == SATISFIED
        assert check(gni, parse_formula("exists pi. G false", {"i"})).outcome == NO_WITNESS
        assert check(gni, gni_formula).outcome == VIOLATED

    def test_deep_alternation_rejected(self, gni):
        formula = parse_formula("forall pi. exists pi2. forall pi3. G c[pi] = c[pi3]", {"i"})
        with pytest.raises(ValidationError):
            check(gni, formula)

    def test_options_are_validated(self):
        with pytest.raises(ValidationError):
            CheckOptions(k=0)
        with pytest.raises(ValidationError):
            CheckOptions(cycle_iters=-1)
