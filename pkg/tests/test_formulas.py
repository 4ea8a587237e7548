"""Tests for formula parsing, atoms, skeletons and the TSL evaluator."""

import random

import pytest

from hytslcheck.helpers.errors import NonPrenexError, ParseError, SortMismatch, ValidationError
from hytslcheck.helpers.formulas import (
    EXISTS,
    FORALL,
    And,
    Formula,
    Next,
    Not,
    Until,
    atoms,
    check_sorts,
    default_sort_of,
    erase_traces,
    eval_hypertsl,
    eval_tsl,
    ltl_skeleton,
    negate,
    parse_formula,
    seq_of,
)
from hytslcheck.helpers.grammar import parse_term
from hytslcheck.helpers.ltl2buchi import eval_ltl, to_valuations
from hytslcheck.helpers.terms import BOOL, CELL, Assignment, Computation, Const, Ident, PredicateTerm, UpdateTerm

n, m = Ident("n"), Ident("m")


def _computation(initial, stem, loop):
    def a(n_value, m_value):
        return Assignment({n: n_value, m: m_value})

    return Computation(a(*initial), tuple(a(*s) for s in stem), tuple(a(*s) for s in loop))


class TestParsing:
    def test_prefix_and_core(self):
        f = parse_formula("forall pi. exists pi2. G (i[pi2] = 0 && c[pi] = c[pi2])", inputs={"i"})
        assert f.prefix == ((FORALL, "pi"), (EXISTS, "pi2"))
        assert f.blocks() == [(FORALL, ("pi",)), (EXISTS, ("pi2",))]
        (atom,) = atoms(f)
        assert str(atom) == "i[pi2] = 0 && c[pi] = c[pi2]"

    def test_quantifier_below_operator(self):
        with pytest.raises(NonPrenexError):
            parse_formula("G forall pi. n[pi] > 0")

    def test_duplicate_trace_variable(self):
        with pytest.raises(ValidationError):
            parse_formula("forall pi. forall pi. n[pi] > 0")

    def test_unquantified_trace(self):
        with pytest.raises(ValidationError):
            parse_formula("forall pi. n[pi] = n[pi3]")

    def test_untraced_identifier_in_hyper_formula(self):
        with pytest.raises(ValidationError):
            parse_formula("forall pi. n[pi] = m")

    def test_update_term(self):
        f = parse_formula("G [n <- n + 1]")
        (atom,) = atoms(f)
        assert isinstance(atom, UpdateTerm)
        assert str(atom) == "[n <- n + 1]"

    def test_update_of_input_rejected(self):
        with pytest.raises(ValidationError):
            parse_formula("[i <- 0]", inputs={"i"})

    def test_arithmetic_as_formula_rejected(self):
        with pytest.raises(ParseError):
            parse_formula("F (n + 1)")

    def test_derived_operators(self):
        f = parse_formula("F n > 0")
        assert isinstance(f.core, Until)
        g = parse_formula("G n > 0")
        assert isinstance(g.core, Not) and isinstance(g.core.operand, Until)

    def test_negate(self):
        f = parse_formula("forall pi. exists pi2. G n[pi] < n[pi2]")
        dual = negate(f)
        assert dual.quantifiers == (EXISTS, FORALL)
        assert isinstance(f.core, Not)
        assert dual.core == f.core.operand

    def test_erase_traces(self):
        f = erase_traces(parse_formula("forall pi. G n[pi] > 0"))
        assert not f.prefix
        assert str(parse_formula("G n > 0")) == str(f)


class TestAtoms:
    def test_constants_are_not_atoms(self):
        f = parse_formula("G (true U n > 0) && X false")
        assert [str(a) for a in atoms(f)] == ["n > 0"]
        skeleton, atom_map = ltl_skeleton(f)
        assert list(atom_map) == ["a0"]
        assert "true" in str(skeleton) and "false" in str(skeleton)

    def test_sorts(self):
        f = parse_formula("G [b <- n > 0]")
        check_sorts(f, default_sort_of({"b": BOOL}))
        with pytest.raises(SortMismatch):
            check_sorts(f, default_sort_of({}))


class TestEvalTsl:
    def test_update_term_reads_previous_step(self):
        f = parse_formula("G [n <- n + 1]")
        counting = _computation((0, 0), [(1, 0)], [(2, 0), (3, 0)])
        assert not eval_tsl(f, counting)
        assert eval_tsl(parse_formula("[n <- n + 1] && X [n <- n + 1]"), counting)

    def test_until_on_loop(self):
        comp = _computation((0, 0), [], [(1, 0), (-1, 0)])
        assert eval_tsl(parse_formula("G F n < 0"), comp)
        assert not eval_tsl(parse_formula("F G n < 0"), comp)
        assert eval_tsl(parse_formula("n > 0 U n < 0"), comp)

    def test_finite_computation_rejected(self):
        with pytest.raises(ValueError):
            eval_tsl(parse_formula("n > 0"), _computation((0, 0), [(1, 0)], []))

    def test_hyper_evaluation(self):
        up = _computation((0, 0), [], [(1, 0)])
        down = _computation((0, 0), [], [(-1, 0)])
        f = parse_formula("forall pi. exists pi2. G n[pi] != n[pi2]")
        assert eval_hypertsl(f, [up, down])
        assert not eval_hypertsl(f, [up])
        g = parse_formula("exists pi. forall pi2. G n[pi] <= n[pi2]")
        assert eval_hypertsl(g, [up, down])

    def test_hypertsl_with_bound_trace(self):
        up = _computation((0, 0), [], [(1, 0)])
        down = _computation((0, 0), [], [(-1, 0)])
        f = parse_formula("forall pi. exists pi2. G n[pi] != n[pi2]")
        body = Formula(f.prefix[1:], f.core)
        assert eval_hypertsl(body, [down], [("pi", up)])
        assert not eval_hypertsl(body, [up], [("pi", up)])
        assert not eval_hypertsl(body, [], [("pi", up)])


PREDICATES = [parse_term(text) for text in ("n > 0", "n = m", "m <= n - 1", "n + m = 0")]
UPDATES = [UpdateTerm(n, parse_term(text)) for text in ("n + 1", "m", "0")] + [UpdateTerm(m, parse_term("n"))]


def _random_formula(rng: random.Random, size: int):
    if size <= 1:
        choice = rng.random()
        if choice < 0.5:
            return PredicateTerm(rng.choice(PREDICATES))
        if choice < 0.9:
            return rng.choice(UPDATES)
        return PredicateTerm(Const(rng.random() < 0.5))
    kind = rng.choice(["not", "next", "and", "until"])
    if kind == "not":
        return Not(_random_formula(rng, size - 1))
    if kind == "next":
        return Next(_random_formula(rng, size - 1))
    left = rng.randint(1, size - 2) if size > 2 else 1
    right = max(size - 1 - left, 1)
    cls = And if kind == "and" else Until
    return cls(_random_formula(rng, left), _random_formula(rng, right))


def _random_computation(rng: random.Random):
    def assignment():
        return Assignment({n: rng.randint(-2, 2), m: rng.randint(-2, 2)})

    return Computation(
        assignment(),
        tuple(assignment() for _ in range(rng.randint(0, 3))),
        tuple(assignment() for _ in range(rng.randint(1, 3))),
    )


class TestSkeletonAgreement:
    def test_eval_tsl_matches_ltl_on_atom_sequence(self):
        rng = random.Random(2024)
        for _ in range(500):
            f = _random_formula(rng, rng.randint(1, 6))
            comp = _random_computation(rng)
            skeleton, atom_map = ltl_skeleton(f)
            word = to_valuations(seq_of(comp, atoms(f)), atom_map)
            for t in range(len(comp.stem) + 2 * len(comp.loop) + 1):
                assert eval_tsl(f, comp, t) == eval_ltl(skeleton, word, t), (f, comp, t)

    def test_skeleton_is_structural(self):
        f = parse_formula("(n > 0 U [n <- 0]) && X n > 0")
        skeleton, atom_map = ltl_skeleton(f)
        assert {str(a) for a in atom_map.values()} == {"n > 0", "[n <- 0]"}
        assert isinstance(skeleton, And)
        assert isinstance(skeleton.right, Next)


class TestIdentKinds:
    def test_cells_by_default(self):
        f = parse_formula("G c > 0")
        (atom,) = atoms(f)
        assert atom.term.args[0].ident.kind == CELL
