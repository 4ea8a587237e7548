import sys

import pytest

from hytslcheck.helpers.errors import SolverError
from hytslcheck.helpers.grammar import parse_term
from hytslcheck.helpers.solvers import (
    SAT,
    UNKNOWN,
    UNSAT,
    BoundedSolver,
    SmtLibSolver,
    Z3Solver,
    make_solver,
    parse_smtlib_answer,
    smtlib_script,
    smtlib_term,
)
from hytslcheck.helpers.terms import Apply, Const, Ident, Var

VARIABLES = {"x": "int", "y": "int", "b": "bool"}


def _clauses(*texts):
    return [parse_term(text) for text in texts]


class TestSmtLib:
    def test_term(self):
        assert smtlib_term(parse_term("!(x != -3) && b")) == "(and (not (distinct |x| (- 3))) |b|)"
        assert smtlib_term(parse_term("2 * x - y <= 0")) == "(<= (- (* 2 |x|) |y|) 0)"

    def test_script(self):
        script = smtlib_script(VARIABLES, _clauses("x < y"))
        lines = script.splitlines()
        assert lines[0] == "(set-logic QF_LIA)"
        assert "(declare-const |b| Bool)" in lines
        assert "(declare-const |x| Int)" in lines
        assert "(assert (< |x| |y|))" in lines
        assert lines[-3:] == ["(check-sat)", "(get-model)", "(exit)"]

    def test_parse_model(self):
        output = """sat
(model
  (define-fun |x| () Int (- 3))
  (define-fun y () Int 4)
  (define-fun |b| () Bool true)
)
"""
        result = parse_smtlib_answer(output, VARIABLES)
        assert result.status == SAT
        assert result.model == {"x": -3, "y": 4, "b": True}

    def test_parse_model_without_wrapper(self):
        result = parse_smtlib_answer("sat\n((define-fun x () Int 7))\n", {"x": "int", "y": "int"})
        assert result.model == {"x": 7, "y": 0}

    def test_parse_unsat(self):
        result = parse_smtlib_answer("unsat\n(error \"model is not available\")\n", VARIABLES)
        assert result.unsat

    def test_parse_garbage(self):
        with pytest.raises(SolverError):
            parse_smtlib_answer("segmentation fault", VARIABLES)
        with pytest.raises(SolverError):
            parse_smtlib_answer("sat\n((define-fun x () Int 1)", VARIABLES)

    @pytest.mark.skipif(sys.platform == "win32", reason="needs a POSIX shell")
    def test_external_command(self):
        answer = "cat > /dev/null; echo sat; echo '((define-fun x () Int (- 2)))'"
        solver = SmtLibSolver(("sh", "-c", answer))
        result = solver.check({"x": "int"}, _clauses("x < 0"))
        assert result.sat and result.model == {"x": -2}

    def test_missing_command(self):
        with pytest.raises(SolverError):
            SmtLibSolver(("hytslcheck-no-such-solver",)).check({"x": "int"}, _clauses("x < 0"))


@pytest.fixture(params=["z3", "builtin"])
def solver(request):
    return make_solver(request.param, timeout=5.0, value_bound=8)


class TestBackends:
    def test_sat_model_satisfies(self, solver):
        result = solver.check(VARIABLES, _clauses("x + y = 5", "x > 2", "b || x > 10"))
        assert result.sat
        assert result.model["x"] + result.model["y"] == 5
        assert result.model["x"] > 2
        assert result.model["b"] or result.model["x"] > 10

    def test_unsat(self, solver):
        assert solver.check({"x": "int"}, _clauses("x > 0", "x < 0")).status == UNSAT

    def test_ground_clauses(self, solver):
        assert solver.check({}, _clauses("1 < 2")).sat
        assert solver.check({}, _clauses("false")).unsat

    def test_step_chain(self, solver):
        def at(step):
            return Var(Ident(f"n@{step}"))

        variables = {"n@-1": "int", "n@0": "int", "n@1": "int"}
        clauses = [
            Apply("=", (at(0), Apply("-", (at(-1), Const(1))))),
            Apply("=", (at(1), Apply("-", (at(0), Const(1))))),
            Apply("=", (at(-1), Const(2))),
        ]
        result = solver.check(variables, clauses)
        assert result.sat and result.model["n@1"] == 0


class TestBoundedSolver:
    def test_bound_limits_search(self):
        assert BoundedSolver(bound=3).check({"x": "int"}, _clauses("x > 5")).unsat
        assert BoundedSolver(bound=6).check({"x": "int"}, _clauses("x > 5")).sat

    def test_definitions_leave_the_range(self):
        result = BoundedSolver(bound=1).check({"x": "int", "y": "int"}, _clauses("x = 1", "y = x + 100"))
        assert result.sat and result.model["y"] == 101

    def test_node_limit(self):
        solver = BoundedSolver(bound=10, node_limit=50)
        variables = {"x": "int", "y": "int", "z": "int"}
        result = solver.check(variables, _clauses("x + y + z = 100"))
        assert result.status == UNKNOWN


class TestMakeSolver:
    def test_kinds(self):
        assert isinstance(make_solver("z3"), Z3Solver)
        assert make_solver("builtin", value_bound=4) == BoundedSolver(4)
        assert make_solver("z3", command=["cvc5", "--lang", "smt2"]) == SmtLibSolver(("cvc5", "--lang", "smt2"))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            make_solver("yices")
