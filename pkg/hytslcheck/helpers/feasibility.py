"""Feasibility of statement sequences: window encodings, k-infeasibility removal,
ranking-function based cycle removal and the search for feasible lassos."""

import itertools
import logging
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Iterable, Mapping, Sequence

from tqdm import tqdm

from .buchi import (
    DEFAULT_COMPLEMENT_BUDGET,
    DEFAULT_RANK_LIMIT,
    BuchiAutomaton,
    Lasso,
    Transition,
    difference,
    enumerate_lassos,
    enumerate_simple_cycles,
    explore,
    is_empty,
    trim,
)
from .errors import SolverError, ValidationError
from .program import TMP_PREFIX, Assert, Assign, Havoc, ProgramAutomaton, Statement, flatten, matches_step
from .terms import (
    INT,
    TRUE,
    Apply,
    Assignment,
    Computation,
    Const,
    Ident,
    Term,
    Var,
    conjunction,
    equals,
    ident_key,
    negation,
    print_term,
    substitute,
)

logger = logging.getLogger("hytslcheck.feasibility")

FEASIBLE = "proved-feasible"
INFEASIBLE = "proved-infeasible"
UNKNOWN = "unknown"

DEFAULT_COEFFICIENT_BOUND = 3
DEFAULT_RANKING_VARIABLES = 3


@dataclass(frozen=True)
class Frame:
    """Variable declarations an encoding needs, without the automaton."""

    cells: tuple[Ident, ...]
    idents: tuple[Ident, ...]
    sorts: Mapping[str, str] = field(default_factory=dict)
    initial: Assignment = field(default_factory=Assignment)

    @classmethod
    def of(cls, program: ProgramAutomaton) -> "Frame":
        return cls(
            tuple(sorted(program.cells, key=ident_key)),
            tuple(sorted(program.idents, key=ident_key)),
            dict(program.sorts),
            program.initial,
        )

    def sort_of(self, ident: Ident) -> str:
        return self.sorts.get(ident.name, INT)


@dataclass(frozen=True)
class StepConstraint:
    """Constraint over ``x@t`` for every identifier ``x`` and step ``-1 <= t < steps``."""

    variables: dict
    clauses: tuple
    steps: int


@dataclass(frozen=True)
class RankingFunction:
    """``sum(c * x) + constant`` over integer cells."""

    coefficients: tuple[tuple[Ident, int], ...]
    constant: int = 0

    def term(self, at=None) -> Term:
        at = at or Var
        total: Term = Const(self.constant)
        first = True
        for ident, c in self.coefficients:
            part = at(ident) if abs(c) == 1 else Apply("*", (Const(abs(c)), at(ident)))
            if first and self.constant == 0:
                total = part if c > 0 else Apply("neg", (part,))
            else:
                total = Apply("+" if c > 0 else "-", (total, part))
            first = False
        return total

    def __str__(self) -> str:
        return print_term(self.term())


@dataclass(frozen=True)
class FeasibilityVerdict:
    status: str
    lasso: Lasso | None = None
    witness: Computation | None = None
    reason: str = ""
    ranking: RankingFunction | None = None
    bound: int | None = None
    statements: tuple = ()
    blocks: tuple[tuple[int, ...], tuple[int, ...]] = ((), ())

    @property
    def feasible(self) -> bool:
        return self.status == FEASIBLE

    @property
    def infeasible(self) -> bool:
        return self.status == INFEASIBLE


def _at(ident: Ident, step: int) -> Var:
    return Var(Ident(ident.at(step)))


def _shift(term: Term, step: int) -> Term:
    return substitute(term, lambda ident: _at(ident, step))


def _step_clauses(s: Statement, t: int, frame: Frame) -> list[Term]:
    match s:
        case Assert(predicate):
            clauses, written = [_shift(predicate, t - 1)], None
        case Assign(target, source):
            clauses, written = [equals(_at(target, t), _shift(source, t - 1))], target
        case Havoc(target):
            clauses, written = [], target
        case _:
            raise ValueError(f"not a basic statement: {s}")
    clauses += [equals(_at(c, t), _at(c, t - 1)) for c in frame.cells if c != written]
    return clauses


def encode_window(
    statements: Iterable[Statement],
    frame: Frame,
    free_init: bool = True,
) -> StepConstraint:
    """Constraint whose models are exactly the computations matching ``statements``.

    With ``free_init`` the values before the first step are unconstrained, otherwise
    they are pinned to the frame's initial assignment.
    """
    basics = flatten(list(statements))
    variables = {
        ident.at(t): frame.sort_of(ident) for t in range(-1, len(basics)) for ident in frame.idents
    }
    clauses: list[Term] = []
    if not free_init:
        for ident in frame.idents:
            if ident in frame.initial:
                clauses.append(equals(_at(ident, -1), Const(frame.initial[ident])))
    for t, s in enumerate(basics):
        clauses += _step_clauses(s, t, frame)
    return StepConstraint(variables, tuple(clauses), len(basics))


def decode(model: Mapping[str, object], frame: Frame, steps: int) -> list[Assignment]:
    """Assignments for steps ``-1 .. steps-1`` read off a model."""
    return [
        Assignment({ident: model[ident.at(t)] for ident in frame.idents}) for t in range(-1, steps)
    ]


def k_window_feasible(window: Sequence[Statement], frame: Frame, solver) -> bool:
    """False only when the window is unsatisfiable from every initial assignment."""
    constraint = encode_window(window, frame)
    try:
        result = solver.check(constraint.variables, constraint.clauses)
    except SolverError as exc:
        logger.warning("window check failed, keeping the window: %s", exc)
        return True
    if result.status == UNKNOWN:
        logger.warning("window check unknown (%s), keeping the window", result.reason)
    return not result.unsat


def remove_k_infeasibility(
    program: ProgramAutomaton,
    k: int,
    solver,
    anchored: bool = False,
) -> ProgramAutomaton:
    """Automaton accepting exactly the traces of ``program`` whose k-windows are all feasible.

    A state remembers the last ``k - 1`` transitions; a transition is kept when the
    window it completes is feasible. With ``anchored`` the windows that start at time
    0 are checked from the pinned initial assignment instead of a free one.
    """
    if k < 1:
        raise ValidationError(f"window size must be at least 1, got {k}")
    automaton = program.automaton
    frame = Frame.of(program)
    cache: dict[tuple, bool] = {}

    def feasible(window: tuple[Transition, ...], pinned: bool) -> bool:
        key = (tuple(t.label for t in window), pinned)
        if key not in cache:
            if pinned:
                constraint = encode_window(key[0], frame, free_init=False)
                try:
                    cache[key] = not solver.check(constraint.variables, constraint.clauses).unsat
                except SolverError as exc:
                    logger.warning("anchored window check failed, keeping the window: %s", exc)
                    cache[key] = True
            else:
                cache[key] = k_window_feasible(key[0], frame, solver)
            logger.debug("window %s: %s", "; ".join(map(str, key[0])), cache[key])
        return cache[key]

    def successors(key):
        q, window, from_start = key
        for t in automaton.outgoing(q):
            extended = window + (t,)
            if from_start:
                if not feasible(extended, True):
                    continue
            elif len(extended) == k and not feasible(extended, False):
                continue
            kept = extended[-(k - 1):] if k > 1 else ()
            yield t.label, (t.target, kept, from_start and len(extended) < k), t.provenance

    def name(key) -> str:
        q, window, _ = key
        if not window:
            return automaton.name(q)
        return f"{automaton.name(q)}<{','.join(automaton.name(t.source) for t in window)}>"

    pruned = trim(
        explore(
            (automaton.initial, (), anchored),
            successors,
            lambda key: key[0] in automaton.accepting,
            name,
        )
    )
    logger.info(
        "k=%d pruning: %d -> %d states, %d windows checked, %d infeasible",
        k,
        automaton.num_states,
        pruned.num_states,
        len(cache),
        sum(1 for ok in cache.values() if not ok),
    )
    return program.with_automaton(pruned)


def _ranking_candidates(basics: Sequence[Statement], frame: Frame, coefficient_bound: int, max_variables: int):
    assigned = sorted(
        {
            s.target
            for s in basics
            if isinstance(s, (Assign, Havoc))
            and frame.sort_of(s.target) == INT
            and not s.target.name.startswith(TMP_PREFIX)
        },
        key=ident_key,
    )
    values = [c for c in range(-coefficient_bound, coefficient_bound + 1) if c != 0]
    candidates = []
    for size in range(1, min(max_variables, len(assigned)) + 1):
        for chosen in itertools.combinations(assigned, size):
            for coefficients in itertools.product(values, repeat=size):
                candidates.append(RankingFunction(tuple(zip(chosen, coefficients))))
    candidates.sort(key=lambda f: (sum(abs(c) for _, c in f.coefficients), len(f.coefficients)))
    return candidates


def ranking_holds(ranking: RankingFunction, basics: Sequence[Statement], frame: Frame, solver) -> bool:
    """Whether one iteration of ``basics`` decreases ``ranking`` by at least one from a non-negative value."""
    constraint = encode_window(basics, frame)
    end = constraint.steps - 1
    before = ranking.term(lambda ident: _at(ident, -1))
    after = ranking.term(lambda ident: _at(ident, end))
    decreasing = Apply(">=", (Apply("-", (before, after)), Const(1)))
    bounded = Apply(">=", (before, Const(0)))
    clauses = constraint.clauses + (negation(conjunction([decreasing, bounded])),)
    return solver.check(constraint.variables, clauses).unsat


def cycle_infeasible(
    cycle: Sequence[Transition],
    frame: Frame,
    solver,
    coefficient_bound: int = DEFAULT_COEFFICIENT_BOUND,
    max_variables: int = DEFAULT_RANKING_VARIABLES,
) -> FeasibilityVerdict:
    """Prove that the cycle cannot repeat forever: locally, or by an affine ranking function."""
    basics = tuple(flatten([t.label for t in cycle]))
    constraint = encode_window(basics, frame)
    try:
        local = solver.check(constraint.variables, constraint.clauses)
        if local.unsat:
            return FeasibilityVerdict(INFEASIBLE, reason="one iteration is unsatisfiable", statements=basics)
        if local.status == UNKNOWN:
            return FeasibilityVerdict(UNKNOWN, reason=f"solver: {local.reason}", statements=basics)
        for ranking in _ranking_candidates(basics, frame, coefficient_bound, max_variables):
            if ranking_holds(ranking, basics, frame, solver):
                return FeasibilityVerdict(
                    INFEASIBLE, reason=f"ranking function {ranking}", ranking=ranking, statements=basics
                )
    except SolverError as exc:
        logger.warning("cycle check failed: %s", exc)
        return FeasibilityVerdict(UNKNOWN, reason=str(exc), statements=basics)
    return FeasibilityVerdict(UNKNOWN, reason="no ranking function found", statements=basics)


def cycle_automaton(cycle: Sequence[Statement], alphabet: Iterable[Statement]) -> BuchiAutomaton:
    """Automaton for every word that ends with ``cycle`` repeated forever."""
    n = len(cycle)
    if n == 0:
        raise ValidationError("cycle automaton needs a nonempty cycle")
    transitions = [Transition(0, letter, 0) for letter in alphabet]
    for j, label in enumerate(cycle, start=1):
        transitions.append(Transition(j, label, j % n + 1))
    transitions.append(Transition(0, cycle[0], 2 if n > 1 else 1))
    return BuchiAutomaton(n + 1, 0, transitions, range(1, n + 1), ["*"] + [f"c{j}" for j in range(1, n + 1)])


def _check_cycle(args) -> FeasibilityVerdict:
    cycle, frame, solver, coefficient_bound = args
    return cycle_infeasible(cycle, frame, solver, coefficient_bound)


def _accepting_cycles(automaton: BuchiAutomaton) -> list[tuple[Transition, ...]]:
    seen = set()
    cycles = []
    for cycle in enumerate_simple_cycles(automaton):
        if not any(t.source in automaton.accepting for t in cycle):
            continue
        labels = tuple(t.label for t in cycle)
        if labels in seen:
            continue
        seen.add(labels)
        cycles.append(cycle)
    return cycles


def remove_infeasible_cycles(
    program: ProgramAutomaton,
    iterations: int,
    solver,
    budget: int = DEFAULT_COMPLEMENT_BUDGET,
    rank_limit: int = DEFAULT_RANK_LIMIT,
    coefficient_bound: int = DEFAULT_COEFFICIENT_BOUND,
    jobs: int = 1,
    progress: bool = False,
) -> ProgramAutomaton:
    """Subtract the automaton of every proved-infeasible accepting cycle, ``iterations`` times."""
    if iterations < 0:
        raise ValidationError(f"cycle iterations must be non-negative, got {iterations}")
    frame = Frame.of(program)
    automaton = program.automaton
    for round_number in range(1, iterations + 1):
        cycles = []
        for cycle in _accepting_cycles(automaton):
            if len(cycle) >= rank_limit:
                logger.warning("skipping a cycle of length %d, too long to subtract", len(cycle))
                continue
            cycles.append(cycle)
        tasks = [(cycle, frame, solver, coefficient_bound) for cycle in cycles]
        if jobs > 1 and len(tasks) > 1:
            with Pool(jobs) as pool:
                verdicts = list(
                    tqdm(
                        pool.imap(_check_cycle, tasks),
                        total=len(tasks),
                        desc=f"Checking cycles ({round_number})",
                        disable=not progress,
                    )
                )
        else:
            verdicts = [
                _check_cycle(task)
                for task in tqdm(tasks, desc=f"Checking cycles ({round_number})", disable=not progress)
            ]
        infeasible = [(cycle, v) for cycle, v in zip(cycles, verdicts) if v.infeasible]
        for cycle, verdict in zip(cycles, verdicts):
            logger.debug("cycle %s: %s (%s)", " ".join(str(t.label) for t in cycle), verdict.status, verdict.reason)
        logger.info(
            "cycle round %d: %d accepting cycles, %d proved infeasible", round_number, len(cycles), len(infeasible)
        )
        if not infeasible:
            break
        for cycle, _ in infeasible:
            removed = cycle_automaton([t.label for t in cycle], automaton.alphabet)
            automaton = trim(difference(automaton, removed, budget, rank_limit))
    return program.with_automaton(automaton)


def matches_lasso(computation: Computation, word: Lasso, frame: Frame) -> bool:
    if computation.periodic:
        horizon = len(computation.stem) + 2 * len(computation.loop)
    else:
        horizon = len(computation.stem)
    cells = frame.cells
    for t in range(horizon):
        if not matches_step(computation.at(t - 1), computation.at(t), word.letter(t), cells):
            return False
    pinned = [ident for ident in frame.idents if ident in frame.initial]
    return computation.initial.restrict(pinned) == frame.initial.restrict(pinned)


def block_computation(verdict: FeasibilityVerdict) -> Computation:
    """Computation with one assignment per transition: the state after its last basic statement."""
    witness = verdict.witness
    stem_blocks, loop_blocks = verdict.blocks
    ends = list(itertools.accumulate(stem_blocks))
    if witness.periodic:
        offset = ends[-1] if ends else 0
        loop_ends = [offset + e for e in itertools.accumulate(loop_blocks)]
        return Computation(
            witness.initial,
            tuple(witness.at(e - 1) for e in ends),
            tuple(witness.at(e - 1) for e in loop_ends),
        )
    offset = ends[-1] if ends else 0
    repeated = list(loop_blocks) * 2
    ends += [offset + e for e in itertools.accumulate(repeated)]
    return Computation(witness.initial, tuple(witness.at(e - 1) for e in ends))


def lasso_feasibility(program: ProgramAutomaton, lasso: Lasso, solver) -> FeasibilityVerdict:
    """Decide one lasso: the stem from the pinned initial state, then an assert-free or
    stationary loop."""
    frame = Frame.of(program)
    stem = tuple(flatten(list(lasso.stem)))
    loop = tuple(flatten(list(lasso.loop)))
    blocks = (
        tuple(len(flatten(s)) for s in lasso.stem),
        tuple(len(flatten(s)) for s in lasso.loop),
    )
    word = Lasso(stem, loop)

    def verdict(status: str, **kwargs) -> FeasibilityVerdict:
        return FeasibilityVerdict(status, lasso=lasso, statements=stem + loop, blocks=blocks, **kwargs)

    try:
        once = encode_window(stem + loop, frame, free_init=False)
        first = solver.check(once.variables, once.clauses)
        if first.unsat:
            return verdict(INFEASIBLE, reason="stem and first iteration are unsatisfiable")
        if first.status == UNKNOWN:
            return verdict(UNKNOWN, reason=f"solver: {first.reason}")

        if not any(isinstance(s, Assert) and s.predicate != TRUE for s in loop):
            twice = encode_window(stem + loop + loop, frame, free_init=False)
            result = solver.check(twice.variables, twice.clauses)
            if result.sat:
                steps = decode(result.model, frame, twice.steps)
                witness = Computation(steps[0], tuple(steps[1:]))
                if matches_lasso(witness, word, frame):
                    return verdict(FEASIBLE, witness=witness, reason="assert-free loop")

        start, end = len(stem) - 1, len(stem) + len(loop) - 1
        stationary = once.clauses + tuple(
            equals(_at(ident, start), _at(ident, end)) for ident in frame.idents
        )
        result = solver.check(once.variables, stationary)
        if result.sat:
            steps = decode(result.model, frame, once.steps)
            witness = Computation(
                steps[0], tuple(steps[1 : len(stem) + 1]), tuple(steps[len(stem) + 1 :])
            )
            if matches_lasso(witness, word, frame):
                return verdict(FEASIBLE, witness=witness, reason="stationary loop")
            logger.warning("discarding a witness that does not match its lasso: %s", lasso)
    except SolverError as exc:
        logger.warning("lasso check failed: %s", exc)
        return verdict(UNKNOWN, reason=str(exc))
    return verdict(UNKNOWN, reason="loop neither assert-free nor stationary")


def find_feasible_lasso(
    program: ProgramAutomaton,
    stem_bound: int,
    solver,
    loop_bound: int | None = None,
    max_lassos: int = 5000,
) -> FeasibilityVerdict:
    """First lasso of the automaton proved feasible, searched in order of total length."""
    automaton = program.automaton
    first = is_empty(automaton)
    if first is None:
        return FeasibilityVerdict(INFEASIBLE, reason="empty language")
    seen = set()
    checked = 0
    for lasso in itertools.chain([first], enumerate_lassos(automaton, stem_bound, loop_bound)):
        key = (lasso.stem, lasso.loop)
        if key in seen:
            continue
        seen.add(key)
        checked += 1
        if checked > max_lassos:
            break
        result = lasso_feasibility(program, lasso, solver)
        logger.debug("lasso %s: %s (%s)", lasso, result.status, result.reason)
        if result.feasible:
            logger.info("feasible lasso after %d candidates: %s", checked, lasso)
            return result
    logger.info("no feasible lasso among %d candidates (stem bound %d)", len(seen), stem_bound)
    return FeasibilityVerdict(
        UNKNOWN, reason=f"no lasso proved feasible within stem bound {stem_bound}", bound=stem_bound
    )


def validate(verdict: FeasibilityVerdict, frame: Frame, solver) -> bool:
    """Re-check a verdict with fresh queries."""
    if verdict.feasible:
        stem_length = sum(verdict.blocks[0])
        word = Lasso(verdict.statements[:stem_length], verdict.statements[stem_length:])
        return verdict.witness is not None and matches_lasso(verdict.witness, word, frame)
    if verdict.infeasible and verdict.ranking is not None:
        return ranking_holds(verdict.ranking, verdict.statements, frame, solver)
    if verdict.infeasible and verdict.statements:
        constraint = encode_window(verdict.statements, frame, free_init=verdict.lasso is None)
        return solver.check(constraint.variables, constraint.clauses).unsat
    return True
