"""Decision procedures for TSL and HyperTSL formulas over program automata."""

import functools
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .buchi import (
    DEFAULT_COMPLEMENT_BUDGET,
    DEFAULT_RANK_LIMIT,
    BuchiAutomaton,
    Lasso,
    accepts,
    difference,
    enumerate_lassos,
    is_empty,
    trim,
    universal_projection,
)
from .errors import BudgetExceeded, MissingProvenance, SolverError, ValidationError
from .feasibility import (
    UNKNOWN,
    Frame,
    FeasibilityVerdict,
    block_computation,
    find_feasible_lasso,
    lasso_feasibility,
    matches_lasso,
    remove_infeasible_cycles,
    remove_k_infeasibility,
)
from .formulas import (
    EXISTS,
    FORALL,
    Formula,
    check_sorts,
    eval_hypertsl,
    eval_tsl,
    iter_atoms,
    ltl_skeleton,
    negate,
    negated,
)
from .ltl2buchi import translate
from .program import ProgramAutomaton, combined_product, is_basic, lasso_automaton, on_traces, self_compose, sequence
from .solvers import Z3Solver
from .terms import Computation, PredicateTerm, variables

logger = logging.getLogger("hytslcheck.checker")

SATISFIED = "satisfied"
VIOLATED = "violated"
WITNESS_FOUND = "witness-found"
NO_VIOLATION = "no-violation-found"
NO_WITNESS = "no-witness-found"
RESOURCE = "resource-exceeded"

EXIT_CODES = {
    SATISFIED: 0,
    NO_VIOLATION: 0,
    NO_WITNESS: 0,
    VIOLATED: 1,
    WITNESS_FOUND: 2,
    RESOURCE: 3,
}

STAGES = ("raw", "self-composed", "product", "k-pruned", "cycle-pruned", "projected", "difference")


@dataclass(frozen=True)
class CheckOptions:
    k: int = 1
    cycle_iters: int = 1
    stem_bound: int = 8
    loop_bound: int | None = None
    max_lassos: int = 5000
    complement_budget: int = DEFAULT_COMPLEMENT_BUDGET
    rank_limit: int = DEFAULT_RANK_LIMIT
    coefficient_bound: int = 3
    partner_bound: int = 4
    confirm_partner: bool = True
    prune: bool = True
    jobs: int = 1
    progress: bool = False
    solver: object = field(default_factory=Z3Solver)
    on_stage: Callable[[str, BuchiAutomaton], None] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"k must be at least 1, got {self.k}")
        if self.cycle_iters < 0:
            raise ValidationError(f"cycle iterations must be non-negative, got {self.cycle_iters}")
        if self.stem_bound < 0 or self.partner_bound < 1:
            raise ValidationError("search bounds must be positive")


@dataclass(frozen=True)
class Verdict:
    """Outcome of a check with everything the report shows."""

    outcome: str
    formula: str
    traces: tuple[str, ...] = ()
    lassos: tuple[Lasso, ...] = ()
    witnesses: tuple[Computation, ...] = ()
    notes: tuple[str, ...] = ()
    stats: tuple[tuple[str, int, int], ...] = ()
    bounds: tuple[tuple[str, object], ...] = ()
    partner: str = ""

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.outcome]


class _Run:
    """Collects stage sizes and notes while a pipeline runs."""

    def __init__(self, formula: Formula, opts: CheckOptions):
        self.formula = str(formula)
        self.opts = opts
        self.stats: list[tuple[str, int, int]] = []
        self.notes: list[str] = []

    def stage(self, name: str, automaton: BuchiAutomaton) -> None:
        self.stats.append((name, automaton.num_states, len(automaton.transitions)))
        logger.info("stage %s: %d states, %d transitions", name, automaton.num_states, len(automaton.transitions))
        if self.opts.on_stage is not None:
            self.opts.on_stage(name, automaton)

    def verdict(self, outcome: str, **kwargs) -> Verdict:
        opts = self.opts
        bounds = (
            ("k", opts.k),
            ("cycle_iters", opts.cycle_iters),
            ("stem_bound", opts.stem_bound),
            ("solver", getattr(opts.solver, "name", type(opts.solver).__name__)),
        )
        logger.info("verdict for %s: %s", self.formula, outcome)
        return Verdict(
            outcome,
            self.formula,
            notes=tuple(self.notes),
            stats=tuple(self.stats),
            bounds=bounds,
            **kwargs,
        )


def _resource_guard(fn):
    @functools.wraps(fn)
    def wrapper(program, formula, opts=None, *args, **kwargs):
        opts = opts or CheckOptions()
        try:
            return fn(program, formula, opts, *args, **kwargs)
        except (BudgetExceeded, SolverError) as exc:
            logger.warning("%s gave up: %s", fn.__name__, exc)
            return Verdict(RESOURCE, str(formula), notes=(str(exc),))

    return wrapper


def check_declared(program: ProgramAutomaton, formula: Formula) -> None:
    """Every identifier of the formula must be declared by the program, with a fitting sort."""
    declared = {ident.name for ident in program.idents}
    for atom in iter_atoms(formula.core):
        idents = variables(atom.term) if isinstance(atom, PredicateTerm) else variables(atom.source) | {atom.target}
        for ident in idents:
            if ident.name not in declared:
                raise ValidationError(f"formula mentions undeclared identifier {ident.name}")
    check_sorts(formula, program.sort_of)


def _prune(run: _Run, product: ProgramAutomaton, opts: CheckOptions, anchored: bool) -> ProgramAutomaton:
    pruned = remove_k_infeasibility(product, opts.k, opts.solver, anchored=anchored)
    run.stage("k-pruned", pruned.automaton)
    pruned = remove_infeasible_cycles(
        pruned,
        opts.cycle_iters,
        opts.solver,
        opts.complement_budget,
        opts.rank_limit,
        opts.coefficient_bound,
        opts.jobs,
        opts.progress,
    )
    run.stage("cycle-pruned", pruned.automaton)
    return pruned


def _components(lasso: Lasso, count: int) -> list[Lasso]:
    """Split a lasso over composed labels into one lasso per component via provenance."""
    for t in lasso.stem_path + lasso.loop_path:
        if t.provenance is None:
            raise MissingProvenance(f"transition {t.source}->{t.target} carries no provenance")
    return [
        Lasso(
            tuple(t.provenance.components[i] for t in lasso.stem_path),
            tuple(t.provenance.components[i] for t in lasso.loop_path),
        )
        for i in range(count)
    ]


def _restrict(computation: Computation, keep) -> Computation:
    keep = set(keep)
    return Computation(
        computation.initial.restrict(keep),
        tuple(a.restrict(keep) for a in computation.stem),
        tuple(a.restrict(keep) for a in computation.loop),
    )


def _trace_frame(program: ProgramAutomaton, trace: str | None) -> Frame:
    return Frame.of(program if trace is None else on_traces(program, program.automaton, (trace,)))


def _reduce(
    run: _Run,
    program: ProgramAutomaton,
    found: FeasibilityVerdict,
    traces: Sequence[str],
) -> tuple[tuple[Lasso, ...], tuple[Computation, ...], Computation]:
    """Per-trace lassos and computations of a feasible lasso, each re-checked against its trace."""
    count = max(len(traces), 1)
    lassos = _components(found.lasso, count)
    blocks = block_computation(found)
    witnesses = []
    keep_all = set()
    for lasso, trace in zip(lassos, traces or (None,)):
        frame = _trace_frame(program, trace)
        keep_all |= set(frame.idents)
        witness = _restrict(blocks, frame.idents)
        replayable = all(is_basic(s) for s in lasso.stem + lasso.loop)
        if replayable and not matches_lasso(witness, lasso, frame):
            run.notes.append(f"computation of {trace or 'the trace'} does not replay its lasso")
            logger.error("reduced computation does not replay lasso %s", lasso)
        witnesses.append(witness)
    return tuple(lassos), tuple(witnesses), _restrict(blocks, keep_all)


def _recheck(run: _Run, formula, merged: Computation) -> None:
    if not merged.periodic:
        run.notes.append("witness is a finite prefix; formula not re-evaluated")
        return
    if eval_tsl(formula, merged):
        run.notes.append("witness re-evaluated: formula holds on it")
    else:
        run.notes.append("witness re-evaluation FAILED")
        logger.error("re-evaluation of %s failed on the reported computation", formula)


def _search_product(
    run: _Run,
    program: ProgramAutomaton,
    composed: ProgramAutomaton,
    core,
    opts: CheckOptions,
) -> tuple[FeasibilityVerdict, ProgramAutomaton]:
    ltl, atom_map = ltl_skeleton(core)
    formula_automaton = translate(ltl, atom_map)
    product = combined_product(composed, formula_automaton, atom_map)
    run.stage("product", product.automaton)
    if opts.prune:
        product = _prune(run, product, opts, anchored=True)
    found = find_feasible_lasso(product, opts.stem_bound, opts.solver, opts.loop_bound, opts.max_lassos)
    return found, product


@_resource_guard
def check_tsl(program: ProgramAutomaton, formula: Formula, opts: CheckOptions | None = None) -> Verdict:
    """Satisfied when the product with the negation's automaton has no feasible trace."""
    if formula.prefix:
        raise ValidationError("check_tsl expects a formula without trace quantifiers")
    check_declared(program, formula)
    run = _Run(formula, opts)
    run.stage("raw", program.automaton)
    found, _ = _search_product(run, program, program, negated(formula.core), opts)
    if found.feasible:
        lassos, witnesses, merged = _reduce(run, program, found, ())
        _recheck(run, negated(formula.core), merged)
        return run.verdict(VIOLATED, lassos=lassos, witnesses=witnesses)
    if found.infeasible:
        return run.verdict(SATISFIED)
    run.notes.append(found.reason)
    return run.verdict(NO_VIOLATION)


@_resource_guard
def check_universal(program: ProgramAutomaton, formula: Formula, opts: CheckOptions | None = None) -> Verdict:
    """Universal formulas: the self-composition against the negated body."""
    if not formula.prefix or any(q != FORALL for q in formula.quantifiers):
        raise ValidationError("check_universal expects a purely universal prefix")
    check_declared(program, formula)
    run = _Run(formula, opts)
    run.stage("raw", program.automaton)
    traces = formula.traces
    composed = self_compose(program, traces)
    run.stage("self-composed", composed.automaton)
    found, _ = _search_product(run, program, composed, negated(formula.core), opts)
    if found.feasible:
        lassos, witnesses, merged = _reduce(run, program, found, traces)
        _recheck(run, negated(formula.core), merged)
        return run.verdict(VIOLATED, traces=traces, lassos=lassos, witnesses=witnesses)
    if found.infeasible:
        return run.verdict(SATISFIED)
    run.notes.append(found.reason)
    return run.verdict(NO_VIOLATION)


@_resource_guard
def check_existential(program: ProgramAutomaton, formula: Formula, opts: CheckOptions | None = None) -> Verdict:
    """Existential formulas: a feasible trace of the product is a witness tuple."""
    if not formula.prefix or any(q != EXISTS for q in formula.quantifiers):
        raise ValidationError("check_existential expects a purely existential prefix")
    check_declared(program, formula)
    run = _Run(formula, opts)
    run.stage("raw", program.automaton)
    traces = formula.traces
    composed = self_compose(program, traces)
    run.stage("self-composed", composed.automaton)
    found, _ = _search_product(run, program, composed, formula.core, opts)
    if found.feasible:
        lassos, witnesses, merged = _reduce(run, program, found, traces)
        _recheck(run, formula.core, merged)
        return run.verdict(WITNESS_FOUND, traces=traces, lassos=lassos, witnesses=witnesses)
    run.notes.append(found.reason)
    return run.verdict(NO_WITNESS)


def _split_forall_exists(formula: Formula) -> tuple[tuple[str, ...], tuple[str, ...]]:
    blocks = formula.blocks()
    if [q for q, _ in blocks] != [FORALL, EXISTS]:
        raise ValidationError("expected one block of universal quantifiers followed by one existential block")
    return blocks[0][1], blocks[1][1]


def _fallback_search(
    run: _Run,
    base: ProgramAutomaton,
    projection: BuchiAutomaton,
    opts: CheckOptions,
) -> FeasibilityVerdict:
    """Lassos of ``base`` outside ``projection``, decided one by one with exact membership."""
    checked = 0
    for lasso in enumerate_lassos(base.automaton, opts.stem_bound, opts.loop_bound):
        checked += 1
        if checked > opts.max_lassos:
            break
        if accepts(projection, lasso):
            continue
        found = lasso_feasibility(base, lasso, opts.solver)
        if found.feasible:
            return found
    return FeasibilityVerdict(UNKNOWN, reason=f"no lasso proved feasible within stem bound {opts.stem_bound}")


def _recheck_partners(
    run: _Run,
    program: ProgramAutomaton,
    formula: Formula,
    universal: Sequence[str],
    existential: Sequence[str],
    witnesses: Sequence[Computation],
    opts: CheckOptions,
) -> None:
    """Evaluate the body on the counterexample paired with every bounded partner computation."""
    if not all(w.periodic for w in witnesses):
        run.notes.append("partner re-evaluation skipped: the counterexample is a finite prefix")
        return
    partners = []
    for lasso in enumerate_lassos(program.automaton, opts.partner_bound, opts.partner_bound):
        found = lasso_feasibility(program, lasso, opts.solver)
        if found.feasible and found.witness.periodic:
            partners.append(block_computation(found))
    body = Formula(tuple((EXISTS, trace) for trace in existential), formula.core)
    if eval_hypertsl(body, partners, tuple(zip(universal, witnesses))):
        run.notes.append("partner re-evaluation FAILED: a bounded partner computation satisfies the body")
        logger.error("a partner computation satisfies %s on the reported counterexample", formula.core)
    else:
        run.notes.append(
            f"partner re-evaluation: none of {len(partners)} bounded partner computations satisfies the body"
        )


@_resource_guard
def refute_forall_exists(program: ProgramAutomaton, formula: Formula, opts: CheckOptions | None = None) -> Verdict:
    """Search a feasible tuple of universal traces that no existential partner can complete."""
    universal, existential = _split_forall_exists(formula)
    check_declared(program, formula)
    run = _Run(formula, opts)
    run.stage("raw", program.automaton)
    traces = universal + existential
    m = len(universal)

    composed = self_compose(program, traces)
    run.stage("self-composed", composed.automaton)
    ltl, atom_map = ltl_skeleton(formula.core)
    product = combined_product(composed, translate(ltl, atom_map), atom_map)
    run.stage("product", product.automaton)
    pruned = _prune(run, product, opts, anchored=False)
    projection = universal_projection(pruned.automaton, m, join=sequence)
    run.stage("projected", projection)

    base = self_compose(program, universal)
    try:
        remaining = trim(difference(base.automaton, projection, opts.complement_budget, opts.rank_limit))
        run.stage("difference", remaining)
        found = find_feasible_lasso(
            base.with_automaton(remaining), opts.stem_bound, opts.solver, opts.loop_bound, opts.max_lassos
        )
    except BudgetExceeded as exc:
        logger.warning("difference too large (%s), enumerating lassos instead", exc)
        run.notes.append(f"difference exceeded its budget ({exc}); searched lassos of the universal traces instead")
        found = _fallback_search(run, base, projection, opts)

    if not found.feasible:
        if found.reason:
            run.notes.append(found.reason)
        return run.verdict(NO_VIOLATION)
    lassos, witnesses, _ = _reduce(run, program, found, universal)
    _recheck_partners(run, program, formula, universal, existential, witnesses, opts)
    partner = ""
    if opts.confirm_partner and len(universal) == 1 and len(existential) == 1:
        partner = confirm_no_partner(program, formula, lassos[0], opts)
    return run.verdict(VIOLATED, traces=universal, lassos=lassos, witnesses=witnesses, partner=partner)


def witness_exists_forall(program: ProgramAutomaton, formula: Formula, opts: CheckOptions | None = None) -> Verdict:
    """Witnesses for exists-forall formulas: a violation of the dual formula."""
    opts = opts or CheckOptions()
    blocks = formula.blocks()
    if [q for q, _ in blocks] != [EXISTS, FORALL]:
        raise ValidationError("expected one block of existential quantifiers followed by one universal block")
    dual = refute_forall_exists(program, negate(formula), opts)
    if dual.outcome == VIOLATED:
        outcome = WITNESS_FOUND
    elif dual.outcome == NO_VIOLATION:
        outcome = NO_WITNESS
    else:
        outcome = dual.outcome
    return Verdict(
        outcome,
        str(formula),
        dual.traces,
        dual.lassos,
        dual.witnesses,
        dual.notes + (f"searched as a counterexample to {negate(formula)}",),
        dual.stats,
        dual.bounds,
        dual.partner,
    )


def confirm_no_partner(
    program: ProgramAutomaton,
    formula: Formula,
    counterexample: Lasso,
    opts: CheckOptions | None = None,
) -> str:
    """Bounded check that no lasso of the program completes the counterexample to the formula's body.

    Only for one universal and one existential trace; every partner lasso with stem
    and loop up to ``partner_bound`` is paired with the counterexample and the pair's
    product with the body automaton is pruned and tested for emptiness.
    """
    opts = opts or CheckOptions()
    universal, existential = _split_forall_exists(formula)
    if len(universal) != 1 or len(existential) != 1:
        return "skipped: needs exactly one universal and one existential trace"
    traces = universal + existential
    ltl, atom_map = ltl_skeleton(formula.core)
    formula_automaton = translate(ltl, atom_map)
    pair_opts = CheckOptions(
        k=max(opts.k, 2),
        cycle_iters=max(opts.cycle_iters, 1),
        complement_budget=opts.complement_budget,
        rank_limit=opts.rank_limit,
        coefficient_bound=opts.coefficient_bound,
        solver=opts.solver,
    )
    run = _Run(formula, pair_opts)
    count = 0
    for partner in enumerate_lassos(program.automaton, opts.partner_bound, opts.partner_bound):
        count += 1
        pair = lasso_automaton(program, [counterexample, partner], traces)
        product = combined_product(pair, formula_automaton, atom_map)
        try:
            pruned = _prune(run, product, pair_opts, anchored=True)
        except BudgetExceeded as exc:
            return f"inconclusive: pruning the pair with {partner} exceeded its budget ({exc})"
        if is_empty(pruned.automaton) is not None:
            logger.info("partner candidate not excluded: %s", partner)
            return f"inconclusive: partner candidate {partner} not excluded"
    logger.info("no partner among %d lassos", count)
    return f"confirmed: no partner among {count} lassos with stem and loop <= {opts.partner_bound}"


def check(program: ProgramAutomaton, formula: Formula, opts: CheckOptions | None = None) -> Verdict:
    """Dispatch on the shape of the quantifier prefix."""
    opts = opts or CheckOptions()
    quantifiers = formula.quantifiers
    if not quantifiers:
        return check_tsl(program, formula, opts)
    if all(q == FORALL for q in quantifiers):
        return check_universal(program, formula, opts)
    if all(q == EXISTS for q in quantifiers):
        return check_existential(program, formula, opts)
    shape = [q for q, _ in formula.blocks()]
    if shape == [FORALL, EXISTS]:
        return refute_forall_exists(program, formula, opts)
    if shape == [EXISTS, FORALL]:
        return witness_exists_forall(program, formula, opts)
    raise ValidationError("quantifier alternation beyond one block change is not supported")
