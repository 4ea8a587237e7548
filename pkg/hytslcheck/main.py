"""
Check TSL and HyperTSL formulas against program automata.
Counterexamples and witnesses are searched for with automata constructions
and pruned of infeasible traces with an SMT backend.
"""

import argparse
import os
import shlex
import sys
import traceback
import logging
from dataclasses import dataclass

from hytslcheck.helpers.buchi import DEFAULT_COMPLEMENT_BUDGET
from hytslcheck.helpers.checker import EXIT_CODES, RESOURCE, STAGES, CheckOptions, check
from hytslcheck.helpers.dot_export import graphviz
from hytslcheck.helpers.errors import HytslError, ValidationError
from hytslcheck.helpers.io_utils import load_formula, load_system, setup_logging, stage_dumper, write_report
from hytslcheck.helpers.report import format_json, format_text
from hytslcheck.helpers.solvers import make_solver

logger = logging.getLogger("hytslcheck")

SOLVER_ENV = "HYTSL_SOLVER_CMD"
FORMATS = ("text", "json", "dot")


@dataclass(frozen=True)
class RunConfig:
    """Everything one ``check`` run needs, validated on construction."""

    system: str
    formula: str
    k: int = 1
    cycle_iters: int = 1
    stem_bound: int = 8
    solver: str = "z3"
    solver_cmd: tuple[str, ...] = ()
    value_bound: int = 32
    complement_budget: int = DEFAULT_COMPLEMENT_BUDGET
    timeout: float = 5.0
    output_format: str = "text"
    dump: tuple[str, ...] = ()
    dump_dir: str = "."
    output: str | None = None
    jobs: int = 1
    progress: bool = False
    confirm_partner: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"--k must be at least 1, got {self.k}")
        if self.cycle_iters < 0:
            raise ValidationError(f"--cycle-iters must be non-negative, got {self.cycle_iters}")
        for flag, value in (
            ("--stem-bound", self.stem_bound),
            ("--value-bound", self.value_bound),
            ("--complement-budget", self.complement_budget),
            ("--jobs", self.jobs),
        ):
            if value < 1:
                raise ValidationError(f"{flag} must be positive, got {value}")
        if self.timeout <= 0:
            raise ValidationError(f"--timeout must be positive, got {self.timeout}")
        if self.output_format not in FORMATS:
            raise ValidationError(f"unknown output format {self.output_format!r}")
        unknown = set(self.dump) - set(STAGES)
        if unknown:
            raise ValidationError(f"unknown stage(s) for --dump: {', '.join(sorted(unknown))}")

    def solver_command(self) -> tuple[str, ...]:
        """The external solver command; the environment wins over ``--solver-cmd``."""
        env = os.environ.get(SOLVER_ENV, "").strip()
        if env:
            return tuple(shlex.split(env))
        return self.solver_cmd

    def options(self, on_stage=None) -> CheckOptions:
        solver = make_solver(self.solver, self.solver_command(), self.timeout, self.value_bound)
        return CheckOptions(
            k=self.k,
            cycle_iters=self.cycle_iters,
            stem_bound=self.stem_bound,
            complement_budget=self.complement_budget,
            confirm_partner=self.confirm_partner,
            jobs=self.jobs,
            progress=self.progress,
            solver=solver,
            on_stage=on_stage,
        )


def run(config: RunConfig) -> int:
    """Load the inputs, check the formula and print the report; returns the exit status."""
    last_stage = {}
    dumper = stage_dumper(config.dump, config.dump_dir)

    def on_stage(name, automaton):
        last_stage["automaton"] = automaton
        last_stage["name"] = name
        dumper(name, automaton)

    try:
        program = load_system(config.system)
        formula = load_formula(config.formula, {i.name for i in program.inputs})
        verdict = check(program, formula, config.options(on_stage))
    except (OSError, HytslError) as exc:
        logger.error("%s, %s ❌ error", config.system, config.formula)
        logger.error(traceback.format_exc())
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CODES[RESOURCE]

    if config.output_format == "json":
        text = format_json(verdict)
    elif config.output_format == "dot" and last_stage:
        text = "".join(graphviz(last_stage["automaton"], last_stage["name"]))
    else:
        text = format_text(verdict)
    if not write_report(text, config.output):
        return EXIT_CODES[RESOURCE]
    return verdict.exit_code


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hytslcheck",
        description="Model check TSL and HyperTSL formulas against program automata.",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    check_cmd = commands.add_parser("check", help="Check a formula against a system.")
    check_cmd.add_argument("--system", required=True, help="Program automaton file.")
    check_cmd.add_argument("--formula", required=True, help="Formula file or inline formula text.")
    check_cmd.add_argument("--k", type=int, default=1, help="Window size for k-infeasibility pruning.")
    check_cmd.add_argument(
        "--cycle-iters", type=int, default=1, help="Rounds of infeasible cycle removal (0 disables it)."
    )
    check_cmd.add_argument("--stem-bound", type=int, default=8, help="Bound on lasso stems in the search.")
    check_cmd.add_argument(
        "--solver", choices=("z3", "builtin"), default="z3", help="In-process backend when no command is given."
    )
    check_cmd.add_argument(
        "--solver-cmd",
        default=None,
        help=f"External SMT-LIB solver command, e.g. 'z3 -in'. Overridden by {SOLVER_ENV}.",
    )
    check_cmd.add_argument(
        "--value-bound", type=int, default=32, help="Integer range of the builtin bounded solver."
    )
    check_cmd.add_argument(
        "--complement-budget",
        type=int,
        default=DEFAULT_COMPLEMENT_BUDGET,
        help="Maximum number of states a complementation may generate.",
    )
    check_cmd.add_argument("--timeout", type=float, default=5.0, help="Seconds per solver query.")
    check_cmd.add_argument(
        "--dump",
        action="append",
        default=[],
        choices=STAGES,
        metavar="STAGE",
        help=f"Write a DOT file for a pipeline stage; repeatable. One of: {', '.join(STAGES)}.",
    )
    check_cmd.add_argument("--dump-dir", default=".", help="Directory for --dump files.")
    check_cmd.add_argument("--format", choices=FORMATS, default="text", help="Report format.")
    check_cmd.add_argument("--output", default=None, help="Write the report to a file instead of stdout.")
    check_cmd.add_argument("--jobs", type=int, default=1, help="Worker processes for cycle checks.")
    check_cmd.add_argument("--progress", action="store_true", help="Show progress bars.")
    check_cmd.add_argument(
        "--no-partner-check",
        action="store_true",
        help="Skip the bounded search confirming that a counterexample has no partner trace.",
    )
    check_cmd.add_argument("--log-file", default="hytslcheck.log", help="Log file (appended to).")
    return parser


def main(argv=None):
    """Main function to parse command line arguments and run the check."""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_file)

    try:
        config = RunConfig(
            system=args.system,
            formula=args.formula,
            k=args.k,
            cycle_iters=args.cycle_iters,
            stem_bound=args.stem_bound,
            solver=args.solver,
            solver_cmd=tuple(shlex.split(args.solver_cmd)) if args.solver_cmd else (),
            value_bound=args.value_bound,
            complement_budget=args.complement_budget,
            timeout=args.timeout,
            output_format=args.format,
            dump=tuple(args.dump),
            dump_dir=args.dump_dir,
            output=args.output,
            jobs=args.jobs,
            progress=args.progress,
            confirm_partner=not args.no_partner_check,
        )
    except ValidationError as exc:
        parser.error(str(exc))
    sys.exit(run(config))


if __name__ == "__main__":
    main()
