"""Helpers for reading models and formulas, writing reports and dumping pipeline stages."""

import os
import traceback
import logging

from .dot_export import emit_dot
from .errors import HytslError
from .formulas import Formula, parse_formula
from .program import ProgramAutomaton, parse_program_automaton

logger = logging.getLogger("hytslcheck")


def setup_logging(path="hytslcheck.log", level=logging.INFO):
    """Attach the log file handler once; later calls are no-ops."""
    logger.setLevel(level)
    if not logger.hasHandlers():
        fh = logging.FileHandler(path, mode="a", encoding="utf-8")
        formatter = logging.Formatter("%(asctime)s %(levelname)s: %(message)s")
        fh.setFormatter(formatter)
        logger.addHandler(fh)
    return logger


def read_text(path):
    with open(path, "r", encoding="utf-8") as f:
        return f.read()


def load_system(path) -> ProgramAutomaton:
    """Parse a program automaton file, logging parse errors before re-raising them."""
    text = read_text(path)
    try:
        program = parse_program_automaton(text)
    except HytslError:
        logger.error("%s ❌ error", path)
        logger.error(traceback.format_exc())
        raise
    logger.info(
        "loaded %s: %d states, %d transitions, cells %s, inputs %s",
        path,
        program.automaton.num_states,
        len(program.automaton.transitions),
        ", ".join(sorted(map(str, program.cells))),
        ", ".join(sorted(map(str, program.inputs))),
    )
    return program


def load_formula(arg, inputs=()) -> Formula:
    """``arg`` is a formula file when such a file exists, inline formula text otherwise."""
    if os.path.isfile(arg):
        text = read_text(arg)
        origin = arg
    else:
        text = arg
        origin = "<inline>"
    try:
        formula = parse_formula(text.strip(), inputs)
    except HytslError:
        logger.error("%s ❌ error", origin)
        logger.error(traceback.format_exc())
        raise
    logger.info("loaded formula %s", formula)
    return formula


def write_report(text, output_path=None):
    """Print the report, or write it to ``output_path`` when given."""
    if output_path is None:
        print(text, end="")
        return True
    try:
        with open(output_path, "w", encoding="utf-8") as f:
            f.write(text)
        print(f"report -> {output_path} ✅ done")
        return True
    except OSError:
        logger.error("report -> %s ❌ error", output_path)
        logger.error(traceback.format_exc())
        return False


def stage_dumper(stages, directory="."):
    """Stage callback writing a DOT file for every stage named in ``stages``."""
    wanted = set(stages)

    def dump(name, automaton):
        if name not in wanted:
            return
        try:
            emit_dot(automaton, name, directory)
        except OSError:
            logger.error("%s -> %s ❌ error", name, directory)
            logger.error(traceback.format_exc())

    return dump
