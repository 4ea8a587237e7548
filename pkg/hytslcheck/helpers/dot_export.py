"""Graphviz rendering of Büchi and program automata."""

import logging
import os

from .buchi import BuchiAutomaton

logger = logging.getLogger("hytslcheck.dot_export")


def _gvquote(s) -> str:
    return '"{}"'.format(str(s).replace("\\", "\\\\").replace('"', r"\"").replace("\n", r"\n"))


def graphviz(automaton: BuchiAutomaton, title: str = "automaton", label_as_string=str):
    """Produce a DOT description of ``automaton`` as an iterable of lines.

    Accepting states are double circles; the initial state gets an arrow from an
    invisible point.
    """
    yield f"digraph {_gvquote(title)} {{\n"
    yield "  rankdir=LR;\n"
    yield '  __start [shape="point"];\n'
    for state in automaton.states:
        shape = "doublecircle" if state in automaton.accepting else "circle"
        yield f"  {state} [shape=\"{shape}\" label={_gvquote(automaton.name(state))}];\n"
    yield f"  __start -> {automaton.initial};\n"
    for t in automaton.transitions:
        yield f"  {t.source} -> {t.target} [label={_gvquote(label_as_string(t.label))}];\n"
    yield "}\n"


def emit_dot(automaton: BuchiAutomaton, stage: str, directory: str = ".") -> str:
    """Write the DOT file for one pipeline stage and return its path."""
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, f"{stage}.dot")
    with open(path, "w", encoding="utf-8") as f:
        f.writelines(graphviz(automaton, stage))
    logger.info("wrote %s (%d states)", path, automaton.num_states)
    return path
