import os

import pytest

from hytslcheck.helpers.formulas import parse_formula
from hytslcheck.helpers.program import parse_program_automaton

DATA_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")


def data_path(name: str) -> str:
    return os.path.join(DATA_DIR, name)


def load_program(name: str):
    with open(data_path(name), encoding="utf-8") as f:
        return parse_program_automaton(f.read())


def load_formula(name: str, program):
    with open(data_path(name), encoding="utf-8") as f:
        return parse_formula(f.read().strip(), {i.name for i in program.inputs})


@pytest.fixture
def gni():
    return load_program("gni.pa")


@pytest.fixture
def cyc():
    return load_program("cyc.pa")


@pytest.fixture
def three_state():
    return load_program("three_state.pa")


@pytest.fixture
def gni_formula(gni):
    return load_formula("gni.htsl", gni)


@pytest.fixture
def cyc_formula(cyc):
    return load_formula("cyc.htsl", cyc)
