from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data" / "nutrimouse"

_acceptance_lines = []


def _load(name):
    return np.loadtxt(DATA / name, delimiter=",", skiprows=1)


@pytest.fixture(scope="session")
def nutrimouse():
    genotype = np.loadtxt(DATA / "genotype.csv", dtype=str, skiprows=1)
    diet = np.loadtxt(DATA / "diet.csv", dtype=str, skiprows=1)
    return {
        "gene": _load("gene.csv"),
        "lipid": _load("lipid.csv"),
        "genotype": np.char.strip(genotype, '"'),
        "diet": np.char.strip(diet, '"'),
        "gene_path": DATA / "gene.csv",
        "lipid_path": DATA / "lipid.csv",
    }


@pytest.fixture
def rng():
    return np.random.default_rng(20181129)


@pytest.fixture(scope="session")
def acceptance_log():
    return _acceptance_lines


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)
