from pathlib import Path

import pytest

from meshmap.matrix import CategorySet
from meshmap.medline import read_medline
from meshmap.tree import load_tree

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def tree():
    return load_tree(DATA / "tree.txt")


@pytest.fixture(scope="session")
def corpus():
    return read_medline(DATA / "corpus.txt")


@pytest.fixture(scope="session")
def deep_sample():
    return read_medline(DATA / "deep_sample.txt")


@pytest.fixture(scope="session")
def strict_cats(tree):
    return CategorySet.from_tree(tree, ("C", "D", "E"), "strict")


@pytest.fixture(scope="session")
def collapsed_cats(tree):
    return CategorySet.from_tree(tree, ("C", "D", "E"), "collapsed")


_criteria = {}


def pytest_runtest_logreport(report):
    name = report.nodeid.rpartition("::")[2]
    if not name.startswith("test_criterion_"):
        return
    if report.failed or (report.when == "call" and name not in _criteria):
        _criteria[name] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_criteria):
        num, _, words = name.removeprefix("test_criterion_").partition("_")
        terminalreporter.write_line(f"{_criteria[name]}  criterion {int(num):2d}: {words.replace('_', ' ')}")
