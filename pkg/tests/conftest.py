import pytest

from dreamcraft.datafiles import llm_fixture_path, pickaxe16_path
from dreamcraft.hypotheses import empty_hypothesis, ground_truth_awm
from dreamcraft.tech_tree import load_tree_file


@pytest.fixture(scope="session")
def tree():
    return load_tree_file(pickaxe16_path())


@pytest.fixture(scope="session")
def fixture_text():
    return pickaxe16_path().read_text(encoding="utf-8")


@pytest.fixture(scope="session")
def llm_document():
    return llm_fixture_path().read_text(encoding="utf-8")


@pytest.fixture
def perfect_awm(tree):
    return ground_truth_awm(tree)


@pytest.fixture
def empty_awm(tree):
    return empty_hypothesis(set(tree.items))
