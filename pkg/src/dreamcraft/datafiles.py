"""Paths to the data files shipped with the package."""
from importlib import resources
from pathlib import Path


def _data_path(name: str) -> Path:
    return Path(resources.files("dreamcraft").joinpath("data", name))


def pickaxe16_path() -> Path:
    """The canonical 16-item crafting tree fixture."""
    return _data_path("pickaxe16.json")


def llm_fixture_path() -> Path:
    """A recipe-dictionary document in the shape a code LLM emits."""
    return _data_path("llm_recipes_fixture.txt")
