"""Bundled fixture pattern files used by the CLI and the test suite."""

from importlib import resources

TWEETY_ID_MARKS = frozenset({"Bd", "f", "name", "Default", "P", "O"})


def fixture_text(name: str) -> str:
    return resources.files(__package__).joinpath(name).read_text(encoding="utf-8")


def fixture_path(name: str):
    return resources.files(__package__).joinpath(name)
