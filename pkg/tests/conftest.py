import json
from pathlib import Path

import pytest

from sqlduel.benchmark import load_database, load_tasks

FIXTURES = Path(__file__).parent / "fixtures"
DBS = FIXTURES / "dbs"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def dbs_dir() -> Path:
    return DBS


@pytest.fixture(scope="session")
def example_tasks():
    return load_tasks(FIXTURES / "tasks_examples.json")


@pytest.fixture(scope="session")
def critique_tasks():
    return load_tasks(FIXTURES / "tasks_critique.json")


@pytest.fixture(scope="session")
def ex1_db():
    return load_database(DBS, "financial_ex1")


@pytest.fixture(scope="session")
def ex2_db():
    return load_database(DBS, "financial_ex2")


@pytest.fixture(scope="session")
def ex3_db():
    return load_database(DBS, "financial_ex3")


def scripted_reply(rows) -> str:
    """A well-formed backend reply carrying the given answer tuples."""
    return "```json\n" + json.dumps({"tuples_that_answer_question": rows}) + "\n```"
