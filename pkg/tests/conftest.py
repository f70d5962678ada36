import json
from pathlib import Path

import pytest

from tourguide import dialogue, museum

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def museum_map():
    return museum.load_museum_file(FIXTURES / "museum.json")


@pytest.fixture(scope="session")
def museum_doc():
    return json.loads((FIXTURES / "museum.json").read_text())


@pytest.fixture(scope="session")
def phrases():
    return json.loads((FIXTURES / "phrases.json").read_text())


@pytest.fixture()
def scripted_backend(museum_map):
    rules, opts = dialogue.load_script_rules(
        (FIXTURES / "backend_rules.json").read_text())
    return dialogue.ScriptedBackend(rules, museum_map, **opts)
