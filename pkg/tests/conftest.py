import json
from pathlib import Path

import pytest

from olplan.llm.retrieval import ExemplarLibrary
from support import FIG9

HERE = Path(__file__).parent
GOLDEN = HERE / "golden"
FIXTURES = HERE.parent / "src" / "olplan" / "data" / "fixtures"


@pytest.fixture
def fig9_text() -> str:
    return json.dumps(FIG9)


@pytest.fixture(scope="session")
def library() -> ExemplarLibrary:
    return ExemplarLibrary.load()
