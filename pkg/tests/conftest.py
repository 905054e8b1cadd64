import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # expose tests/oracles.py

from foldforge.foldfile import FoldFile, load_fold
from foldforge.pattern import CreasePattern, Segment

FIXTURES = Path(__file__).parent / "fixtures"
FOLDS = FIXTURES / "folds"
SCRIPTS = FIXTURES / "scripts"


def fixture_names() -> list[str]:
    return sorted(p.stem for p in FOLDS.glob("*.fold"))


def scripted_names() -> list[str]:
    return sorted(p.stem for p in SCRIPTS.glob("*.json"))


def load_fixture(name: str) -> FoldFile:
    return load_fold(FOLDS / f"{name}.fold")


def fixture_text(name: str) -> str:
    return (FOLDS / f"{name}.fold").read_text(encoding="utf-8")


def load_script(name: str) -> list[str]:
    with open(SCRIPTS / f"{name}.json", "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    return [json.dumps(a) for a in doc["actions"]]


@pytest.fixture
def blank() -> CreasePattern:
    return CreasePattern.new_blank()


@pytest.fixture
def vertical_valley(blank) -> CreasePattern:
    return blank.insert_crease(Segment((5, 0), (5, 10)), "V")


def cross_pattern(assignments: list[str]) -> CreasePattern:
    """Degree-4 interior vertex at (5,5) with four 90-degree sectors; one
    crease per boundary midpoint, assigned in the order right/up/left/down."""
    cp = CreasePattern.new_blank()
    ends = [(10, 5), (5, 10), (0, 5), (5, 0)]
    for end, a in zip(ends, assignments):
        cp = cp.insert_crease(Segment((5, 5), end), a)
    return cp
