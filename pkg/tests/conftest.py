import sys
from pathlib import Path

import pytest

from irsynth.dialect.parser import load_dialect_by_name
from irsynth.source_ir.parser import parse_file, parse_function

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus" / "polybench"
KERNELS = sorted(p.stem for p in CORPUS.glob("*.sir"))

sys.path.insert(0, str(Path(__file__).resolve().parent))


@pytest.fixture(scope="session")
def thlo():
    return load_dialect_by_name("thlo")


@pytest.fixture(scope="session")
def tlinalg():
    return load_dialect_by_name("tlinalg")


def kernel(name):
    return parse_file(CORPUS / f"{name}.sir")


def sir(text):
    return parse_function(text)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        terminalreporter.write_line(results[key])
