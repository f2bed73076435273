import shutil
from pathlib import Path

import pytest

from memanchor.backend.providers import Extractor, MockProvider
from memanchor.build import BuildConfig, build_kb
from memanchor.cli import demo_path
from memanchor.ingest import load_conversation_document
from memanchor.kb import load_kb, save_kb

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(autouse=True)
def _fixed_epoch(monkeypatch):
    monkeypatch.delenv("SOURCE_DATE_EPOCH", raising=False)


@pytest.fixture(scope="session")
def demo_conversation():
    return load_conversation_document(demo_path("conversation.json"))


@pytest.fixture(scope="session")
def fixtures_dir():
    return demo_path("fixtures")


def make_extractor(fixtures=None):
    return Extractor(MockProvider(fixtures or demo_path("fixtures")))


@pytest.fixture
def extractor():
    return make_extractor()


@pytest.fixture(scope="session")
def demo_kb_dir(tmp_path_factory, demo_conversation):
    kb, _ = build_kb(demo_conversation, make_extractor(), BuildConfig())
    return save_kb(kb, tmp_path_factory.mktemp("kb") / "demo")


@pytest.fixture(scope="session")
def demo_kb(demo_kb_dir):
    return load_kb(demo_kb_dir)


@pytest.fixture
def kb_copy(tmp_path, demo_kb_dir):
    dst = tmp_path / "kb"
    shutil.copytree(demo_kb_dir, dst)
    return dst


_VERDICTS = []


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion and assert it."""
    recorded = []

    def record(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        recorded.append(line)
        _VERDICTS.append(line)
        print(line)
        assert ok, line

    yield record
    if not recorded:
        _VERDICTS.append(f"FAIL  {request.node.name}: raised before reaching a verdict")


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
