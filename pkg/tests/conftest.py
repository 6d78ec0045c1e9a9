import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from groundctl.embed import LocalDeterministicEmbedder
from groundctl.executor import load_fixture
from groundctl.rag import build_knowledge_base


@pytest.fixture(scope="session")
def embedder():
    return LocalDeterministicEmbedder()


@pytest.fixture(scope="session")
def fixture_bundle():
    return load_fixture()


@pytest.fixture(scope="session")
def knowledge_store(fixture_bundle, embedder):
    # Read-only in tests; anything mutating builds its own store.
    return build_knowledge_base(fixture_bundle.documents, embedder)


_acceptance_results: list[tuple[str, str]] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and "test_acceptance" in str(item.fspath):
        criterion = item.function.__doc__ or item.name
        _acceptance_results.append(
            (criterion.strip().splitlines()[0], report.outcome.upper())
        )


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for criterion, outcome in _acceptance_results:
        mark = "PASS" if outcome == "PASSED" else "FAIL"
        terminalreporter.write_line(f"[{mark}] {criterion}")
