import pytest
from hypothesis import settings

from clothgrasp.corpus import reference_corpus, reference_corpus_texts

settings.register_profile("default", max_examples=200, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def corpus():
    return reference_corpus()


@pytest.fixture(scope="session")
def corpus_texts():
    return reference_corpus_texts()


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
