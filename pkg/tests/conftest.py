import io

import pytest

from motifrank.graph import NetworkHistory
from motifrank.ingest import build_store, parse_messages
from motifrank.synth import SynthConfig, generate

W = 604800


def store_from(text, joins=None, horizon=20):
    return build_store(parse_messages(io.StringIO(text)), joins, horizon)


@pytest.fixture(scope="session")
def synth_log():
    return generate(SynthConfig(n_users=150, n_weeks=20, base_rate=2.5, pref_strength=0.9,
                                reply_prob=0.7, seed=3))


@pytest.fixture(scope="session")
def synth_history(synth_log):
    messages, joins = synth_log
    return NetworkHistory(build_store(messages, joins, 20))


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
