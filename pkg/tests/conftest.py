from __future__ import annotations

from pathlib import Path

import pytest

from qoeshare import build_session_set, default_gen_params, generate_corpus, load_ladder_trace

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def default_corpus():
    return generate_corpus(default_gen_params())


@pytest.fixture(scope="session")
def session_set(default_corpus):
    return build_session_set(default_corpus)


@pytest.fixture(scope="session")
def fixture_ladder():
    return load_ladder_trace(DATA_DIR / "fixture_ladder.csv")
