import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from factdial.gateway import Gateway, GatewayConfig
from factdial.mock import MockEngine, MockTransport

FIXTURES = Path(__file__).resolve().parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def corpus_path() -> Path:
    return FIXTURES / "mini_corpus.jsonl"


@pytest.fixture
def snapshot_path() -> Path:
    return FIXTURES / "snapshot.jsonl"


@pytest.fixture
def mock_script_path() -> Path:
    return FIXTURES / "mock_script.json"


@pytest.fixture
def scripted_engine(mock_script_path) -> MockEngine:
    return MockEngine.from_file(mock_script_path)


def make_gateway(engine: MockEngine, **overrides) -> Gateway:
    cfg = GatewayConfig(
        base_url="http://mock.invalid/v1",
        max_retries=overrides.pop("max_retries", 0),
        **overrides,
    )
    return Gateway(cfg, transport=MockTransport(engine))


@pytest.fixture
def scripted_gateway(scripted_engine) -> Gateway:
    return make_gateway(scripted_engine)
