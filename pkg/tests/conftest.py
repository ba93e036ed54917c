from pathlib import Path
from typing import List

import pytest

from pulse.cache import CacheStore
from pulse.gateway import Gateway, LlmResponse, PromptRequest, ProviderConfig
from pulse.ingest import load_corpus
from pulse.pipeline import Pipeline, Theme

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"
DATA = Path(__file__).parent / "data"

# the theme the main replay fixtures were recorded for
MAIN_THEME = Theme(
    title="Internet safety for children",
    description="risks kids face online",
    origin="user_defined",
)
# second recorded theme; its extraction includes one altered (untraceable) quote
ALT_THEME = Theme(
    title="Family keepsakes online",
    description="digitizing family memories",
    origin="user_defined",
)

CATALOG = ["badthemes", "climatechange", "parenting"]


@pytest.fixture(scope="session")
def parenting_corpus():
    return load_corpus(FIXTURES / "corpus" / "parenting.csv")


@pytest.fixture(scope="session")
def climate_corpus():
    return load_corpus(FIXTURES / "corpus" / "climatechange.csv")


@pytest.fixture(scope="session")
def badthemes_corpus():
    return load_corpus(FIXTURES / "corpus" / "badthemes.csv")


@pytest.fixture
def replay_gateway():
    return Gateway(ProviderConfig(mode="replay", fixture_dir=FIXTURES / "llm"))


@pytest.fixture
def make_pipeline(tmp_path):
    def build(gateway=None, **kwargs):
        gw = gateway or Gateway(
            ProviderConfig(mode="replay", fixture_dir=FIXTURES / "llm")
        )
        return Pipeline(
            gw,
            CacheStore(tmp_path / "cache"),
            reports_root=tmp_path / "reports",
            **kwargs,
        )

    return build


class SequenceTransport:
    """Feeds back canned response texts, one per call, for unit tests."""

    def __init__(self, texts: List[str]):
        self.texts = list(texts)
        self.requests: List[PromptRequest] = []

    def __call__(self, request: PromptRequest) -> LlmResponse:
        self.requests.append(request)
        if not self.texts:
            raise AssertionError("SequenceTransport ran out of canned responses")
        text = self.texts.pop(0)
        return LlmResponse(
            text=text,
            prompt_tokens=len(request.user_text) // 4,
            completion_tokens=len(text) // 4,
            provider_latency_ms=0,
        )


@pytest.fixture
def live_gateway_factory():
    def build(texts: List[str], **config_kwargs) -> Gateway:
        transport = SequenceTransport(texts)
        gateway = Gateway(
            ProviderConfig(mode="live", **config_kwargs), transport=transport
        )
        gateway.transport = transport  # expose for assertions
        return gateway

    return build
