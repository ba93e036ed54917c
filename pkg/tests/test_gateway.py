import json
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import pytest
from hypothesis import given, strategies as st

from pulse.errors import (
    AuthFailure,
    FixtureMiss,
    MalformedOutput,
    ProviderUnavailable,
    SchemaViolation,
)
from pulse.gateway import (
    CORRECTIVE_INSTRUCTION,
    Gateway,
    PriceTable,
    PromptRequest,
    ProviderConfig,
    Usage,
    estimate_cost,
    request_hash,
    strip_code_fences,
)

from conftest import FIXTURES, SequenceTransport


def _req(user_text="hello", tag="test", **kw):
    return PromptRequest(model_id="gpt-4", user_text=user_text, request_tag=tag, **kw)


SIMPLE_SCHEMA = {
    "type": "object",
    "required": ["codes"],
    "properties": {"codes": {"type": "array"}},
}


class TestRequestValidation:
    def test_empty_user_text_rejected(self):
        with pytest.raises(ValueError):
            _req(user_text="")

    def test_temperature_range(self):
        with pytest.raises(ValueError):
            _req(temperature=1.5)

    def test_nonpositive_output_budget(self):
        with pytest.raises(ValueError):
            _req(max_output_tokens=0)


class TestRequestHash:
    def test_stable_across_calls(self):
        assert request_hash(_req()) == request_hash(_req())

    def test_tag_and_output_budget_do_not_affect_hash(self):
        assert request_hash(_req(tag="a")) == request_hash(_req(tag="b"))
        assert request_hash(_req(max_output_tokens=10)) == request_hash(
            _req(max_output_tokens=99)
        )

    @given(
    field=st.sampled_from(["model_id", "system_text", "user_text", "temperature"])
    )
    def test_each_component_changes_hash(self, field):
        base = PromptRequest(
            model_id="m", user_text="u", system_text="s", temperature=0.0
        )
        changed = {
            "model_id": "m2",
            "system_text": "s2",
            "user_text": "u2",
            "temperature": 0.5,
        }
        from dataclasses import replace

        assert request_hash(base) != request_hash(replace(base, **{field: changed[field]}))


class TestReplayMode:
    def test_replay_requires_existing_fixture_dir(self, tmp_path):
        with pytest.raises(ValueError):
            Gateway(ProviderConfig(mode="replay", fixture_dir=tmp_path / "missing"))

    def test_fixture_miss_names_tag(self, tmp_path):
        tmp_path.mkdir(exist_ok=True)
        gateway = Gateway(ProviderConfig(mode="replay", fixture_dir=tmp_path))
        with pytest.raises(FixtureMiss, match="mystage"):
            gateway.complete(_req(user_text="never recorded", tag="mystage"))

    def test_record_then_replay_round_trip(self, tmp_path):
        recorded = Gateway(
            ProviderConfig(mode="record", fixture_dir=tmp_path),
            transport=SequenceTransport(["first answer"]),
        )
        original = recorded.complete(_req(user_text="question one"))

        replayed = Gateway(ProviderConfig(mode="replay", fixture_dir=tmp_path))
        again = replayed.complete(_req(user_text="question one"))
        assert again == original
        assert replayed.call_count == 1

    def test_replay_determinism_byte_identical_sequences(self):
        fixture_dir = FIXTURES / "llm"
        texts = []
        for _ in range(2):
            gateway = Gateway(ProviderConfig(mode="replay", fixture_dir=fixture_dir))
            run = []
            for path in sorted(fixture_dir.glob("*.json")):
                recorded = json.loads(path.read_text())["request"]
                response = gateway.complete(
                    PromptRequest(
                        model_id=recorded["model_id"],
                        user_text=recorded["user_text"],
                        system_text=recorded["system_text"],
                        temperature=recorded["temperature"],
                    )
                )
                run.append(response.text)
            texts.append("\x00".join(run))
        assert texts[0] == texts[1]


class _FlakyHandler(BaseHTTPRequestHandler):
    attempts = 0

    def do_POST(self):
        cls = type(self)
        cls.attempts += 1
        length = int(self.headers.get("Content-Length", 0))
        self.rfile.read(length)
        if cls.attempts <= 2:
            self.send_response(429)
            self.end_headers()
            return
        body = json.dumps(
            {
                "choices": [{"message": {"content": "recovered"}}],
                "usage": {"prompt_tokens": 7, "completion_tokens": 3},
            }
        ).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture
def flaky_server():
    _FlakyHandler.attempts = 0
    server = HTTPServer(("127.0.0.1", 0), _FlakyHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_port}/v1/chat/completions"
    server.shutdown()


class TestLiveMode:
    def test_retries_on_429_then_succeeds(self, flaky_server, monkeypatch):
        monkeypatch.setenv("TEST_KEY", "sk-test")
        gateway = Gateway(
            ProviderConfig(
                mode="live",
                endpoint_url=flaky_server,
                api_key_ref="TEST_KEY",
                max_retries=3,
                backoff_base_ms=5,
            )
        )
        response = gateway.complete(_req(user_text="net question"))
        assert response.text == "recovered"
        assert response.prompt_tokens == 7
        assert _FlakyHandler.attempts == 3
        assert gateway.retries_total == 2

    def test_retries_exhausted(self, monkeypatch):
        monkeypatch.setenv("TEST_KEY", "sk-test")

        def always_429(request):
            from pulse.gateway import _TransientProviderError

            raise _TransientProviderError("429")

        gateway = Gateway(
            ProviderConfig(mode="live", max_retries=1, backoff_base_ms=1),
            transport=always_429,
        )
        with pytest.raises(ProviderUnavailable, match="retries exhausted"):
            gateway.complete(_req())

    def test_missing_api_key_is_auth_failure(self, monkeypatch):
        monkeypatch.delenv("PULSE_API_KEY", raising=False)
        gateway = Gateway(ProviderConfig(mode="live", backoff_base_ms=1))
        with pytest.raises(AuthFailure, match="PULSE_API_KEY"):
            gateway.complete(_req())


class TestCompleteJson:
    def test_parses_plain_json(self, live_gateway_factory):
        gateway = live_gateway_factory(['{"codes": [{"name": "X", "description": "Y"}]}'])
        value = gateway.complete_json(_req(), SIMPLE_SCHEMA)
        assert value["codes"][0]["name"] == "X"

    def test_null_returns_none(self, live_gateway_factory):
        gateway = live_gateway_factory(["null"])
        assert gateway.complete_json(_req(), SIMPLE_SCHEMA) is None

    def test_fenced_json_equals_unfenced(self, live_gateway_factory):
        fenced = '```json\n{"codes": []}\n```'
        a = live_gateway_factory([fenced]).complete_json(_req(), SIMPLE_SCHEMA)
        b = live_gateway_factory(['{"codes": []}']).complete_json(_req(), SIMPLE_SCHEMA)
        assert a == b == {"codes": []}

    def test_corrective_retry_appends_instruction_once(self, live_gateway_factory):
        gateway = live_gateway_factory(["not json at all", '{"codes": []}'])
        value = gateway.complete_json(_req(user_text="base"), SIMPLE_SCHEMA)
        assert value == {"codes": []}
        second_request = gateway.transport.requests[1]
        assert second_request.user_text == f"base\n\n{CORRECTIVE_INSTRUCTION}"

    def test_malformed_after_retries(self, live_gateway_factory):
        gateway = live_gateway_factory(["nope", "still nope", "never"])
        with pytest.raises(MalformedOutput):
            gateway.complete_json(_req(), SIMPLE_SCHEMA)

    def test_schema_violation_after_retries(self, live_gateway_factory):
        gateway = live_gateway_factory(['{"wrong": 1}'] * 3)
        with pytest.raises(SchemaViolation):
            gateway.complete_json(_req(), SIMPLE_SCHEMA)

    def test_never_returns_value_violating_schema(self, live_gateway_factory):
        gateway = live_gateway_factory(['{"wrong": 1}', '{"codes": [1]}'])
        value = gateway.complete_json(_req(), SIMPLE_SCHEMA)
        assert "codes" in value


class TestStripCodeFences:
    def test_plain_text_untouched(self):
        assert strip_code_fences('{"a": 1}') == '{"a": 1}'

    def test_fence_with_language(self):
        assert strip_code_fences('```json\n{"a": 1}\n```') == '{"a": 1}'

    def test_fence_without_language(self):
        assert strip_code_fences("```\nnull\n```") == "null"

    def test_internal_backticks_kept(self):
        text = 'prefix ```json\n{"a": 1}\n``` suffix'
        assert strip_code_fences(text) == text


class TestUsageAccounting:
    def test_usage_accumulates_per_tag(self, live_gateway_factory):
        gateway = live_gateway_factory(["a" * 40, "b" * 80])
        gateway.complete(_req(user_text="x" * 400, tag="quotes"))
        gateway.complete(_req(user_text="y" * 100, tag="mapping"))
        usage = gateway.usage_by_tag
        assert usage["quotes"].calls == 1
        assert usage["quotes"].prompt_tokens == 100
        assert usage["quotes"].completion_tokens == 10
        assert usage["mapping"].calls == 1
        assert gateway.call_count == 2
        assert [tag for tag, _ in gateway.request_log] == ["quotes", "mapping"]

    def test_concurrent_accumulation(self, tmp_path):
        transport = SequenceTransport(["r"] * 64)
        gateway = Gateway(ProviderConfig(mode="live", in_flight_limit=4), transport=transport)
        threads = [
            threading.Thread(
                target=lambda i=i: gateway.complete(_req(user_text=f"q{i}", tag="t"))
            )
            for i in range(64)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert gateway.usage_by_tag["t"].calls == 64
        assert gateway.call_count == 64


class TestEstimateCost:
    def test_zero_tokens_zero_cost(self):
        estimate = estimate_cost({}, PriceTable(30, 60))
        assert estimate.total == 0

    def test_spec_arithmetic(self):
        usage = {"all": Usage(prompt_tokens=1_000_000, completion_tokens=200_000, calls=1)}
        estimate = estimate_cost(usage, PriceTable(30, 60))
        assert estimate.per_stage["all"] == 42
        assert estimate.total == 42

    def test_per_stage_sums_to_total(self):
        usage = {
            "quotes": Usage(123_456, 7_890, 3),
            "mapping": Usage(55_555, 22_222, 2),
            "themes": Usage(1_000, 500, 1),
        }
        estimate = estimate_cost(usage, PriceTable(30, 60))
        assert estimate.total == sum(estimate.per_stage.values())
