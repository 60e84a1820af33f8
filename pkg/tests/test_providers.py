import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from transit_agent.errors import ContextOverflow, ProviderUnavailable
from transit_agent.providers import (
    CompletionRequest,
    HttpProvider,
    HttpProviderConfig,
    ScriptedProvider,
    cosine_similarity,
    hashed_embedding,
)

# Frozen oracle values: cosine of the hashed embeddings for these two texts
# (computed directly with numpy on the raw vectors, seed 7 / dim 256).
TEXT_A = "Which routes serve the municipality of Bologna?"
TEXT_B = "Paint elephants during thunderstorms quickly"
FROZEN_DISJOINT_COSINE = -0.1690308509457033


def request(text):
    return CompletionRequest(system_prompt="sys", messages=[("user", text)])


class TestCompletionRequest:
    def test_empty_messages_rejected(self):
        with pytest.raises(ValueError):
            CompletionRequest(system_prompt="", messages=[])

    def test_bad_role_rejected(self):
        with pytest.raises(ValueError):
            CompletionRequest(system_prompt="", messages=[("robot", "hi")])

    def test_negative_temperature_rejected(self):
        with pytest.raises(ValueError):
            CompletionRequest(system_prompt="", messages=[("user", "hi")], temperature=-1)

    def test_last_user_message_skips_assistant(self):
        req = CompletionRequest(
            system_prompt="",
            messages=[("user", "first"), ("assistant", "reply"), ("user", "second")],
        )
        assert req.last_user_message() == "second"


class TestScriptedProvider:
    def test_matcher_returns_canned_sql(self):
        provider = ScriptedProvider([(r"routes.*Bologna", "select 1 from routes")])
        assert provider.complete(request("How many routes in Bologna?")) == "select 1 from routes"

    def test_first_match_wins(self):
        provider = ScriptedProvider([(r"routes", "first"), (r"Bologna", "second")])
        assert provider.complete(request("routes of Bologna")) == "first"

    def test_group_expansion(self):
        provider = ScriptedProvider([(r"line (\d+)", r"select '\1'")])
        assert provider.complete(request("draw line 18 now")) == "select '18'"

    def test_no_match_raises(self):
        provider = ScriptedProvider([(r"^never$", "x")])
        with pytest.raises(ProviderUnavailable):
            provider.complete(request("something else"))

    def test_identical_requests_identical_responses(self):
        provider = ScriptedProvider([(r".", "same")])
        r1 = provider.complete(request("hello"))
        r2 = provider.complete(request("hello"))
        assert r1 == r2 == "same"


class TestHashedEmbedding:
    def test_deterministic(self):
        v1 = hashed_embedding(TEXT_A, 256, 7)
        v2 = hashed_embedding(TEXT_A, 256, 7)
        assert np.array_equal(v1.values, v2.values)

    def test_self_cosine_is_one(self):
        v = hashed_embedding(TEXT_A, 256, 7)
        assert cosine_similarity(v, v) == pytest.approx(1.0)

    def test_unit_norm(self):
        for text in (TEXT_A, TEXT_B, "x", "one two three four five"):
            v = hashed_embedding(text, 256, 7)
            assert np.linalg.norm(v.values) == pytest.approx(1.0)

    def test_disjoint_tokens_score_below_identical(self):
        a = hashed_embedding(TEXT_A, 256, 7)
        b = hashed_embedding(TEXT_B, 256, 7)
        sim = cosine_similarity(a, b)
        assert sim == pytest.approx(FROZEN_DISJOINT_COSINE, abs=1e-12)
        assert sim < cosine_similarity(a, hashed_embedding(TEXT_A, 256, 7))

    def test_order_insensitive(self):
        v1 = hashed_embedding("alpha beta gamma", 256, 7)
        v2 = hashed_embedding("gamma alpha beta", 256, 7)
        assert np.allclose(v1.values, v2.values)

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            hashed_embedding("   ", 256, 7)

    def test_seed_changes_vectors(self):
        v1 = hashed_embedding(TEXT_A, 256, 7)
        v2 = hashed_embedding(TEXT_A, 256, 8)
        assert not np.allclose(v1.values, v2.values)


class _StubApi(BaseHTTPRequestHandler):
    behavior = "ok"

    def log_message(self, *args):
        pass

    def do_POST(self):
        self.rfile.read(int(self.headers.get("Content-Length") or 0))
        if self.path == "/chat/completions":
            if self.behavior == "overflow":
                body = json.dumps({"error": "maximum context length exceeded"}).encode()
                self.send_response(400)
            elif self.behavior == "flaky" and not getattr(self.server, "already_failed", False):
                self.server.already_failed = True
                body = b"{}"
                self.send_response(500)
            else:
                body = json.dumps(
                    {"choices": [{"message": {"content": "select 42"}}]}
                ).encode()
                self.send_response(200)
        else:
            body = json.dumps({"data": [{"embedding": [0.6, 0.8]}]}).encode()
            self.send_response(200)
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)


@pytest.fixture
def stub_api():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubApi)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    yield server
    server.shutdown()


def http_provider(server, **kwargs):
    host, port = server.server_address
    return HttpProvider(
        HttpProviderConfig(
            base_url=f"http://{host}:{port}",
            completion_model="test-model",
            embedding_model="test-embed",
            backoff_s=0.01,
            **kwargs,
        )
    )


class TestHttpProvider:
    def test_missing_api_key(self, stub_api, monkeypatch):
        monkeypatch.delenv("TRANSIT_AGENT_API_KEY", raising=False)
        provider = http_provider(stub_api)
        with pytest.raises(ProviderUnavailable):
            provider.complete(request("hello"))

    def test_completion_roundtrip(self, stub_api, monkeypatch):
        monkeypatch.setenv("TRANSIT_AGENT_API_KEY", "k")
        _StubApi.behavior = "ok"
        assert http_provider(stub_api).complete(request("hello")) == "select 42"

    def test_retry_on_transient_failure(self, stub_api, monkeypatch):
        monkeypatch.setenv("TRANSIT_AGENT_API_KEY", "k")
        _StubApi.behavior = "flaky"
        try:
            assert http_provider(stub_api).complete(request("hello")) == "select 42"
        finally:
            _StubApi.behavior = "ok"

    def test_context_overflow_mapped(self, stub_api, monkeypatch):
        monkeypatch.setenv("TRANSIT_AGENT_API_KEY", "k")
        _StubApi.behavior = "overflow"
        try:
            with pytest.raises(ContextOverflow):
                http_provider(stub_api).complete(request("hello"))
        finally:
            _StubApi.behavior = "ok"

    def test_embedding_roundtrip(self, stub_api, monkeypatch):
        monkeypatch.setenv("TRANSIT_AGENT_API_KEY", "k")
        _StubApi.behavior = "ok"
        vector = http_provider(stub_api).embed("hello")
        assert vector.dimension == 2
        assert np.allclose(vector.values, [0.6, 0.8])

    def test_unreachable_endpoint(self, monkeypatch):
        monkeypatch.setenv("TRANSIT_AGENT_API_KEY", "k")
        provider = HttpProvider(
            HttpProviderConfig(
                base_url="http://127.0.0.1:9",  # discard port: nothing listens
                completion_model="m",
                timeout_s=0.2,
                max_retries=1,
                backoff_s=0.01,
            )
        )
        with pytest.raises(ProviderUnavailable):
            provider.complete(request("hello"))
