import json
import threading
import time
from http.server import BaseHTTPRequestHandler, HTTPServer

import httpx
import pytest

from kgqa.llm_gateway import (
    ChatTurn,
    GatewayError,
    GenerationParams,
    RemoteBackend,
    RetryPolicy,
    ScriptedBackend,
    ScriptEntry,
    ScriptError,
    chat_endpoint,
    load_script,
    with_retry,
)

PROMPT = "Line one\nQuestion: ünïcode \"quotes\" and {braces}\n  trailing spaces  "


class _Stub(BaseHTTPRequestHandler):
    received: list = []
    status = 200

    def do_POST(self):
        body = self.rfile.read(int(self.headers["Content-Length"]))
        doc = json.loads(body)
        type(self).received.append((self.path, dict(self.headers), doc))
        if type(self).status != 200:
            self.send_response(type(self).status)
            self.end_headers()
            self.wfile.write(b"busy")
            return
        reply = {"choices": [{"message": {"role": "assistant", "content": doc["messages"][-1]["content"]}}]}
        out = json.dumps(reply).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(out)))
        self.end_headers()
        self.wfile.write(out)

    def log_message(self, *args):
        pass


@pytest.fixture
def stub_server():
    _Stub.received = []
    _Stub.status = 200
    server = HTTPServer(("127.0.0.1", 0), _Stub)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"http://127.0.0.1:{server.server_address[1]}/v1", _Stub
    server.shutdown()
    server.server_close()


def test_remote_backend_round_trip_against_stub(stub_server):
    url, stub = stub_server
    backend = RemoteBackend(url, "toy-model", api_key="secret", timeout=5)
    params = GenerationParams(temperature=0.0, top_p=1.0, max_new_tokens=64, stop_sequences=("Observation",))
    assert backend.complete([ChatTurn("user", PROMPT)], params) == PROMPT
    path, headers, doc = stub.received[0]
    assert path == "/v1/chat/completions"
    assert headers["Authorization"] == "Bearer secret"
    assert doc == {
        "model": "toy-model",
        "messages": [{"role": "user", "content": PROMPT}],
        "temperature": 0.0,
        "top_p": 1.0,
        "max_tokens": 64,
        "stop": ["Observation"],
    }
    backend.close()


def test_server_error_is_retryable(stub_server):
    url, stub = stub_server
    stub.status = 503
    with pytest.raises(GatewayError) as err:
        RemoteBackend(url, "m", timeout=5).complete([ChatTurn("user", "hi")], GenerationParams())
    assert err.value.retryable and "503" in str(err.value)


def _mock(handler):
    return httpx.Client(transport=httpx.MockTransport(handler))


def test_client_error_is_not_retryable():
    backend = RemoteBackend("http://x/v1", "m", client=_mock(lambda r: httpx.Response(400, text="bad")))
    with pytest.raises(GatewayError) as err:
        backend.complete([ChatTurn("user", "hi")], GenerationParams())
    assert not err.value.retryable


def test_malformed_body_is_gateway_error():
    backend = RemoteBackend("http://x/v1", "m", client=_mock(lambda r: httpx.Response(200, json={"nope": 1})))
    with pytest.raises(GatewayError, match="malformed"):
        backend.complete([ChatTurn("user", "hi")], GenerationParams())


def test_transport_failure_is_gateway_error():
    def boom(request):
        raise httpx.ConnectError("refused", request=request)
    with pytest.raises(GatewayError, match="transport"):
        RemoteBackend("http://x/v1", "m", client=_mock(boom)).complete([ChatTurn("user", "hi")], GenerationParams())


def test_chat_endpoint():
    assert chat_endpoint("http://h/v1/") == "http://h/v1/chat/completions"
    assert chat_endpoint("http://h/v1/chat/completions") == "http://h/v1/chat/completions"


def test_from_env_requires_url_and_model(monkeypatch):
    monkeypatch.delenv("GC_LLM_URL", raising=False)
    monkeypatch.delenv("GC_LLM_MODEL", raising=False)
    with pytest.raises(ValueError):
        RemoteBackend.from_env()
    monkeypatch.setenv("GC_LLM_URL", "http://h/v1")
    monkeypatch.setenv("GC_LLM_MODEL", "m")
    assert RemoteBackend.from_env().model == "m"


def test_invalid_turns_and_params():
    with pytest.raises(ValueError):
        ChatTurn("tool", "x")
    with pytest.raises(ValueError):
        ChatTurn("user", "")
    with pytest.raises(ValueError):
        GenerationParams(top_p=0)
    with pytest.raises(ValueError):
        ScriptedBackend([]).complete([], GenerationParams())


# --- scripted backend --------------------------------------------------------------

def test_scripted_replies_in_order_and_checks_match():
    backend = ScriptedBackend([ScriptEntry("one", "Plan 1:"), ScriptEntry("two")])
    assert backend.complete([ChatTurn("user", "... Plan 1:")], GenerationParams()) == "one"
    assert backend.complete([ChatTurn("user", "anything")], GenerationParams()) == "two"
    assert backend.exhausted and len(backend.calls) == 2


def test_scripted_mismatch_fails_loudly():
    backend = ScriptedBackend([ScriptEntry("one", "Thought 1:")])
    with pytest.raises(ScriptError, match="Thought 1:"):
        backend.complete([ChatTurn("user", "Plan 1:")], GenerationParams())
    assert backend.cursor == 0


def test_scripted_exhaustion_fails_loudly():
    backend = ScriptedBackend([("x", "r")])
    backend.complete([ChatTurn("user", "x")], GenerationParams())
    with pytest.raises(ScriptError, match="exhausted"):
        backend.complete([ChatTurn("user", "x")], GenerationParams())


def test_load_script(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"script": [{"reply": "a", "match": "m"}, {"reply": "b"}]}))
    assert load_script(p) == [ScriptEntry("a", "m"), ScriptEntry("b")]


# --- retry -----------------------------------------------------------------------

class _Flaky:
    name = "flaky"

    def __init__(self, failures, retryable=True):
        self.failures, self.retryable, self.stamps = failures, retryable, []

    def complete(self, turns, params):
        self.stamps.append(time.monotonic())
        if len(self.stamps) <= self.failures:
            raise GatewayError(self.name, "down", self.retryable)
        return "ok"


def test_retry_recovers_after_two_failures():
    inner = _Flaky(2)
    sleeps = []
    backend = with_retry(inner, RetryPolicy(3, (0.5, 1.0)), sleep=sleeps.append)
    assert backend.complete([ChatTurn("user", "x")], GenerationParams()) == "ok"
    assert len(inner.stamps) == 3 and sleeps == [0.5, 1.0]


def test_retry_gives_up_after_max_attempts():
    inner = _Flaky(10)
    backend = with_retry(inner, RetryPolicy(2, (0.0,)), sleep=lambda s: None)
    with pytest.raises(GatewayError):
        backend.complete([ChatTurn("user", "x")], GenerationParams())
    assert len(inner.stamps) == 2


def test_non_retryable_error_is_not_retried():
    inner = _Flaky(10, retryable=False)
    with pytest.raises(GatewayError):
        with_retry(inner, RetryPolicy(3), sleep=lambda s: None).complete([ChatTurn("user", "x")], GenerationParams())
    assert len(inner.stamps) == 1


def test_real_backoff_spacing():
    inner = _Flaky(2)
    with_retry(inner, RetryPolicy(3, (0.01, 0.02))).complete([ChatTurn("user", "x")], GenerationParams())
    gaps = [b - a for a, b in zip(inner.stamps, inner.stamps[1:])]
    assert gaps[0] >= 0.01 and gaps[1] >= 0.02


def test_policy_delay_clamps_to_last_value():
    policy = RetryPolicy(5, (1.0, 2.0))
    assert [policy.delay(i) for i in (1, 2, 3, 4)] == [1.0, 2.0, 2.0, 2.0]
