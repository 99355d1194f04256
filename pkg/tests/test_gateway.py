import json
import logging

import pytest

from ciforge.errors import (
    AuthMissing,
    ConfigError,
    GatewayError,
    MalformedRemoteResponse,
    RateLimited,
    ReplayMiss,
)
from ciforge.gateway import (
    API_BASE_ENV,
    API_KEY_ENV,
    Cassette,
    ChatRequest,
    ChatResponse,
    Gateway,
    complete,
)
from helpers import ScriptedTransport, live_gateway, ok_body


def request(**overrides):
    values = dict(user_prompt="classify this", temperature=0.0, tag="t1")
    values.update(overrides)
    return ChatRequest(**values)


class TestChatRequest:
    def test_validation(self):
        with pytest.raises(ConfigError):
            request(temperature=-0.1)
        with pytest.raises(ConfigError):
            request(n_samples=0)
        with pytest.raises(ConfigError):
            request(max_tokens=0)

    def test_fingerprint_ignores_tag(self):
        assert request(tag="a").fingerprint() == request(tag="b").fingerprint()

    def test_fingerprint_covers_every_other_field(self):
        base = request()
        assert base.fingerprint() != request(user_prompt="other").fingerprint()
        assert base.fingerprint() != request(system_prompt="sys").fingerprint()
        assert base.fingerprint() != request(temperature=0.5).fingerprint()
        assert base.fingerprint() != request(n_samples=3).fingerprint()
        assert base.fingerprint() != request(max_tokens=9).fingerprint()

    def test_fingerprint_is_stable(self):
        assert request().fingerprint() == request().fingerprint()

    def test_json_round_trip(self):
        original = request(system_prompt="sys", n_samples=2, max_tokens=64)
        assert ChatRequest.from_json_obj(original.to_json_obj()) == original

    def test_response_json_round_trip(self):
        original = ChatResponse(
            texts=("a", "b"), model_name="m", token_usage=(3, 4)
        )
        assert ChatResponse.from_json_obj(original.to_json_obj()) == original


class TestCassette:
    def test_in_memory_record_and_lookup(self):
        cassette = Cassette()
        req = request()
        assert req.fingerprint() not in cassette
        cassette.record(req, ChatResponse(texts=("answer",)))
        assert req.fingerprint() in cassette
        assert len(cassette) == 1
        assert cassette.lookup(req.fingerprint()).texts == ("answer",)

    def test_file_backed_appends_and_last_entry_wins(self, tmp_path):
        path = tmp_path / "tape.jsonl"
        first = Cassette(path)
        req = request()
        first.record(req, ChatResponse(texts=("old",)))
        first.record(req, ChatResponse(texts=("new",)))
        lines = path.read_text().strip().split("\n")
        assert len(lines) == 2  # append-only; history preserved
        entry = json.loads(lines[0])
        assert set(entry) == {"fingerprint", "request", "response"}
        reloaded = Cassette(path)
        assert len(reloaded) == 1
        assert reloaded.lookup(req.fingerprint()).texts == ("new",)

    def test_missing_file_starts_empty(self, tmp_path):
        cassette = Cassette(tmp_path / "absent.jsonl")
        assert len(cassette) == 0


class TestReplay:
    def test_returns_recorded_response(self):
        cassette = Cassette()
        cassette.record(request(), ChatResponse(texts=("recorded",)))
        gateway = Gateway("replay", cassette=cassette)
        assert gateway.complete(request(tag="different")).texts == ("recorded",)

    def test_miss_raises(self):
        gateway = Gateway("replay", cassette=Cassette())
        with pytest.raises(ReplayMiss):
            gateway.complete(request())

    def test_short_sample_count_warns(self, caplog):
        cassette = Cassette()
        req = request(n_samples=3)
        cassette.record(req, ChatResponse(texts=("only one",)))
        gateway = Gateway("replay", cassette=cassette)
        with caplog.at_level(logging.WARNING, logger="ciforge.gateway"):
            response = gateway.complete(req)
        assert response.texts == ("only one",)
        assert any("1 of 3" in r.getMessage() for r in caplog.records)

    def test_replay_requires_cassette(self):
        with pytest.raises(ConfigError):
            Gateway("replay")

    def test_record_requires_cassette(self):
        with pytest.raises(ConfigError):
            Gateway("record")


class TestLive:
    def test_missing_credentials(self, monkeypatch):
        monkeypatch.delenv(API_BASE_ENV, raising=False)
        monkeypatch.delenv(API_KEY_ENV, raising=False)
        gateway = Gateway("live")
        with pytest.raises(AuthMissing):
            gateway.complete(request())

    def test_credentials_from_environment(self, monkeypatch):
        monkeypatch.setenv(API_BASE_ENV, "https://env.test/v1")
        monkeypatch.setenv(API_KEY_ENV, "env-key")
        transport = ScriptedTransport([(200, ok_body(["hi"]))])
        gateway = Gateway("live", transport=transport, sleep=lambda d: None)
        assert gateway.complete(request()).texts == ("hi",)
        call = transport.calls[0]
        assert call["url"] == "https://env.test/v1/chat/completions"
        assert call["headers"]["Authorization"] == "Bearer env-key"

    def test_payload_shape(self):
        transport = ScriptedTransport([(200, ok_body(["hi"]))])
        gateway = live_gateway(transport, model="gpt-4")
        req = request(
            system_prompt="be terse", temperature=0.7, n_samples=2, max_tokens=55
        )
        gateway.complete(req)
        payload = transport.calls[0]["payload"]
        assert payload == {
            "model": "gpt-4",
            "messages": [
                {"role": "system", "content": "be terse"},
                {"role": "user", "content": "classify this"},
            ],
            "n": 2,
            "temperature": 0.7,
            "max_tokens": 55,
        }

    def test_response_parsing(self):
        transport = ScriptedTransport([(200, ok_body(["a", "b"], model="served"))])
        response = live_gateway(transport).complete(request(n_samples=2))
        assert response.texts == ("a", "b")
        assert response.model_name == "served"
        assert response.token_usage == (7, 11)

    def test_malformed_body(self):
        transport = ScriptedTransport([(200, {"nonsense": True})])
        with pytest.raises(MalformedRemoteResponse):
            live_gateway(transport).complete(request())

    def test_retries_transient_statuses_with_backoff(self):
        transport = ScriptedTransport(
            [(500, {}), (429, {}), (200, ok_body(["late but fine"]))]
        )
        delays = []
        gateway = live_gateway(transport, sleep=delays.append)
        assert gateway.complete(request()).texts == ("late but fine",)
        assert len(transport.calls) == 3
        assert delays == [1.0, 2.0]

    def test_backoff_caps(self):
        transport = ScriptedTransport([(500, {})] * 3 + [(200, ok_body(["ok"]))])
        delays = []
        gateway = live_gateway(
            transport, sleep=delays.append, backoff_base=10.0, backoff_cap=12.0
        )
        gateway.complete(request())
        assert delays == [10.0, 12.0, 12.0]

    def test_rate_limit_exhaustion(self):
        transport = ScriptedTransport([(429, {})] * 4)
        gateway = live_gateway(transport, max_retries=3, sleep=lambda d: None)
        with pytest.raises(RateLimited):
            gateway.complete(request())
        assert len(transport.calls) == 4

    def test_server_error_exhaustion(self):
        transport = ScriptedTransport([(503, {})] * 3)
        gateway = live_gateway(transport, max_retries=2, sleep=lambda d: None)
        with pytest.raises(GatewayError) as excinfo:
            gateway.complete(request())
        assert not isinstance(excinfo.value, RateLimited)

    def test_transport_errors_retry_then_surface(self):
        transport = ScriptedTransport(
            [GatewayError("flaky"), (200, ok_body(["recovered"]))]
        )
        gateway = live_gateway(transport)
        assert gateway.complete(request()).texts == ("recovered",)

        hopeless = ScriptedTransport([GatewayError("down")] * 3)
        gateway = live_gateway(hopeless, max_retries=2)
        with pytest.raises(GatewayError):
            gateway.complete(request())
        assert len(hopeless.calls) == 3

    def test_client_errors_do_not_retry(self):
        transport = ScriptedTransport([(400, {})])
        with pytest.raises(GatewayError):
            live_gateway(transport).complete(request())
        assert len(transport.calls) == 1


class TestRecord:
    def test_record_then_replay_round_trip(self, tmp_path):
        path = tmp_path / "tape.jsonl"
        transport = ScriptedTransport([(200, ok_body(["fresh"]))])
        recorder = Gateway(
            "record",
            endpoint="https://example.test/v1",
            api_key="k",
            cassette=Cassette(path),
            transport=transport,
            sleep=lambda d: None,
        )
        live_response = recorder.complete(request())
        assert live_response.texts == ("fresh",)

        replayer = Gateway("replay", cassette=Cassette(path))
        assert replayer.complete(request()).texts == ("fresh",)
        assert len(transport.calls) == 1  # replay never re-contacts the remote


class TestMap:
    def test_replay_map_keeps_order(self):
        cassette = Cassette()
        requests = [request(user_prompt=f"prompt {i}") for i in range(5)]
        for i, req in enumerate(requests):
            cassette.record(req, ChatResponse(texts=(f"answer {i}",)))
        gateway = Gateway("replay", cassette=cassette)
        responses = gateway.map(requests)
        assert [r.texts[0] for r in responses] == [f"answer {i}" for i in range(5)]

    def test_parallel_map_keeps_order(self):
        def echo(url, headers, payload):
            return 200, ok_body(["echo: " + payload["messages"][-1]["content"]])

        gateway = live_gateway(echo, max_parallel=4)
        requests = [request(user_prompt=f"prompt {i}") for i in range(8)]
        responses = gateway.map(requests)
        assert [r.texts[0] for r in responses] == [
            f"echo: prompt {i}" for i in range(8)
        ]


def test_one_shot_helper():
    cassette = Cassette()
    cassette.record(request(), ChatResponse(texts=("one-shot answer",)))
    response = complete(request(), "replay", cassette=cassette)
    assert response.texts == ("one-shot answer",)
