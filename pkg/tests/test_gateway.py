import json

import httpx
import pytest

from chronoqa.errors import GatewayError
from chronoqa.gateway import ChatRequest, Gateway, ProviderConfig, cache_key

PROVIDER = ProviderConfig(
    name="test", base_url="http://api.test/v1", model="test-model", credential_env="TEST_TOKEN"
)


def request(**overrides):
    base = dict(model="test-model", system="sys", user="hello", temperature=0.0, max_retries=2)
    base.update(overrides)
    return ChatRequest(**base)


def chat_response(text):
    return httpx.Response(200, json={"choices": [{"message": {"content": text}}]})


class TestComplete:
    def test_success_and_auth_header(self, monkeypatch):
        monkeypatch.setenv("TEST_TOKEN", "sekrit")
        seen = {}

        def handler(req):
            seen["auth"] = req.headers.get("Authorization")
            seen["body"] = json.loads(req.content)
            return chat_response("Q: fine")

        gw = Gateway(PROVIDER, transport=httpx.MockTransport(handler))
        assert gw.complete(request()) == "Q: fine"
        assert seen["auth"] == "Bearer sekrit"
        assert seen["body"]["messages"][0] == {"role": "system", "content": "sys"}

    def test_retries_then_succeeds(self):
        calls = {"n": 0}

        def handler(req):
            calls["n"] += 1
            if calls["n"] < 3:
                return httpx.Response(503)
            return chat_response("ok")

        gw = Gateway(PROVIDER, transport=httpx.MockTransport(handler), backoff=0)
        assert gw.complete(request()) == "ok"
        assert calls["n"] == 3

    def test_exhausted_retries(self):
        def handler(req):
            raise httpx.ConnectError("unreachable")

        gw = Gateway(PROVIDER, transport=httpx.MockTransport(handler), backoff=0)
        with pytest.raises(GatewayError, match="exhausted 3 attempts"):
            gw.complete(request(max_retries=2))

    def test_auth_failure_not_retried(self):
        calls = {"n": 0}

        def handler(req):
            calls["n"] += 1
            return httpx.Response(401)

        gw = Gateway(PROVIDER, transport=httpx.MockTransport(handler), backoff=0)
        with pytest.raises(GatewayError, match="authentication"):
            gw.complete(request())
        assert calls["n"] == 1

    def test_non_text_response(self):
        def handler(req):
            return httpx.Response(200, json={"unexpected": True})

        gw = Gateway(PROVIDER, transport=httpx.MockTransport(handler))
        with pytest.raises(GatewayError, match="non-text"):
            gw.complete(request())

    def test_negative_temperature_rejected(self):
        with pytest.raises(ValueError):
            request(temperature=-0.1)


class TestCacheKey:
    def test_equal_requests_equal_keys(self):
        assert cache_key("http://a", request()) == cache_key("http://a", request())

    def test_any_field_change_changes_key(self):
        base = cache_key("http://a", request())
        assert cache_key("http://b", request()) != base
        assert cache_key("http://a", request(model="other")) != base
        assert cache_key("http://a", request(system="other")) != base
        assert cache_key("http://a", request(user="other")) != base
        assert cache_key("http://a", request(temperature=0.3)) != base


class TestCachedComplete:
    def test_second_call_serves_from_cache(self, tmp_path):
        calls = {"n": 0}

        def handler(req):
            calls["n"] += 1
            return chat_response("cached text")

        gw = Gateway(PROVIDER, cache_dir=tmp_path, transport=httpx.MockTransport(handler))
        assert gw.cached_complete(request()) == "cached text"
        assert gw.cached_complete(request()) == "cached text"
        assert calls["n"] == 1

    def test_warmed_cache_needs_no_transport(self, tmp_path):
        def handler(req):
            return chat_response("warm")

        Gateway(PROVIDER, cache_dir=tmp_path, transport=httpx.MockTransport(handler)).cached_complete(request())

        def exploding(req):
            raise AssertionError("network touched with a warm cache")

        gw = Gateway(PROVIDER, cache_dir=tmp_path, transport=httpx.MockTransport(exploding))
        assert gw.cached_complete(request()) == "warm"

    def test_temperature_change_is_a_miss(self, tmp_path):
        calls = {"n": 0}

        def handler(req):
            calls["n"] += 1
            return chat_response(f"call {calls['n']}")

        gw = Gateway(PROVIDER, cache_dir=tmp_path, transport=httpx.MockTransport(handler))
        assert gw.cached_complete(request(temperature=0.0)) == "call 1"
        assert gw.cached_complete(request(temperature=0.3)) == "call 2"

    def test_cache_stores_raw_text(self, tmp_path):
        def handler(req):
            return chat_response("verbatim payload")

        gw = Gateway(PROVIDER, cache_dir=tmp_path, transport=httpx.MockTransport(handler))
        gw.cached_complete(request())
        key = cache_key(PROVIDER.base_url, request())
        assert (tmp_path / key).read_text(encoding="utf-8") == "verbatim payload"

    def test_undecodable_cache_entry_refetched(self, tmp_path, caplog):
        def handler(req):
            return chat_response("fresh")

        gw = Gateway(PROVIDER, cache_dir=tmp_path, transport=httpx.MockTransport(handler))
        key = cache_key(PROVIDER.base_url, request())
        (tmp_path / key).write_bytes(b"\xff\xfe garbage \xff")
        with caplog.at_level("WARNING"):
            assert gw.cached_complete(request()) == "fresh"
        assert any("unreadable" in r.message for r in caplog.records)
        assert (tmp_path / key).read_text(encoding="utf-8") == "fresh"
