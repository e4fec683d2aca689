import httpx
import json
import openai
import os
import threading
import time
import pytest
from hypothesis import given, settings, strategies as st
from types import SimpleNamespace
from unittest.mock import Mock

from factcurve.api.api_manager import RECORD, REPLAY, LLMGateway, build_gateway, make_request
from factcurve.api.models import ChatProvider, ModelRequest, ModelResponse
from factcurve.api.openai_api import OpenAIChatAPI
from factcurve.api.replay_cache import ReplayCache
from factcurve.utils.errors import (
    CacheMissError,
    ConfigError,
    MalformedPayloadError,
    ProviderUnreachableError,
    RateLimitedError,
)

model_requests = st.builds(
    ModelRequest,
    model_id=st.text(max_size=12),
    prompt=st.text(min_size=1, max_size=60),
    temperature=st.floats(min_value=0.0, max_value=2.0, allow_nan=False),
    max_tokens=st.integers(min_value=1, max_value=4096),
    sample_index=st.integers(min_value=0, max_value=5),
)


@pytest.fixture
def mock_provider():
    """Create mock provider for testing"""
    provider = Mock(spec=ChatProvider)
    provider.complete.side_effect = lambda req: ModelResponse(text=f"answer to {req.prompt}")
    return provider


@pytest.fixture
def sleeps():
    """Recorded backoff delays"""
    return []


@pytest.fixture
def gateway(mock_provider, cache_dir, sleeps, mock_logger):
    return LLMGateway(provider=mock_provider, cache=ReplayCache(cache_dir, logger=mock_logger), mode=RECORD,
                      retries=3, backoff_s=1.0, sleep=sleeps.append, logger=mock_logger)


class TestModelRequest:
    """Tests for request validation and cache keys"""

    def test_same_request_same_key(self):
        """Should derive identical keys for identical requests"""
        a = ModelRequest("gpt-4-turbo", "Tell me a bio of Ko Itakura.")
        b = ModelRequest("gpt-4-turbo", "Tell me a bio of Ko Itakura.")

        assert a.cache_key == b.cache_key
        assert len(a.cache_key) == 64

    def test_integer_and_float_temperature_agree(self):
        """Temperature 0 and 0.0 should hash alike"""
        assert ModelRequest("m", "p", temperature=0).cache_key == ModelRequest("m", "p", temperature=0.0).cache_key

    def test_key_sensitive_to_fields(self):
        """Any change to model, prompt, temperature, max_tokens or sample should change the key"""
        base = ModelRequest("m", "prompt")
        variants = [
            ModelRequest("m2", "prompt"),
            ModelRequest("m", "prompt "),
            ModelRequest("m", "prompt", temperature=0.7),
            ModelRequest("m", "prompt", max_tokens=16),
            ModelRequest("m", "prompt", sample_index=1),
        ]
        keys = {base.cache_key} | {v.cache_key for v in variants}
        assert len(keys) == 6

    def test_sample_zero_omitted(self):
        """The default sample index should not appear in the canonical form"""
        assert "sample_index" not in ModelRequest("m", "p").canonical()

    @settings(max_examples=200)
    @given(st.lists(model_requests, unique=True, max_size=20))
    def test_distinct_requests_distinct_keys(self, requests):
        """Distinct requests should never share a cache key"""
        assert len({r.cache_key for r in requests}) == len(requests)
        assert json.loads(ModelRequest("m", "p", sample_index=2).canonical())["sample_index"] == 2

    @pytest.mark.parametrize("kwargs", [{"prompt": ""}, {"prompt": "p", "temperature": -0.1},
                                        {"prompt": "p", "max_tokens": 0}])
    def test_invalid_requests(self, kwargs):
        """Should reject empty prompts, negative temperatures and non-positive max_tokens"""
        with pytest.raises(ValueError):
            ModelRequest(model_id="m", **kwargs)

    def test_make_request_uses_config(self, config):
        """Should take max_tokens from the gateway config section"""
        request = make_request("m", "p", config, temperature=0.7, sample_index=3)

        assert request.max_tokens == 1024
        assert request.temperature == 0.7
        assert request.sample_index == 3


class TestGatewayComplete:
    """Tests for LLMGateway.complete()"""

    def test_record_then_cached(self, gateway, mock_provider):
        """Should call the provider once and answer the repeat from the cache"""
        request = ModelRequest("m", "hello")

        first = gateway.complete(request)
        second = gateway.complete(request)

        assert first.text == second.text == "answer to hello"
        assert first.cached is False
        assert second.cached is True
        assert mock_provider.complete.call_count == 1
        assert gateway.provider_calls == 1

    def test_replay_serves_recorded(self, gateway, replay_gateway):
        """A replay gateway over the same cache should answer without any provider"""
        request = ModelRequest("m", "hello")
        gateway.complete(request)

        response = replay_gateway.complete(request)
        assert response.text == "answer to hello"
        assert response.cached is True
        assert replay_gateway.provider_calls == 0

    def test_replay_miss(self, replay_gateway):
        """Should raise CacheMissError carrying the key in replay mode"""
        request = ModelRequest("m", "never recorded")

        with pytest.raises(CacheMissError) as excinfo:
            replay_gateway.complete(request)
        assert excinfo.value.key == request.cache_key

    def test_retries_transient_errors(self, gateway, mock_provider, sleeps):
        """Should retry transport errors and rate limits with doubling backoff"""
        mock_provider.complete.side_effect = [
            ProviderUnreachableError("connection reset"),
            RateLimitedError("429"),
            ModelResponse(text="finally"),
        ]

        response = gateway.complete(ModelRequest("m", "p"))

        assert response.text == "finally"
        assert sleeps == [1.0, 2.0]
        assert gateway.provider_calls == 3

    def test_gives_up_after_retries(self, gateway, mock_provider, sleeps, mock_logger):
        """Should surface the last transient error once the attempts are used up"""
        mock_provider.complete.side_effect = ProviderUnreachableError("down")

        with pytest.raises(ProviderUnreachableError):
            gateway.complete(ModelRequest("m", "p"))
        assert gateway.provider_calls == 3
        assert sleeps == [1.0, 2.0]
        mock_logger.error.assert_called()

    def test_malformed_payload_not_retried(self, gateway, mock_provider):
        """Should not retry a malformed payload"""
        mock_provider.complete.side_effect = MalformedPayloadError("no choices")

        with pytest.raises(MalformedPayloadError):
            gateway.complete(ModelRequest("m", "p"))
        assert gateway.provider_calls == 1

    def test_failed_request_not_cached(self, gateway, mock_provider, replay_gateway):
        """Errors should never be written to the cache"""
        mock_provider.complete.side_effect = MalformedPayloadError("no choices")
        request = ModelRequest("m", "p")

        with pytest.raises(MalformedPayloadError):
            gateway.complete(request)
        with pytest.raises(CacheMissError):
            replay_gateway.complete(request)


class TestGatewayCompleteMany:
    """Tests for LLMGateway.complete_many()"""

    def test_results_aligned_with_requests(self, gateway, mock_provider):
        """Should return one result per request, in request order"""
        requests = [ModelRequest("m", f"prompt {i}") for i in range(12)]

        results = gateway.complete_many(requests, max_in_flight=3)

        assert [r.text for r in results] == [f"answer to prompt {i}" for i in range(12)]

    def test_errors_returned_as_values(self, gateway, mock_provider):
        """One failing request should not cancel the others"""
        def answer(req):
            if req.prompt == "bad":
                raise MalformedPayloadError("broken")
            return ModelResponse(text="ok")
        mock_provider.complete.side_effect = answer

        results = gateway.complete_many([ModelRequest("m", "good"), ModelRequest("m", "bad"),
                                         ModelRequest("m", "also good")])

        assert results[0].text == "ok"
        assert isinstance(results[1], MalformedPayloadError)
        assert results[2].text == "ok"

    def test_sdk_error_returned_as_value(self, cache_dir, mock_logger):
        """An SDK error outside the known statuses should come back as that request's error"""
        api = OpenAIChatAPI(api_key="test-key", logger=mock_logger)
        api.client = Mock()

        def create(model, messages, temperature, max_tokens):
            if messages[0]["content"] == "bad":
                request = httpx.Request("POST", "https://api.example.invalid/v1/chat/completions")
                raise openai.APIResponseValidationError(response=httpx.Response(200, request=request), body=None)
            message = SimpleNamespace(content="ok")
            return SimpleNamespace(model=model, choices=[SimpleNamespace(message=message, finish_reason="stop")])
        api.client.chat.completions.create.side_effect = create
        gateway = LLMGateway(provider=api, cache=ReplayCache(cache_dir, logger=mock_logger), mode=RECORD,
                             sleep=lambda seconds: None, logger=mock_logger)

        results = gateway.complete_many([ModelRequest("m", "good"), ModelRequest("m", "bad"),
                                         ModelRequest("m", "also good")])

        assert results[0].text == "ok"
        assert isinstance(results[1], MalformedPayloadError)
        assert results[2].text == "ok"
        assert gateway.provider_calls == 3

    def test_bounded_concurrency(self, cache_dir, mock_logger):
        """Should never run more than max_in_flight provider calls at once"""
        lock = threading.Lock()
        state = {"active": 0, "peak": 0}

        class SlowProvider(ChatProvider):
            def complete(self, request):
                with lock:
                    state["active"] += 1
                    state["peak"] = max(state["peak"], state["active"])
                time.sleep(0.01)
                with lock:
                    state["active"] -= 1
                return ModelResponse(text=request.prompt)

        gateway = LLMGateway(provider=SlowProvider(), cache=ReplayCache(cache_dir, logger=mock_logger),
                             mode=RECORD, logger=mock_logger)
        results = gateway.complete_many([ModelRequest("m", f"p{i}") for i in range(20)], max_in_flight=4)

        assert [r.text for r in results] == [f"p{i}" for i in range(20)]
        assert 1 <= state["peak"] <= 4

    def test_empty_batch(self, gateway):
        """Should return an empty list for no requests"""
        assert gateway.complete_many([]) == []

    def test_invalid_bound(self, gateway):
        """Should reject max_in_flight below one"""
        with pytest.raises(ValueError):
            gateway.complete_many([ModelRequest("m", "p")], max_in_flight=0)


class TestReplayCache:
    """Tests for the on-disk cache layout"""

    def test_entry_layout(self, cache_dir, mock_logger):
        """Should store one JSON document per key under a two-character prefix directory"""
        cache = ReplayCache(cache_dir, logger=mock_logger)
        request = ModelRequest("m", "p")
        cache.put(request, ModelResponse(text="answer", provider_meta={"model": "m"}),
                  created_at="2026-01-01T00:00:00+00:00")

        path = os.path.join(cache_dir, request.cache_key[:2], f"{request.cache_key}.json")
        with open(path, "r", encoding="utf-8") as file:
            stored = json.load(file)

        assert stored["request"]["prompt"] == "p"
        assert stored["response"]["text"] == "answer"
        assert stored["created_at"] == "2026-01-01T00:00:00+00:00"
        assert not [name for name in os.listdir(os.path.dirname(path)) if name.endswith(".tmp")]

    def test_missing_entry(self, cache_dir, mock_logger):
        """Should return None for a request never stored"""
        assert ReplayCache(cache_dir, logger=mock_logger).get(ModelRequest("m", "p")) is None

    def test_corrupt_entry(self, cache_dir, mock_logger):
        """Should raise MalformedPayloadError for an unreadable entry"""
        cache = ReplayCache(cache_dir, logger=mock_logger)
        request = ModelRequest("m", "p")
        path = cache.path_for(request.cache_key)
        os.makedirs(os.path.dirname(path))
        with open(path, "w", encoding="utf-8") as file:
            file.write("{ not json")

        with pytest.raises(MalformedPayloadError):
            cache.get(request)

    @pytest.mark.parametrize("content", [
        {},
        [],
        {"request": {"model_id": "m", "prompt": "p"}, "created_at": "2026-01-01T00:00:00+00:00"},
        {"request": {"model_id": "m", "prompt": ""}, "response": {"text": "a"}, "created_at": "x"},
        {"request": {"model_id": "m", "prompt": "p"}, "response": "a", "created_at": "x"},
    ])
    def test_incomplete_entry(self, cache_dir, mock_logger, content):
        """Should raise MalformedPayloadError for valid JSON that is not a complete entry"""
        cache = ReplayCache(cache_dir, logger=mock_logger)
        request = ModelRequest("m", "p")
        path = cache.path_for(request.cache_key)
        os.makedirs(os.path.dirname(path))
        with open(path, "w", encoding="utf-8") as file:
            json.dump(content, file)

        with pytest.raises(MalformedPayloadError, match="Incomplete cache entry"):
            cache.get(request)


class TestGatewayConstruction:
    """Tests for gateway configuration"""

    def test_unknown_mode(self, mock_provider, mock_logger):
        """Should reject unknown modes"""
        with pytest.raises(ConfigError):
            LLMGateway(provider=mock_provider, mode="live", logger=mock_logger)

    def test_record_needs_provider(self, mock_logger):
        """Should reject record mode without a provider"""
        with pytest.raises(ConfigError):
            LLMGateway(mode=RECORD, logger=mock_logger)

    def test_replay_needs_cache(self, mock_logger):
        """Should reject replay mode without a cache"""
        with pytest.raises(ConfigError):
            LLMGateway(mode=REPLAY, logger=mock_logger)

    def test_build_replay_without_credentials(self, config, cache_dir, mock_logger, monkeypatch):
        """Replay mode should need no API key"""
        monkeypatch.delenv("FACTCURVE_API_KEY", raising=False)

        gateway = build_gateway(config, mode=REPLAY, cache_dir=cache_dir, logger=mock_logger)
        assert gateway.mode == REPLAY
        assert gateway.provider is None
        assert gateway.cache.cache_dir == cache_dir

    def test_build_record_without_credentials(self, config, cache_dir, mock_logger, monkeypatch):
        """Record mode should fail fast without an API key"""
        monkeypatch.delenv("FACTCURVE_API_KEY", raising=False)

        with pytest.raises(ConfigError, match="FACTCURVE_API_KEY"):
            build_gateway(config, mode=RECORD, cache_dir=cache_dir, logger=mock_logger)
