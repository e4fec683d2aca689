import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor

from dotenv import load_dotenv

from factcurve.api.models import ModelRequest
from factcurve.api.openai_api import OpenAIChatAPI
from factcurve.api.replay_cache import ReplayCache
from factcurve.utils.errors import (
    CacheMissError,
    ConfigError,
    GatewayError,
    ProviderUnreachableError,
    RateLimitedError,
)
from factcurve.utils.logger import setup_logger

API_KEY_ENV = "FACTCURVE_API_KEY"
CACHE_DIR_ENV = "FACTCURVE_CACHE_DIR"

RECORD = "record"
REPLAY = "replay"

# Transient failures worth another attempt
RETRYABLE_ERRORS = (ProviderUnreachableError, RateLimitedError)


class LLMGateway:
    def __init__(self, provider=None, cache=None, mode=RECORD, retries=3, backoff_s=1.0,
                 max_in_flight=4, sleep=time.sleep, logger=None):
        """
        Uniform "ask an LLM" access with record/replay caching.

        :param provider: ChatProvider used in record mode (optional in replay mode).
        :param cache: ReplayCache holding recorded responses (optional in record mode).
        :param mode: "record" calls the provider on a cache miss, "replay" never does.
        :param retries: Attempts per request on transport errors and rate limits.
        :param backoff_s: First backoff delay; doubles after each failed attempt.
        :param max_in_flight: Default bound on concurrent provider calls for complete_many.
        :param sleep: Sleep function (injectable for tests).
        :param logger: Logger instance (optional).
        """
        self.logger = logger if logger else setup_logger()
        if mode not in (RECORD, REPLAY):
            raise ConfigError(f"Unsupported gateway mode: {mode}")
        if mode == RECORD and provider is None:
            raise ConfigError("Record mode needs a configured provider.")
        if mode == REPLAY and cache is None:
            raise ConfigError("Replay mode needs a cache directory.")

        self.provider = provider
        self.cache = cache
        self.mode = mode
        self.retries = max(1, retries)
        self.backoff_s = backoff_s
        self.max_in_flight = max(1, max_in_flight)
        self._sleep = sleep
        self._counter_lock = threading.Lock()
        self.provider_calls = 0
        self.logger.info(f"LLMGateway initialized in {mode} mode.")

    def complete(self, req):
        """
        Answers one request from the cache or, in record mode, from the provider.

        :param req: ModelRequest.
        :return: ModelResponse; cached=True when it came from the cache.
        """
        if self.cache is not None:
            entry = self.cache.get(req)
            if entry is not None:
                return entry.response

        if self.mode == REPLAY:
            raise CacheMissError(req.cache_key)

        response = self._call_with_retry(req)
        if self.cache is not None:
            self.cache.put(req, response)
        return response

    def _call_with_retry(self, req):
        delay = self.backoff_s
        for attempt in range(1, self.retries + 1):
            with self._counter_lock:
                self.provider_calls += 1
            try:
                return self.provider.complete(req)
            except RETRYABLE_ERRORS as e:
                if attempt == self.retries:
                    self.logger.error(f"Giving up on {req.model_id} after {attempt} attempts: {e}")
                    raise
                self.logger.warning(f"Attempt {attempt}/{self.retries} failed for {req.model_id}: {e}; retrying in {delay}s")
                self._sleep(delay)
                delay *= 2

    def complete_many(self, reqs, max_in_flight=None, stage="requests"):
        """
        Answers many requests with bounded parallelism.

        :param reqs: Sequence of ModelRequest.
        :param max_in_flight: Maximum concurrent requests (default: gateway setting).
        :param stage: Name used in progress logging.
        :return: List aligned with reqs; each item is a ModelResponse or the GatewayError
                 raised for that request. One failure never cancels the others.
        """
        max_in_flight = self.max_in_flight if max_in_flight is None else max_in_flight
        if max_in_flight < 1:
            raise ValueError(f"max_in_flight must be >= 1, got {max_in_flight}.")
        reqs = list(reqs)
        if not reqs:
            return []

        done = [0]
        done_lock = threading.Lock()
        step = max(1, len(reqs) // 10)

        def run_one(req):
            try:
                result = self.complete(req)
            except GatewayError as e:
                result = e
            with done_lock:
                done[0] += 1
                if done[0] % step == 0 or done[0] == len(reqs):
                    self.logger.info(f"{stage}: {done[0]}/{len(reqs)}")
            return result

        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            futures = [pool.submit(run_one, req) for req in reqs]
            return [future.result() for future in futures]


def build_gateway(config, mode=None, cache_dir=None, logger=None):
    """
    Creates the gateway described by a ConfigLoader.

    :param config: ConfigLoader with "provider" and "gateway" sections.
    :param mode: Overrides gateway.mode ("record" or "replay").
    :param cache_dir: Overrides FACTCURVE_CACHE_DIR and gateway.cache_dir.
    :return: LLMGateway.
    """
    logger = logger if logger else setup_logger()
    load_dotenv()
    gateway_cfg = config.section("gateway")
    provider_cfg = config.section("provider")

    mode = mode or gateway_cfg.get("mode", RECORD)
    cache_dir = cache_dir or os.environ.get(CACHE_DIR_ENV) or gateway_cfg.get("cache_dir", "cache")
    cache = ReplayCache(cache_dir, logger=logger)

    provider = None
    if mode == RECORD:
        api_key = os.environ.get(API_KEY_ENV)
        if not api_key:
            raise ConfigError(f"Record mode needs the {API_KEY_ENV} environment variable.")
        provider = OpenAIChatAPI(
            api_key=api_key,
            base_url=provider_cfg.get("base_url"),
            timeout_s=provider_cfg.get("timeout_s", 120),
            logger=logger,
        )

    return LLMGateway(
        provider=provider,
        cache=cache,
        mode=mode,
        retries=gateway_cfg.get("retries", 3),
        backoff_s=gateway_cfg.get("backoff_s", 1.0),
        max_in_flight=gateway_cfg.get("max_in_flight", 4),
        logger=logger,
    )


def make_request(model_id, prompt, config=None, temperature=0.0, sample_index=0):
    """ModelRequest with max_tokens taken from the gateway config."""
    max_tokens = 1024
    if config is not None:
        max_tokens = config.section("gateway").get("max_tokens", max_tokens)
    return ModelRequest(model_id=model_id, prompt=prompt, temperature=temperature,
                        max_tokens=max_tokens, sample_index=sample_index)
