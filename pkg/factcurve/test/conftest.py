import hashlib
import os
import re
from unittest.mock import Mock

import pytest

from factcurve.api.api_manager import RECORD, REPLAY, LLMGateway
from factcurve.api.models import ChatProvider, ModelResponse
from factcurve.api.replay_cache import ReplayCache
from factcurve.utils.config import ConfigLoader

FIXTURES_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "fixtures")

_BIO_REQUEST = re.compile(r"Tell me a bio of (.+)\.\s*$")
_SENTENCE_LINE = re.compile(r"^Sentence: (.+)$", re.MULTILINE)


def _pick(prompt, n):
    """Deterministic choice among n options, keyed on the prompt text."""
    return hashlib.sha256(prompt.encode("utf-8")).digest()[0] % n


class ScriptedProvider(ChatProvider):
    """Answers every prompt shape the pipeline sends, deterministically and offline."""

    name = "scripted"

    def __init__(self):
        self.requests = []

    def answer(self, prompt):
        if "(C) None of the above" in prompt:
            return ("(A) True", "(B) False", "(C) None of the above")[_pick(prompt, 3)]
        if "Proposed Answer:" in prompt:
            return ("(A) True", "(B) False")[_pick(prompt, 2)]
        if "Is this statement true or false?" in prompt:
            return ("True.", "False.")[_pick(prompt, 2)]
        if "Please ask a question and provide the answer" in prompt:
            claim = prompt.strip().splitlines()[-1]
            return f"What does the bio state? # {claim}"
        if "Please breakdown the following sentence" in prompt:
            sentence = _SENTENCE_LINE.search(prompt).group(1)
            return f"- {sentence}"
        match = _BIO_REQUEST.search(prompt)
        if match:
            entity = match.group(1)
            return f"{entity} is a public figure. {entity} was born in a small town. {entity} is still active."
        return "I cannot answer that."

    def complete(self, request):
        self.requests.append(request)
        return ModelResponse(text=self.answer(request.prompt), cached=False,
                             provider_meta={"provider": self.name, "model": request.model_id})


@pytest.fixture
def mock_logger():
    """Create mock logger for testing"""
    return Mock()


@pytest.fixture
def fixture_path():
    """Resolve a file shipped under test/fixtures"""
    return lambda name: os.path.join(FIXTURES_DIR, name)


@pytest.fixture
def corpus_path(fixture_path):
    return fixture_path("corpus.jsonl")


@pytest.fixture
def scripted_provider():
    return ScriptedProvider()


@pytest.fixture
def cache_dir(tmp_path):
    return str(tmp_path / "cache")


@pytest.fixture
def record_gateway(scripted_provider, cache_dir, mock_logger):
    """Record-mode gateway backed by the scripted provider and a temporary cache"""
    return LLMGateway(provider=scripted_provider, cache=ReplayCache(cache_dir, logger=mock_logger),
                      mode=RECORD, sleep=lambda seconds: None, logger=mock_logger)


@pytest.fixture
def replay_gateway(cache_dir, mock_logger):
    """Replay-mode gateway over the same temporary cache, with no provider at all"""
    return LLMGateway(cache=ReplayCache(cache_dir, logger=mock_logger), mode=REPLAY, logger=mock_logger)


@pytest.fixture
def config():
    return ConfigLoader()
