from abc import ABC, abstractmethod
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Dict

DEFAULT_MAX_TOKENS = 1024


@dataclass(frozen=True)
class ModelRequest:
    """
    One chat-completion request.

    :param sample_index: Distinguishes repeated samples of the same prompt; it only
        enters the cache key when nonzero.
    """

    model_id: str
    prompt: str
    temperature: float = 0.0
    max_tokens: int = DEFAULT_MAX_TOKENS
    sample_index: int = 0

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("ModelRequest prompt must be nonempty.")
        if self.temperature < 0:
            raise ValueError(f"Temperature must be >= 0, got {self.temperature}.")
        if self.max_tokens <= 0:
            raise ValueError(f"max_tokens must be > 0, got {self.max_tokens}.")
        # 0 and 0.0 must hash alike
        object.__setattr__(self, "temperature", float(self.temperature))

    def to_dict(self):
        data = {
            "model_id": self.model_id,
            "prompt": self.prompt,
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        if self.sample_index:
            data["sample_index"] = self.sample_index
        return data

    @classmethod
    def from_dict(cls, data):
        return cls(
            model_id=data["model_id"],
            prompt=data["prompt"],
            temperature=data.get("temperature", 0.0),
            max_tokens=data.get("max_tokens", DEFAULT_MAX_TOKENS),
            sample_index=data.get("sample_index", 0),
        )

    def canonical(self):
        """Sorted-key compact JSON; the prompt is kept verbatim and floats use repr."""
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))

    @property
    def cache_key(self):
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ModelResponse:
    text: str
    cached: bool = False
    provider_meta: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self):
        return {"text": self.text, "provider_meta": dict(self.provider_meta)}


@dataclass(frozen=True)
class CacheEntry:
    key: str
    request: ModelRequest
    response: ModelResponse
    created_at: str

    def to_dict(self):
        return {
            "request": self.request.to_dict(),
            "response": self.response.to_dict(),
            "created_at": self.created_at,
        }


class ChatProvider(ABC):
    """Interface of a chat-completion backend: one request in, one response out."""

    name = "provider"

    @abstractmethod
    def complete(self, request):
        """
        :param request: ModelRequest to send.
        :return: ModelResponse with cached=False.
        :raises ProviderUnreachableError, RateLimitedError: transient failures, retried by the gateway.
        :raises MalformedPayloadError: the provider answered with an unusable payload.
        """
        pass
