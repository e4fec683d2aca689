import openai
from openai import OpenAI

from factcurve.api.models import ChatProvider, ModelResponse
from factcurve.utils.errors import MalformedPayloadError, ProviderUnreachableError, RateLimitedError
from factcurve.utils.logger import setup_logger

# Any OpenAI-compatible chat-completions endpoint works: https://platform.openai.com/docs/api-reference/chat


class OpenAIChatAPI(ChatProvider):
    name = "openai"

    def __init__(self, api_key, base_url=None, timeout_s=120, logger=None):
        """
        Initialize the chat-completion wrapper.
        :param api_key: Provider API key.
        :param base_url: Endpoint URL (optional, defaults to the SDK's).
        :param timeout_s: Per-request timeout in seconds (optional).
        :param logger: Initialized logger (optional)
        """
        if logger is None:
            self.logger = setup_logger()
        else:
            self.logger = logger

        # Retries are owned by the gateway so that they are counted and logged in one place
        self.client = OpenAI(api_key=api_key, base_url=base_url, timeout=timeout_s, max_retries=0)
        self.logger.info(f"OpenAIChatAPI initialized ({base_url or 'default endpoint'}).")

    def complete(self, request):
        """
        Sends one single-turn chat completion.
        :param request: ModelRequest (model, prompt, temperature, max_tokens).
        :return: ModelResponse with the first choice's text.
        """
        try:
            completion = self.client.chat.completions.create(
                model=request.model_id,
                messages=[{"role": "user", "content": request.prompt}],
                temperature=request.temperature,
                max_tokens=request.max_tokens,
            )
        except openai.RateLimitError as e:
            self.logger.error(f"Rate limited by provider for {request.model_id}: {e}")
            raise RateLimitedError(str(e))
        except (openai.APIConnectionError, openai.InternalServerError) as e:
            self.logger.error(f"Provider unreachable for {request.model_id}: {e}")
            raise ProviderUnreachableError(str(e))
        except openai.APIStatusError as e:
            self.logger.error(f"Provider rejected request for {request.model_id}: {e}")
            raise MalformedPayloadError(f"HTTP {e.status_code}: {e}")
        except openai.APIError as e:
            self.logger.error(f"Provider returned an unusable response for {request.model_id}: {e}")
            raise MalformedPayloadError(f"Provider error: {e}")

        try:
            choice = completion.choices[0]
            text = choice.message.content or ""
            meta = {
                "provider": self.name,
                "model": completion.model,
                "finish_reason": choice.finish_reason,
            }
        except (AttributeError, IndexError, TypeError) as e:
            self.logger.error(f"Malformed completion payload for {request.model_id}: {e}")
            raise MalformedPayloadError(f"Malformed completion payload: {e}")

        self.logger.debug(f"Completion for {request.model_id}: {text!r}")
        return ModelResponse(text=text, cached=False, provider_meta=meta)
