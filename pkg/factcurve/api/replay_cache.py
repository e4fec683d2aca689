import json
import os
import tempfile
import threading
from datetime import datetime, timezone

from factcurve.api.models import CacheEntry, ModelRequest, ModelResponse
from factcurve.utils.errors import MalformedPayloadError
from factcurve.utils.logger import setup_logger


class ReplayCache:
    """
    Content-addressed store of model responses.

    One JSON document per entry at <cache_dir>/<key[:2]>/<key>.json. Readers never
    lock; writers are serialized and publish entries with an atomic rename.
    """

    def __init__(self, cache_dir, logger=None):
        self.cache_dir = cache_dir
        self.logger = logger if logger else setup_logger()
        self._write_lock = threading.Lock()

    def path_for(self, key):
        return os.path.join(self.cache_dir, key[:2], f"{key}.json")

    def get(self, request):
        """
        Looks up the entry for a request.

        :return: CacheEntry, or None when the request was never recorded.
        """
        key = request.cache_key
        path = self.path_for(key)
        try:
            with open(path, "r", encoding="utf-8") as file:
                data = json.load(file)
        except FileNotFoundError:
            return None
        except json.JSONDecodeError as e:
            raise MalformedPayloadError(f"Corrupt cache entry {path}: {e}")

        try:
            stored = ModelRequest.from_dict(data["request"])
            response = ModelResponse(
                text=data["response"]["text"],
                cached=True,
                provider_meta=data["response"].get("provider_meta", {}),
            )
            created_at = data["created_at"]
        except (KeyError, TypeError, ValueError, AttributeError) as e:
            self.logger.error(f"Incomplete cache entry {path}: {e!r}")
            raise MalformedPayloadError(f"Incomplete cache entry {path}: {e!r}")
        if stored.cache_key != key:
            raise MalformedPayloadError(f"Cache entry {path} does not belong to key {key}.")
        self.logger.debug(f"Cache hit {key}")
        return CacheEntry(key=key, request=stored, response=response, created_at=created_at)

    def put(self, request, response, created_at=None):
        """Persists a response for a request and returns the written entry."""
        key = request.cache_key
        entry = CacheEntry(
            key=key,
            request=request,
            response=response,
            created_at=created_at or datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )
        path = self.path_for(key)
        payload = json.dumps(entry.to_dict(), sort_keys=True, ensure_ascii=False, indent=2) + "\n"

        with self._write_lock:
            os.makedirs(os.path.dirname(path), exist_ok=True)
            fd, tmp_path = tempfile.mkstemp(dir=os.path.dirname(path), suffix=".tmp")
            try:
                with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as file:
                    file.write(payload)
                os.replace(tmp_path, path)
            except BaseException:
                if os.path.exists(tmp_path):
                    os.unlink(tmp_path)
                raise
        self.logger.debug(f"Cached {key}")
        return entry
