"""Rating providers: canned fixtures for tests and an HTTP client for a live model."""
from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import httpx

from ..errors import FormatError
from ..scene import _parse_json
from .prompts import Mode

URL_ENV = "MRLAYOUT_PROVIDER_URL"
KEY_ENV = "MRLAYOUT_PROVIDER_KEY"


class ProviderError(RuntimeError):
    """Base class for provider failures."""


class ProviderTransportError(ProviderError):
    pass


class ProviderTimeoutError(ProviderError):
    pass


class ProviderStatusError(ProviderError):
    def __init__(self, status: int, message: str = ""):
        self.status = status
        super().__init__(f"provider returned HTTP {status}" + (f": {message}" if message else ""))


class RateLimitError(ProviderStatusError):
    def __init__(self, message: str = ""):
        super().__init__(429, message)


class MissingFixtureError(ProviderError):
    pass


class Provider(Protocol):
    def query(self, prompt: str, image: str, *, mode: Mode, seed: int) -> str: ...


class MockProvider:
    """Returns the canned response stored for ``(image, mode, seed)``."""

    def __init__(self, fixtures: dict[tuple[str, str, int], str]):
        self.fixtures = dict(fixtures)

    @classmethod
    def from_json(cls, text: str) -> MockProvider:
        """A list of ``{"image", "mode", "seed", "response"}`` records."""
        out: dict[tuple[str, str, int], str] = {}
        for d in _parse_json(text).list():
            f = d.obj(("image", "mode", "seed", "response"))
            try:
                mode = Mode(f["mode"].string()).value
            except ValueError as exc:
                raise FormatError(str(exc), f["mode"].path) from exc
            seed = f["seed"].number()
            if not seed.is_integer():
                raise FormatError("seed must be an integer", f["seed"].path)
            key = (f["image"].string(), mode, int(seed))
            if key in out:
                raise FormatError(f"duplicate fixture {key}", d.path)
            out[key] = f["response"].string()
        return cls(out)

    def query(self, prompt: str, image: str, *, mode: Mode, seed: int) -> str:
        key = (image, Mode(mode).value, int(seed))
        try:
            return self.fixtures[key]
        except KeyError:
            raise MissingFixtureError(f"no fixture for image={image!r} mode={key[1]} seed={seed}") from None


def dump_fixtures(fixtures: dict[tuple[str, str, int], str]) -> str:
    records = [{"image": i, "mode": m, "seed": s, "response": fixtures[(i, m, s)]}
               for i, m, s in sorted(fixtures)]
    return json.dumps(records, indent=2) + "\n"


@dataclass
class LiveProvider:
    """POSTs ``{"prompt", "image", "mode", "seed"}`` as JSON and returns the response body.

    Transport errors, timeouts and non-2xx statuses raise distinct errors. Each
    kind is retried up to ``max_retries`` times when listed in ``retry_on``,
    sleeping ``backoff * 2**attempt`` seconds in between.
    """

    url: str
    api_key: str | None = None
    timeout: float = 60.0
    max_retries: int = 3
    backoff: float = 1.0
    retry_on: tuple[type[ProviderError], ...] = (ProviderTransportError, ProviderTimeoutError,
                                                 ProviderStatusError)
    sleep: Callable[[float], None] = time.sleep
    client: httpx.Client | None = field(default=None, repr=False)

    @classmethod
    def from_env(cls, **kwargs) -> LiveProvider:
        url = os.environ.get(URL_ENV)
        if not url:
            raise ProviderError(f"set {URL_ENV} to the provider endpoint")
        return cls(url, os.environ.get(KEY_ENV), **kwargs)

    def _post(self, payload: dict) -> str:
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        client = self.client or httpx.Client()
        try:
            resp = client.post(self.url, json=payload, headers=headers, timeout=self.timeout)
        except httpx.TimeoutException as exc:
            raise ProviderTimeoutError(str(exc) or "request timed out") from exc
        except httpx.TransportError as exc:
            raise ProviderTransportError(str(exc) or type(exc).__name__) from exc
        finally:
            if self.client is None:
                client.close()
        if resp.status_code == 429:
            raise RateLimitError(resp.text[:200])
        if not 200 <= resp.status_code < 300:
            raise ProviderStatusError(resp.status_code, resp.text[:200])
        return resp.text

    def query(self, prompt: str, image: str, *, mode: Mode, seed: int) -> str:
        payload = {"prompt": prompt, "image": image, "mode": Mode(mode).value, "seed": int(seed)}
        attempt = 0
        while True:
            try:
                return self._post(payload)
            except ProviderError as exc:
                if attempt >= self.max_retries or not isinstance(exc, self.retry_on):
                    raise
                self.sleep(self.backoff * 2 ** attempt)
                attempt += 1
