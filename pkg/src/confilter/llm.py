"""OpenAI-compatible chat client with retries and a prompt-level disk cache.

Every LLM role (generator, parser, labeler, confidence scorer, merger,
attacker, confusee, judge) goes through this one client with its own model
id. Cache key: SHA-256 of (role, model_id, prompt, decoding params); cache
hits never touch the network, which makes long runs resumable and cheap.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from pathlib import Path
from typing import Optional

import httpx

from .errors import ProtocolError, TransportError

API_KEY_ENV = "CONFILTER_API_KEY"


class PromptCache:
    """Append-only JSON file cache with atomic per-entry writes."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(role: str, model_id: str, prompt: str, params: dict) -> str:
        payload = json.dumps(
            {"role": role, "model": model_id, "prompt": prompt, "params": params},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str):
        path = self._path(key)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def put(self, key: str, value: dict) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(value, ensure_ascii=False), encoding="utf-8")
        os.replace(tmp, path)


class ChatClient:
    """Minimal chat-completions client; retries transient failures with
    exponential backoff and counts token usage for FLOPs accounting."""

    def __init__(
        self,
        base_url: str,
        api_key: Optional[str] = None,
        cache: Optional[PromptCache] = None,
        timeout: float = 120.0,
        retries: int = 3,
        backoff: float = 1.0,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV, "")
        self.cache = cache
        self.retries = retries
        self.backoff = backoff
        self._client = httpx.Client(timeout=timeout, transport=transport)
        self.network_calls = 0
        self.prompt_tokens = 0
        self.completion_tokens = 0
        self.approximate_usage = False

    def complete(
        self,
        model: str,
        prompt: str,
        temperature: float = 0.0,
        n: int = 1,
        role: str = "generic",
    ) -> list:
        """Return ``n`` completion texts for one prompt, via cache when warm."""
        params = {"temperature": temperature, "n": n}
        key = PromptCache.key(role, model, prompt, params) if self.cache else None
        if key:
            hit = self.cache.get(key)
            if hit is not None:
                return hit["texts"]
        texts, usage = self._request(model, prompt, temperature, n)
        self._count_usage(prompt, texts, usage)
        if key:
            self.cache.put(key, {"texts": texts})
        return texts

    def _request(self, model, prompt, temperature, n):
        body = {
            "model": model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": temperature,
            "n": n,
        }
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_exc = None
        for attempt in range(self.retries):
            try:
                resp = self._client.post(
                    f"{self.base_url}/v1/chat/completions", json=body, headers=headers
                )
                if resp.status_code in (429, 500, 502, 503, 504):
                    raise TransportError(f"status {resp.status_code}")
                resp.raise_for_status()
                self.network_calls += 1
                return self._parse(resp.json(), n)
            except (httpx.TransportError, httpx.HTTPStatusError, TransportError) as exc:
                last_exc = exc
                if attempt + 1 < self.retries:
                    time.sleep(self.backoff * 2**attempt)
        raise TransportError(f"chat endpoint unreachable: {last_exc}") from last_exc

    @staticmethod
    def _parse(doc, n):
        try:
            choices = doc["choices"]
            texts = [c["message"]["content"] for c in choices]
        except (KeyError, TypeError) as exc:
            raise ProtocolError(f"malformed chat response: {exc}") from exc
        if len(texts) < n:
            raise ProtocolError(f"requested {n} choices, got {len(texts)}")
        return texts[:n], doc.get("usage")

    def _count_usage(self, prompt, texts, usage):
        if isinstance(usage, dict) and "prompt_tokens" in usage:
            self.prompt_tokens += int(usage.get("prompt_tokens", 0))
            self.completion_tokens += int(usage.get("completion_tokens", 0))
        else:
            # No usage field: whitespace token estimate, flagged approximate.
            self.prompt_tokens += len(prompt.split())
            self.completion_tokens += sum(len(t.split()) for t in texts)
            self.approximate_usage = True

    def close(self) -> None:
        self._client.close()
