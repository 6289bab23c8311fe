"""Language-model clients and the two fixed prompt templates.

The generation prompt asks for one short sentence containing the chosen
keywords; the rationality prompt asks whether the described scene could
occur, and a reply is accepted only if it says likely without saying
unlikely. The mock client is deterministic given its seed and call
sequence; the HTTP client talks to a chat-completions endpoint with
retries and an on-disk replay cache.
"""

from __future__ import annotations

import hashlib
import json
import re
import time
from pathlib import Path
from typing import Protocol

from ..errors import ParameterError, TransportError
from ..numerics import philox_generator

__all__ = [
    "build_generation_prompt",
    "build_rationality_prompt",
    "judge_rationality",
    "LlmClient",
    "MockLlmClient",
    "HttpLlmClient",
    "FILLER_WORDS",
]

GENERATION_PREFIX = "Make a sentence to describe a photo."
RATIONALITY_PREFIX = "Will the scene described in this text appear in reality?"

_KEYWORDS_RE = re.compile(r"\{(.*)\}")


def build_generation_prompt(keywords: list[str]) -> str:
    """The sentence-generation instruction for one to three keywords."""
    if not 1 <= len(keywords) <= 3:
        raise ParameterError(
            f"generation takes between 1 and 3 keywords, got {len(keywords)}"
        )
    joined = ", ".join(keywords)
    return (
        "Make a sentence to describe a photo. Requirements: Each sentence "
        f"should be less than 15 words and include keywords: {{{joined}}}."
    )


def build_rationality_prompt(text: str) -> str:
    return f'Will the scene described in this text appear in reality? Scene: "{text}"'


def judge_rationality(reply: str) -> bool:
    """Keep iff the reply says likely and does not say unlikely.

    'unlikely' wins over 'likely' because the former contains the latter
    as a substring; both checks are case-insensitive.
    """
    lower = reply.lower()
    if "unlikely" in lower:
        return False
    return "likely" in lower


class LlmClient(Protocol):
    def complete(self, prompt: str) -> str: ...


FILLER_WORDS = (
    "the", "morning", "view", "quiet", "street", "near", "window",
    "light", "corner", "small", "room", "park", "shadow", "wall",
    "old", "evening", "floor", "large", "busy", "scene",
)

_LIKELY_REPLIES = (
    "Yes, likely.",
    "Likely.",
    "This scene is likely to appear in reality.",
    "It is LIKELY that this scene occurs.",
)

_UNLIKELY_REPLIES = (
    "Unlikely.",
    "No, unlikely.",
    "This scene is unlikely to appear in reality.",
    "It is UNLIKELY such a scene occurs.",
)


class MockLlmClient:
    """Offline stand-in producing keyword sentences and verdicts.

    Output depends only on (seed, prompt, how many times that prompt has
    been asked), so full runs replay bit-identically while repeated
    identical prompts still vary like a sampling model would.

    unlikely_rate: fraction of rationality verdicts that reject.
    keyword_drop_rate: fraction of generated sentences that ignore the
    requested keywords entirely.
    """

    def __init__(
        self, seed: int, unlikely_rate: float = 0.0, keyword_drop_rate: float = 0.0
    ):
        if not 0.0 <= unlikely_rate <= 1.0:
            raise ParameterError(f"unlikely_rate must be in [0, 1], got {unlikely_rate}")
        if not 0.0 <= keyword_drop_rate <= 1.0:
            raise ParameterError(
                f"keyword_drop_rate must be in [0, 1], got {keyword_drop_rate}"
            )
        self.seed = int(seed)
        self.unlikely_rate = float(unlikely_rate)
        self.keyword_drop_rate = float(keyword_drop_rate)
        self._counts: dict[str, int] = {}

    def _rng(self, prompt: str):
        occurrence = self._counts.get(prompt, 0)
        self._counts[prompt] = occurrence + 1
        digest = hashlib.sha256(f"{prompt}#{occurrence}".encode("utf-8")).digest()
        stream = int.from_bytes(digest[:8], "little")
        return philox_generator(self.seed, stream)

    def complete(self, prompt: str) -> str:
        rng = self._rng(prompt)
        if prompt.startswith(GENERATION_PREFIX):
            return self._generate_sentence(prompt, rng)
        if prompt.startswith(RATIONALITY_PREFIX):
            if rng.random() < self.unlikely_rate:
                return str(rng.choice(_UNLIKELY_REPLIES))
            return str(rng.choice(_LIKELY_REPLIES))
        return "OK."

    def _generate_sentence(self, prompt: str, rng) -> str:
        match = _KEYWORDS_RE.search(prompt)
        keywords = [k.strip() for k in match.group(1).split(",")] if match else []
        if not keywords or rng.random() < self.keyword_drop_rate:
            n = int(rng.integers(5, 9))
            words = [str(w) for w in rng.choice(FILLER_WORDS, size=n)]
        else:
            words = ["a" if rng.random() < 0.5 else "the"]
            if rng.random() < 0.4:
                words.append(str(rng.choice(("small", "large", "old", "quiet"))))
            words.append(self._surface(keywords[0], rng))
            for kw in keywords[1:]:
                words.append(str(rng.choice(("and", "with", "near", "beside"))))
                words.append("a" if rng.random() < 0.5 else "the")
                words.append(self._surface(kw, rng))
            if rng.random() < 0.7:
                words += ["in", "the", str(rng.choice(("park", "room", "street", "corner")))]
        sentence = " ".join(words)
        return sentence[0].upper() + sentence[1:] + "."

    @staticmethod
    def _surface(keyword: str, rng) -> str:
        if rng.random() < 0.3:
            if keyword.endswith(("ch", "sh", "s", "x", "z")):
                return keyword + "es"
            return keyword + "s"
        return keyword


class HttpLlmClient:
    """Chat-completions client with retries and a deterministic replay cache.

    The cache key includes how many times the exact prompt was issued in
    this session, so regenerating a corpus replays the original sampled
    variety instead of collapsing repeats to one reply.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 30.0,
        max_retries: int = 3,
        cache_dir=None,
    ):
        import os

        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key if api_key is not None else os.environ.get("PVP_LLM_KEY")
        self.timeout = timeout
        self.max_retries = int(max_retries)
        self.cache_dir = Path(cache_dir) if cache_dir else None
        if self.cache_dir:
            self.cache_dir.mkdir(parents=True, exist_ok=True)
        self._counts: dict[str, int] = {}

    def _cache_path(self, prompt: str, occurrence: int) -> Path | None:
        if not self.cache_dir:
            return None
        digest = hashlib.sha256(
            f"{self.model}\x00{prompt}\x00{occurrence}".encode("utf-8")
        ).hexdigest()
        return self.cache_dir / f"{digest}.json"

    def complete(self, prompt: str) -> str:
        import requests

        occurrence = self._counts.get(prompt, 0)
        self._counts[prompt] = occurrence + 1
        cache_path = self._cache_path(prompt, occurrence)
        if cache_path and cache_path.exists():
            return json.loads(cache_path.read_text(encoding="utf-8"))["reply"]
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
        }
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                resp = requests.post(
                    self.endpoint, json=body, headers=headers, timeout=self.timeout
                )
                if resp.status_code != 200:
                    raise TransportError(
                        f"endpoint returned HTTP {resp.status_code}: {resp.text[:200]}"
                    )
                reply = resp.json()["choices"][0]["message"]["content"]
                if cache_path:
                    cache_path.write_text(
                        json.dumps({"prompt": prompt, "reply": reply}),
                        encoding="utf-8",
                    )
                return reply
            except (TransportError, KeyError, ValueError) as exc:
                last_error = exc
            except Exception as exc:  # connection errors, timeouts
                last_error = exc
            if attempt + 1 < self.max_retries:
                time.sleep(0.5 * 2**attempt)
        raise TransportError(
            f"request failed after {self.max_retries} attempts: {last_error}"
        )
