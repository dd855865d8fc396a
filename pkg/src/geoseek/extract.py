"""Conclusion extraction from reasoning text.

The consistency reward needs to know what location a reasoning chain
actually argues for, judged without ever seeing the candidate's final
answer. Extractors therefore accept only the three reasoning strings; the
answer type never appears in this module.

PatternExtractor is the deterministic default used in tests and offline
runs. LlmExtractor sends the reasoning to a chat-completion endpoint and
falls back to the pattern rules when the endpoint misbehaves.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from importlib import resources
from typing import Protocol, Sequence, runtime_checkable

import regex

from .rewards import AddressHierarchy

log = logging.getLogger(__name__)

JUDGE_URL_ENV = "GEOSEEK_JUDGE_URL"
JUDGE_TOKEN_ENV = "GEOSEEK_JUDGE_TOKEN"

PROMPT_ASSET = "judge_prompt_v1.txt"


@runtime_checkable
class ConclusionExtractor(Protocol):
    """Maps per-level reasoning text to the address it concludes.

    Implementations receive reasoning strings only. Keeping the final
    answer out of the call signature is what makes the consistency reward
    meaningful.
    """

    def extractor_id(self) -> str: ...

    def extract(self, reasoning: Sequence[str]) -> AddressHierarchy: ...


# A place phrase: optional leading article, then a capitalized word run,
# allowing lowercase connectives (of/de/la/...) inside multi-word names.
_PLACE = (
    r"(?:[Tt]he\s+)?"
    r"(\p{Lu}[\w'’.\-]*"
    r"(?:\s+(?:of|the|de|del|da|do|du|la|le|van|von|am|an|upon|sur|\p{Lu}[\w'’.\-]*))*)"
)

# Declarative assertion rules, scanned over the whole level text; the
# match that starts last wins. Order within the list does not matter.
_ASSERTION_RULES = [
    regex.compile(r"(?:country|region|city|town|place|location)\s*[:\-]\s*" + _PLACE),
    regex.compile(
        r"\b(?:this is|it is|it's|we are in|i am in|located in|situated in|"
        r"somewhere in|must be|appears to be|looks like|likely|probably)\s+" + _PLACE
    ),
    regex.compile(
        r"\b(?:indicates?|indicating|suggests?|suggesting|points?\s+to|"
        r"confirms?|confirming|means)\s+(?:that\s+)?(?:this\s+is\s+)?" + _PLACE
    ),
]

_SENTENCE_SPLIT = regex.compile(r"[.!?;\n]+")
_PLACE_ONLY = regex.compile(_PLACE)

# Words that can start a capitalized phrase without naming anything.
_NON_PLACE = {
    "the", "a", "an", "this", "that", "these", "those", "it", "its",
    "i", "we", "they", "there", "here", "my", "our", "their",
}


def _clean_phrase(phrase: str) -> str:
    phrase = phrase.strip().strip(".,;:!?")
    words = phrase.split()
    while words and words[0].lower() in _NON_PLACE:
        words = words[1:]
    # Trailing connectives left over from a greedy multi-word match.
    while words and words[-1].lower() in ("of", "the", "in", "de", "la"):
        words = words[:-1]
    return " ".join(words)


def _extract_level(text: str) -> str:
    text = text.strip()
    if not text:
        return ""
    best_start, best_phrase = -1, ""
    for rule in _ASSERTION_RULES:
        for match in rule.finditer(text):
            phrase = _clean_phrase(match.group(1))
            if phrase and match.start() >= best_start:
                best_start, best_phrase = match.start(), phrase
    if best_phrase:
        return best_phrase
    # Fallback: last proper-noun phrase of the last sentence.
    sentences = [s.strip() for s in _SENTENCE_SPLIT.split(text) if s.strip()]
    if not sentences:
        return ""
    candidates = [
        _clean_phrase(m.group(1)) for m in _PLACE_ONLY.finditer(sentences[-1])
    ]
    candidates = [c for c in candidates if c]
    return candidates[-1] if candidates else ""


class PatternExtractor:
    """Deterministic rule-based extractor.

    Per level it takes the last declarative place assertion in the text
    (labelled forms like "country: X", copulas like "this is X", and
    evidential verbs like "indicates X"), falling back to the final
    proper-noun phrase of the last sentence. A level it cannot read maps
    to the empty string, which simply fails the consistency indicator.
    """

    def extractor_id(self) -> str:
        return "pattern-v1"

    def extract(self, reasoning: Sequence[str]) -> AddressHierarchy:
        if len(reasoning) != 3:
            raise ValueError(f"expected 3 reasoning levels, got {len(reasoning)}")
        country, region, precise = (_extract_level(text) for text in reasoning)
        return AddressHierarchy(country=country, region=region, precise=precise)


def load_judge_prompt() -> str:
    """The versioned extraction prompt shipped with the package."""
    return (
        resources.files("geoseek").joinpath("assets", PROMPT_ASSET).read_text("utf-8")
    )


class LlmExtractor:
    """Extractor backed by a chat-completion HTTP endpoint.

    Sends the three reasoning strings with the fixed extraction prompt and
    expects the reply content to be a JSON object with country/region/
    precise keys. Three attempts with exponential backoff; any terminal
    failure falls back to the pattern rules so a flaky judge can never
    poison a reward batch. Fallbacks are counted and logged.
    """

    def __init__(
        self,
        url=None,
        token=None,
        session=None,
        max_in_flight: int = 4,
        attempts: int = 3,
        backoff: float = 0.5,
        sleep=time.sleep,
    ):
        self.url = url if url is not None else os.environ.get(JUDGE_URL_ENV)
        self.token = token if token is not None else os.environ.get(JUDGE_TOKEN_ENV)
        if session is None and self.url:
            import requests

            session = requests.Session()
        self._session = session
        self._gate = threading.Semaphore(max_in_flight)
        self._attempts = attempts
        self._backoff = backoff
        self._sleep = sleep
        self._fallback = PatternExtractor()
        self.degraded_count = 0

    def extractor_id(self) -> str:
        return f"llm:{self.url}" if self.url else "llm:unconfigured"

    def extract(self, reasoning: Sequence[str]) -> AddressHierarchy:
        if len(reasoning) != 3:
            raise ValueError(f"expected 3 reasoning levels, got {len(reasoning)}")
        if not self.url:
            return self._fallback.extract(reasoning)
        for attempt in range(self._attempts):
            try:
                return self._request(reasoning)
            except Exception as exc:  # noqa: BLE001 - any judge failure degrades
                log.warning(
                    "judge attempt %d/%d failed: %s", attempt + 1, self._attempts, exc
                )
                if attempt + 1 < self._attempts:
                    self._sleep(self._backoff * (2**attempt))
        self.degraded_count += 1
        log.warning("judge unreachable, falling back to pattern extraction")
        return self._fallback.extract(reasoning)

    def _request(self, reasoning: Sequence[str]) -> AddressHierarchy:
        headers = {}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        payload = {
            "messages": [
                {"role": "system", "content": load_judge_prompt()},
                {
                    "role": "user",
                    "content": json.dumps(
                        {
                            "reasoning_country": reasoning[0],
                            "reasoning_region": reasoning[1],
                            "reasoning_precise": reasoning[2],
                        },
                        ensure_ascii=False,
                    ),
                },
            ],
            "temperature": 0,
        }
        with self._gate:
            resp = self._session.post(self.url, json=payload, headers=headers)
        resp.raise_for_status()
        content = resp.json()["choices"][0]["message"]["content"]
        parsed = json.loads(content)
        return AddressHierarchy(
            country=str(parsed.get("country", "")),
            region=str(parsed.get("region", "")),
            precise=str(parsed.get("precise", "")),
        )
