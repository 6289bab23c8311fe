"""Corpus generation: sample keywords, generate, screen, label, persist.

For each kept text the pipeline records which pipeline gate rejected the
others, so a run is auditable from its stats alone. Serialization is
JSONL with one {"text", "labels"} object per line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import ContractError, InputError, TransportError
from ..numerics import philox_generator
from .dictionary import SynonymDictionary, noun_filter
from .llm import LlmClient, build_generation_prompt, build_rationality_prompt, judge_rationality

__all__ = ["CorpusText", "CorpusStats", "CorpusResult", "generate_corpus",
           "save_corpus", "load_corpus"]

STREAM_KEYWORDS = 200


@dataclass(frozen=True)
class CorpusText:
    """One kept training text with its positive class indices."""

    text: str
    labels: tuple[int, ...]


@dataclass
class CorpusStats:
    queried: int = 0
    kept: int = 0
    dropped_unlikely: int = 0
    dropped_unmatched: int = 0
    dropped_overlong: int = 0
    transport_failures: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class CorpusResult:
    texts: list[CorpusText] = field(default_factory=list)
    stats: CorpusStats = field(default_factory=CorpusStats)


def generate_corpus(
    class_names: list[str],
    count: int,
    client: LlmClient,
    dictionary: SynonymDictionary,
    seed: int,
    max_words: int = 25,
    retry_budget: int | None = None,
) -> CorpusResult:
    """Generate until ``count`` texts survive all three gates.

    Gates, in order: word-count cap, rationality verdict, noun filter.
    Only filter-matched texts are kept, so every kept text has at least
    one positive class. Raises when the budget runs out first.
    """
    if count < 1:
        raise ContractError(f"count must be positive, got {count}")
    if dictionary.classes != list(class_names):
        raise ContractError(
            "dictionary classes must match class_names in order; "
            f"got {dictionary.classes} vs {list(class_names)}"
        )
    budget = retry_budget if retry_budget is not None else count * 50
    rng = philox_generator(seed, STREAM_KEYWORDS)
    result = CorpusResult()
    stats = result.stats
    while stats.kept < count:
        if stats.queried >= budget:
            raise ContractError(
                f"retry budget {budget} exhausted with {stats.kept}/{count} texts kept"
            )
        stats.queried += 1
        n_keywords = int(rng.integers(1, 4))
        chosen = [class_names[i] for i in rng.choice(len(class_names),
                                                     size=n_keywords, replace=False)]
        try:
            text = client.complete(build_generation_prompt(chosen))
            if len(text.split()) > max_words:
                stats.dropped_overlong += 1
                continue
            verdict = client.complete(build_rationality_prompt(text))
        except TransportError:
            stats.transport_failures += 1
            continue
        if not judge_rationality(verdict):
            stats.dropped_unlikely += 1
            continue
        filtered = noun_filter(text, dictionary)
        if filtered is None:
            stats.dropped_unmatched += 1
            continue
        result.texts.append(
            CorpusText(text=text, labels=filtered.labels.positives)
        )
        stats.kept += 1
    return result


def save_corpus(path, texts: list[CorpusText]) -> None:
    lines = [
        json.dumps({"text": t.text, "labels": list(t.labels)}, ensure_ascii=False)
        for t in texts
    ]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def load_corpus(path) -> list[CorpusText]:
    out: list[CorpusText] = []
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            text = obj["text"]
            labels = tuple(int(x) for x in obj["labels"])
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise InputError(f"bad corpus line {lineno}: {exc}") from exc
        if not labels:
            raise InputError(f"corpus line {lineno} has no labels")
        out.append(CorpusText(text=text, labels=labels))
    return out
