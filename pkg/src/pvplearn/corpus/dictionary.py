"""Class synonym dictionary and the rule-based noun filter.

Generated texts only enter training if at least one class (or one of its
synonyms) appears in them. Matching is lemma-based: each surface token
expands to a small candidate set (plural and inflection stripping) and a
dictionary entry matches when all of its words are covered in order.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from ..errors import DictionaryError
from ..losses import LabelSets

__all__ = ["lemma_candidates", "SynonymDictionary", "FilteredText", "noun_filter"]

_TOKEN_RE = re.compile(r"[^a-z0-9]+")

_DOUBLED = re.compile(r"([b-df-hj-np-tv-z])\1$")


def tokenize_words(text: str) -> list[str]:
    return [w for w in _TOKEN_RE.split(text.lower()) if w]


def lemma_candidates(token: str) -> list[str]:
    """Possible base forms of a surface token, most specific first.

    Purely suffix-driven: no wordlist, so it over-generates on purpose
    ("glass" -> only "glass", but "sitting" -> "sitt", "sit", "sitte").
    Matching tolerates wrong candidates because they rarely collide with
    a dictionary entry.
    """
    out = [token]

    def add(c: str) -> None:
        if c and c not in out:
            out.append(c)

    if token.endswith("ies") and len(token) > 3:
        add(token[:-3] + "y")
    if token.endswith("es") and len(token) > 2:
        add(token[:-2])
    if token.endswith("s") and not token.endswith("ss") and len(token) > 1:
        add(token[:-1])
    if token.endswith("ing") and len(token) > 4:
        stem = token[:-3]
        add(stem)
        if _DOUBLED.search(stem):
            add(stem[:-1])
        add(stem + "e")
    if token.endswith("ed") and len(token) > 3:
        stem = token[:-2]
        add(stem)
        if _DOUBLED.search(stem):
            add(stem[:-1])
        add(stem + "e")
    return out


class SynonymDictionary:
    """Maps surface lemmas to class indices.

    One class per line: the canonical name first, synonyms after, comma
    separated. '#' starts a comment line. A lemma claimed by two classes
    is a configuration error and is rejected by name.
    """

    def __init__(self, lines: Iterable[str]):
        self.classes: list[str] = []
        # entry: tuple of words -> class index
        self._entries: dict[tuple[str, ...], int] = {}
        for raw in lines:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            names = [n.strip() for n in line.split(",") if n.strip()]
            if not names:
                continue
            idx = len(self.classes)
            self.classes.append(names[0])
            for name in names:
                words = tuple(tokenize_words(name))
                if not words:
                    raise DictionaryError(f"entry {name!r} has no usable words")
                prior = self._entries.get(words)
                if prior is not None and prior != idx:
                    raise DictionaryError(
                        f"lemma {' '.join(words)!r} claimed by both "
                        f"{self.classes[prior]!r} and {self.classes[idx]!r}"
                    )
                self._entries[words] = idx
        if not self.classes:
            raise DictionaryError("dictionary defines no classes")

    @classmethod
    def from_file(cls, path) -> "SynonymDictionary":
        return cls(Path(path).read_text(encoding="utf-8").splitlines())

    @classmethod
    def identity(cls, class_names: Iterable[str]) -> "SynonymDictionary":
        """A dictionary where each class matches only its own name."""
        return cls(list(class_names))

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def match(self, tokens: list[str]) -> set[int]:
        """Class indices whose entries occur (lemma-wise) in the tokens."""
        candidates = [set(lemma_candidates(t)) for t in tokens]
        found: set[int] = set()
        for words, idx in self._entries.items():
            if idx in found:
                continue
            k = len(words)
            for start in range(len(tokens) - k + 1):
                if all(words[j] in candidates[start + j] for j in range(k)):
                    found.add(idx)
                    break
        return found


@dataclass(frozen=True)
class FilteredText:
    """A kept text with its tokenization and derived label sets."""

    text: str
    tokens: tuple[str, ...]
    labels: LabelSets


def noun_filter(text: str, dictionary: SynonymDictionary) -> FilteredText | None:
    """Label a text by dictionary matching; None when nothing matches."""
    tokens = tokenize_words(text)
    matched = dictionary.match(tokens)
    if not matched:
        return None
    labels = LabelSets.from_positives(matched, dictionary.n_classes)
    return FilteredText(text=text, tokens=tuple(tokens), labels=labels)
