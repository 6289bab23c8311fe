"""Text corpus generation, screening, and synthetic image data."""

from .dictionary import FilteredText, SynonymDictionary, lemma_candidates, noun_filter
from .generate import (
    CorpusResult,
    CorpusStats,
    CorpusText,
    generate_corpus,
    load_corpus,
    save_corpus,
)
from .llm import (
    HttpLlmClient,
    MockLlmClient,
    build_generation_prompt,
    build_rationality_prompt,
    judge_rationality,
)
from .synth import (
    SynthDataset,
    class_pattern,
    decorrelated_targets,
    load_synth,
    save_synth,
    synth_dataset,
)

__all__ = [
    "lemma_candidates",
    "SynonymDictionary",
    "FilteredText",
    "noun_filter",
    "CorpusText",
    "CorpusStats",
    "CorpusResult",
    "generate_corpus",
    "save_corpus",
    "load_corpus",
    "build_generation_prompt",
    "build_rationality_prompt",
    "judge_rationality",
    "MockLlmClient",
    "HttpLlmClient",
    "class_pattern",
    "SynthDataset",
    "decorrelated_targets",
    "synth_dataset",
    "save_synth",
    "load_synth",
]
