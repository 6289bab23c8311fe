"""A fully synthetic end-to-end benchmark around the frozen pair.

Bundles everything a self-contained experiment needs: an encoder pair
whose vocabulary covers the class names and the mock generator's word
pool, a generated and screened text corpus, and a labeled synthetic image
test set aligned with the same encoders.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..corpus.dictionary import SynonymDictionary
from ..corpus.generate import CorpusResult, generate_corpus
from ..corpus.llm import FILLER_WORDS, MockLlmClient
from ..corpus.synth import SynthDataset, synth_dataset
from ..encoders import FrozenEncoderPair
from .config import StageConfig
from .infer import infer
from .metrics import evaluate_map
from .train import train_stage1, train_stage2

__all__ = ["SyntheticBenchmark", "build_benchmark", "BenchmarkScores", "run_benchmark"]

# words the mock client can emit besides keywords; the encoder vocabulary
# must cover them so corpus texts embed with few unknowns
_CONNECTORS = ("a", "and", "with", "beside", "in", "on")


@dataclass
class SyntheticBenchmark:
    class_names: list[str]
    encoders: FrozenEncoderPair
    dictionary: SynonymDictionary
    corpus: CorpusResult
    test_set: SynthDataset


def build_benchmark(
    class_names: list[str],
    corpus_size: int = 400,
    seed: int = 0,
    images_per_combo: int = 8,
    n_combos: int | None = 20,
    noise_std: float = 0.02,
    unlikely_rate: float = 0.0,
    keyword_drop_rate: float = 0.0,
    hw: int = 16,
    embed_dim: int = 48,
    patch_size: int = 4,
) -> SyntheticBenchmark:
    # embed_dim defaults to the patch dimensionality (4*4*3) so synthetic
    # patterns can realize any embedding direction; larger dims cap the
    # achievable image-text cosine at sqrt(patch_dim / embed_dim)
    vocab = list(class_names) + list(FILLER_WORDS) + list(_CONNECTORS)
    encoders = FrozenEncoderPair(vocab, embed_dim=embed_dim, patch_size=patch_size, seed=seed)
    dictionary = SynonymDictionary.identity(class_names)
    client = MockLlmClient(
        seed=seed, unlikely_rate=unlikely_rate, keyword_drop_rate=keyword_drop_rate
    )
    corpus = generate_corpus(
        list(class_names), corpus_size, client, dictionary, seed=seed
    )
    test_set = synth_dataset(
        list(class_names),
        encoders,
        images_per_combo=images_per_combo,
        noise_std=noise_std,
        seed=seed,
        n_combos=n_combos,
        hw=hw,
    )
    return SyntheticBenchmark(
        class_names=list(class_names),
        encoders=encoders,
        dictionary=dictionary,
        corpus=corpus,
        test_set=test_set,
    )


@dataclass
class BenchmarkScores:
    """mAPs of the fused and single-channel scorers on the test set."""

    fused_map: float
    visual_map: float
    text_map: float


def run_benchmark(
    bench: SyntheticBenchmark, cfg: StageConfig
) -> tuple[BenchmarkScores, "Checkpoint", "Checkpoint"]:
    """Train both stages on the benchmark corpus and score the test set."""
    from ..checkpoint import Checkpoint  # noqa: F401  (type only)

    s1 = train_stage1(bench.corpus.texts, bench.class_names, bench.encoders, cfg)
    s2 = train_stage2(bench.corpus.texts, s1, bench.encoders, cfg)
    fused = infer(bench.test_set.images, s2, bench.encoders, alpha=cfg.alpha)
    visual = infer(bench.test_set.images, s2, bench.encoders, alpha=1.0)
    text = infer(bench.test_set.images, s2, bench.encoders, alpha=0.0)
    labels = bench.test_set.labels
    scores = BenchmarkScores(
        fused_map=evaluate_map(fused.scores, labels)[0],
        visual_map=evaluate_map(visual.scores, labels)[0],
        text_map=evaluate_map(text.scores, labels)[0],
    )
    return scores, s1, s2
