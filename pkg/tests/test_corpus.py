"""Corpus pipeline: templates, screening, lemma matching, synthetic data."""

import json

import numpy as np
import pytest

from pvplearn.corpus import (
    MockLlmClient,
    SynonymDictionary,
    build_generation_prompt,
    build_rationality_prompt,
    class_pattern,
    decorrelated_targets,
    generate_corpus,
    judge_rationality,
    lemma_candidates,
    load_corpus,
    load_synth,
    noun_filter,
    save_corpus,
    save_synth,
    synth_dataset,
)
from pvplearn.corpus.generate import CorpusText
from pvplearn.encoders import FrozenEncoderPair
from pvplearn.errors import (
    ContractError,
    DictionaryError,
    InputError,
    ParameterError,
    TransportError,
)

CLASSES = ["bench", "person", "dog", "cat", "tree", "car", "kite", "boat"]


class TestTemplates:
    def test_generation_prompt_exact(self):
        got = build_generation_prompt(["bench", "person"])
        assert got == (
            "Make a sentence to describe a photo. Requirements: Each sentence "
            "should be less than 15 words and include keywords: {bench, person}."
        )

    def test_generation_prompt_single(self):
        assert build_generation_prompt(["dog"]).endswith("keywords: {dog}.")

    def test_generation_prompt_arity(self):
        with pytest.raises(ParameterError):
            build_generation_prompt([])
        with pytest.raises(ParameterError):
            build_generation_prompt(["a", "b", "c", "d"])

    def test_rationality_prompt_exact(self):
        got = build_rationality_prompt("A dog on a bench.")
        assert got == (
            'Will the scene described in this text appear in reality? '
            'Scene: "A dog on a bench."'
        )


class TestJudge:
    @pytest.mark.parametrize(
        "reply,keep",
        [
            ("Yes, likely.", True),
            ("likely", True),
            ("This is LIKELY to happen.", True),
            ("Unlikely.", False),
            ("unlikely", False),
            ("It is UNLIKELY.", False),
            # 'unlikely' contains 'likely'; rejection must win
            ("likely? no, unlikely", False),
            ("I cannot tell.", False),
            ("", False),
        ],
    )
    def test_cases(self, reply, keep):
        assert judge_rationality(reply) is keep


class TestLemmaCandidates:
    @pytest.mark.parametrize(
        "token,expected",
        [
            ("dogs", "dog"),
            ("benches", "bench"),
            ("puppies", "puppy"),
            ("boxes", "box"),
            ("sitting", "sit"),
            ("making", "make"),
            ("stopped", "stop"),
            ("moved", "move"),
            ("jumped", "jump"),
        ],
    )
    def test_table(self, token, expected):
        assert expected in lemma_candidates(token)

    def test_identity_always_first(self):
        assert lemma_candidates("dog")[0] == "dog"
        assert lemma_candidates("glass") == ["glass"]

    def test_no_duplicates(self):
        for token in ["benches", "sitting", "classes", "stopped"]:
            cands = lemma_candidates(token)
            assert len(cands) == len(set(cands))


class TestSynonymDictionary:
    def test_parse_and_match(self):
        d = SynonymDictionary(
            ["# comment", "", "person, human, people", "bench, seat"]
        )
        assert d.classes == ["person", "bench"]
        assert d.match(["a", "human", "here"]) == {0}
        assert d.match(["two", "seats"]) == {1}

    def test_match_lemmatized(self):
        d = SynonymDictionary(["dog", "bench"])
        assert d.match(["dogs", "and", "benches"]) == {0, 1}

    def test_multiword_entry(self):
        d = SynonymDictionary(["traffic light, stop light", "car"])
        assert d.match(["a", "stop", "light", "and", "cars"]) == {0, 1}
        assert d.match(["stop", "then", "light"]) == set()

    def test_duplicate_lemma_rejected(self):
        with pytest.raises(DictionaryError, match="seat"):
            SynonymDictionary(["bench, seat", "chair, seat"])

    def test_same_class_duplicate_allowed(self):
        d = SynonymDictionary(["bench, bench"])
        assert d.classes == ["bench"]

    def test_empty_rejected(self):
        with pytest.raises(DictionaryError):
            SynonymDictionary(["# nothing"])

    def test_identity_helper(self):
        d = SynonymDictionary.identity(CLASSES)
        assert d.classes == CLASSES
        assert d.match(["kite"]) == {6}

    def test_file_round_trip(self, tmp_path):
        path = tmp_path / "dict.txt"
        path.write_text("person, human\nbench\n")
        d = SynonymDictionary.from_file(path)
        assert d.classes == ["person", "bench"]


class TestNounFilter:
    def test_bench_person_example(self):
        d = SynonymDictionary.identity(CLASSES)
        got = noun_filter("A bench in a post office with a person sitting on it", d)
        assert got is not None
        assert got.labels.positives == (0, 1)  # bench, person
        names = [CLASSES[i] for i in got.labels.positives]
        assert names == ["bench", "person"]

    def test_unmatched_returns_none(self):
        d = SynonymDictionary.identity(CLASSES)
        assert noun_filter("An empty room with nothing inside", d) is None

    def test_plural_and_synonym(self):
        d = SynonymDictionary(["person, human", "bench"])
        got = noun_filter("Two humans near the benches.", d)
        assert got.labels.positives == (0, 1)


class TestMockClient:
    def test_deterministic_given_sequence(self):
        prompts = [build_generation_prompt(["dog"]), build_generation_prompt(["cat"])]
        a = MockLlmClient(seed=5)
        b = MockLlmClient(seed=5)
        assert [a.complete(p) for p in prompts] == [b.complete(p) for p in prompts]

    def test_repeats_vary_but_replay(self):
        p = build_generation_prompt(["dog"])
        a = MockLlmClient(seed=5)
        first, second = a.complete(p), a.complete(p)
        assert first != second  # occurrence counter decollides repeats
        b = MockLlmClient(seed=5)
        assert [b.complete(p), b.complete(p)] == [first, second]

    def test_keywords_present(self):
        client = MockLlmClient(seed=1)
        text = client.complete(build_generation_prompt(["bench", "kite"]))
        low = text.lower()
        assert "bench" in low and "kite" in low

    def test_rates_validation(self):
        with pytest.raises(ParameterError):
            MockLlmClient(seed=1, unlikely_rate=1.5)
        with pytest.raises(ParameterError):
            MockLlmClient(seed=1, keyword_drop_rate=-0.1)

    def test_unlikely_rate_rough_frequency(self):
        client = MockLlmClient(seed=3, unlikely_rate=0.5)
        verdicts = [
            client.complete(build_rationality_prompt(f"text {i}")) for i in range(400)
        ]
        rejected = sum(not judge_rationality(v) for v in verdicts)
        assert 140 <= rejected <= 260

    def test_verdicts_vary_in_case(self):
        client = MockLlmClient(seed=3, unlikely_rate=1.0)
        replies = {client.complete(build_rationality_prompt(f"t{i}")) for i in range(40)}
        assert len(replies) > 1
        assert all(judge_rationality(r) is False for r in replies)


class TestGenerateCorpus:
    def run(self, seed=11, count=40, **client_kw):
        client = MockLlmClient(seed=seed, **client_kw)
        d = SynonymDictionary.identity(CLASSES)
        return generate_corpus(CLASSES, count, client, d, seed=seed)

    def test_kept_count_and_labels(self):
        res = self.run()
        assert len(res.texts) == 40
        assert res.stats.kept == 40
        for t in res.texts:
            assert len(t.labels) >= 1
            assert all(0 <= i < len(CLASSES) for i in t.labels)

    def test_drop_accounting(self):
        res = self.run(count=60, unlikely_rate=0.1, keyword_drop_rate=0.2)
        s = res.stats
        assert s.dropped_unlikely > 0
        assert s.dropped_unmatched > 0
        assert s.queried == (
            s.kept + s.dropped_unlikely + s.dropped_unmatched
            + s.dropped_overlong + s.transport_failures
        )

    def test_bit_reproducible(self):
        a = self.run(seed=21, count=30, unlikely_rate=0.1, keyword_drop_rate=0.2)
        b = self.run(seed=21, count=30, unlikely_rate=0.1, keyword_drop_rate=0.2)
        assert a.texts == b.texts
        assert a.stats.as_dict() == b.stats.as_dict()

    def test_overlong_dropped(self):
        client = MockLlmClient(seed=2)
        d = SynonymDictionary.identity(CLASSES)
        res = generate_corpus(CLASSES, 10, client, d, seed=2, max_words=6)
        assert res.stats.dropped_overlong > 0
        for t in res.texts:
            assert len(t.text.split()) <= 6

    def test_budget_exhaustion_raises(self):
        client = MockLlmClient(seed=2, unlikely_rate=1.0)
        d = SynonymDictionary.identity(CLASSES)
        with pytest.raises(ContractError, match="budget"):
            generate_corpus(CLASSES, 5, client, d, seed=2, retry_budget=20)

    def test_dictionary_mismatch_rejected(self):
        client = MockLlmClient(seed=2)
        d = SynonymDictionary.identity(["x", "y"])
        with pytest.raises(ContractError, match="match class_names"):
            generate_corpus(CLASSES, 5, client, d, seed=2)

    def test_transport_failures_counted(self):
        class FlakyClient:
            def __init__(self):
                self.inner = MockLlmClient(seed=4)
                self.calls = 0

            def complete(self, prompt):
                self.calls += 1
                if self.calls % 7 == 0:
                    raise TransportError("synthetic outage")
                return self.inner.complete(prompt)

        d = SynonymDictionary.identity(CLASSES)
        res = generate_corpus(CLASSES, 15, FlakyClient(), d, seed=4)
        assert res.stats.transport_failures > 0
        assert res.stats.kept == 15

    def test_jsonl_round_trip(self, tmp_path):
        res = self.run(count=12)
        path = tmp_path / "corpus.jsonl"
        save_corpus(path, res.texts)
        loaded = load_corpus(path)
        assert loaded == res.texts
        first = json.loads(path.read_text().splitlines()[0])
        assert set(first) == {"text", "labels"}

    def test_load_rejects_bad_lines(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text('{"text": "x", "labels": []}\n')
        with pytest.raises(InputError, match="no labels"):
            load_corpus(path)
        path.write_text("not json\n")
        with pytest.raises(InputError, match="line 1"):
            load_corpus(path)


@pytest.fixture(scope="module")
def enc():
    return FrozenEncoderPair(CLASSES, embed_dim=64, patch_size=4, seed=7)


class TestSynthImages:
    def test_pattern_shape_and_bounds(self, enc):
        pat = class_pattern(enc, "dog", hw=16)
        assert pat.shape == (16, 16, 3)
        assert np.abs(pat).max() == pytest.approx(0.45)
        # tiled: every 4x4 block identical
        assert np.array_equal(pat[:4, :4], pat[4:8, 8:12])

    def test_pattern_embedding_tracks_class_text(self, enc):
        for name in ["dog", "bench", "kite"]:
            pat = class_pattern(enc, name, hw=16)
            img_emb = enc.encode_image(pat).data
            txt_emb = enc.encode_text(name).data
            assert float(img_emb @ txt_emb) > 0.8

    def test_pattern_validation(self, enc):
        with pytest.raises(ParameterError):
            class_pattern(enc, "dog", hw=10)  # not divisible by 4
        with pytest.raises(ParameterError):
            class_pattern(enc, "dog", hw=16, target=np.zeros(3))

    def test_decorrelated_targets_orthonormal_and_close(self, enc):
        targets = decorrelated_targets(enc, CLASSES)
        assert targets.shape == (8, enc.embed_dim)
        gram = targets @ targets.T
        assert np.abs(gram - np.eye(8)).max() < 1e-10
        for i, name in enumerate(CLASSES):
            raw = enc.encode_text(name).data
            assert float(targets[i] @ raw) > 0.8

    def test_decorrelated_targets_rejects_dependent_rows(self, enc):
        with pytest.raises(ParameterError):
            decorrelated_targets(enc, ["dog", "dog"])

    def test_dataset_shapes_and_coverage(self, enc):
        ds = synth_dataset(CLASSES, enc, images_per_combo=2, seed=3, n_combos=12)
        assert ds.images.shape == (24, 16, 16, 3)
        assert ds.labels.shape == (24, 8)
        # first 8 combos are the 8 singletons
        for i in range(8):
            assert ds.labels[2 * i].sum() == 1
            assert ds.labels[2 * i, i] == 1
        assert ds.labels.sum(axis=1).min() >= 1
        assert ds.labels.sum(axis=1).max() <= 3

    def test_dataset_deterministic(self, enc):
        a = synth_dataset(CLASSES, enc, images_per_combo=2, seed=3, n_combos=10)
        b = synth_dataset(CLASSES, enc, images_per_combo=2, seed=3, n_combos=10)
        assert np.array_equal(a.images, b.images)
        assert np.array_equal(a.labels, b.labels)

    def test_dataset_validation(self, enc):
        with pytest.raises(ParameterError):
            synth_dataset(CLASSES, enc, n_combos=4)  # fewer than singletons
        with pytest.raises(ParameterError):
            synth_dataset(CLASSES, enc, noise_std=-1.0)

    def test_zero_shot_separation(self, enc):
        # the frozen pair alone must rank every positive class above every
        # negative for at least 90% of images
        ds = synth_dataset(CLASSES, enc, images_per_combo=4, seed=5, n_combos=20)
        text_emb = np.stack([enc.encode_text(c).data for c in CLASSES])
        ok = 0
        for i in range(ds.n_images):
            img_emb = enc.encode_image(ds.images[i]).data
            sims = text_emb @ img_emb
            pos = ds.labels[i] > 0
            if sims[pos].min() > sims[~pos].max():
                ok += 1
        assert ok / ds.n_images >= 0.90

    def test_npz_round_trip(self, tmp_path, enc):
        ds = synth_dataset(CLASSES, enc, images_per_combo=2, seed=3, n_combos=9)
        path = tmp_path / "synth.npz"
        save_synth(path, ds)
        got = load_synth(path)
        assert np.array_equal(got.images, ds.images)
        assert np.array_equal(got.labels, ds.labels)
        assert got.class_names == ds.class_names

    def test_load_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.npz"
        path.write_bytes(b"not a dataset")
        with pytest.raises(InputError):
            load_synth(path)
