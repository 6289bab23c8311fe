"""Prompt parameter containers, the dual adapter, and checkpoint IO."""

import numpy as np
import pytest

from pvplearn.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from pvplearn.encoders import FrozenEncoderPair
from pvplearn.errors import (
    DigestMismatchError,
    FormatError,
    ParameterError,
)
from pvplearn.model import DualAdapter, PseudoVisualPrompt, TextPromptSet
from pvplearn.numerics import Tensor, grad, l2_normalize

VOCAB = ["bench", "person", "dog", "cat", "office", "post"]


@pytest.fixture(scope="module")
def enc():
    return FrozenEncoderPair(VOCAB, embed_dim=64, patch_size=4, seed=7)


class TestPseudoVisualPrompt:
    def test_init_shape_and_stats(self):
        pvp = PseudoVisualPrompt.init(n_classes=4, hw=16, seed=3)
        assert pvp.pixels.shape == (4, 16, 16, 3)
        assert pvp.pixels.requires_grad
        std = pvp.pixels.data.std()
        assert 0.015 < std < 0.025

    def test_init_deterministic(self):
        a = PseudoVisualPrompt.init(3, 8, seed=5).pixels.data
        b = PseudoVisualPrompt.init(3, 8, seed=5).pixels.data
        assert np.array_equal(a, b)
        c = PseudoVisualPrompt.init(3, 8, seed=6).pixels.data
        assert not np.array_equal(a, c)

    def test_rejects_non_square(self):
        with pytest.raises(ParameterError):
            PseudoVisualPrompt(Tensor(np.zeros((2, 8, 10, 3)), requires_grad=True))

    def test_rejects_bad_counts(self):
        with pytest.raises(ParameterError):
            PseudoVisualPrompt.init(0, 8, seed=1)
        with pytest.raises(ParameterError):
            PseudoVisualPrompt.init(2, 0, seed=1)

    def test_embeddings_unit_rows(self, enc):
        pvp = PseudoVisualPrompt.init(3, 16, seed=2)
        emb = pvp.embeddings(enc)
        assert emb.shape == (3, 64)
        assert np.allclose(np.linalg.norm(emb.data, axis=1), 1.0, atol=1e-9)

    def test_embeddings_differentiable(self, enc):
        pvp = PseudoVisualPrompt.init(2, 8, seed=2)
        gs = grad(lambda: pvp.embeddings(enc).sum(), pvp.params())
        assert gs[0].shape == (2, 8, 8, 3)
        assert np.abs(gs[0]).max() > 0

    def test_param_rebinding(self):
        pvp = PseudoVisualPrompt.init(2, 8, seed=2)
        fresh = Tensor(np.zeros_like(pvp.pixels.data), requires_grad=True)
        pvp.set_params([fresh])
        assert pvp.pixels is fresh


class TestTextPromptSet:
    def test_init_shapes(self, enc):
        tps = TextPromptSet.init(enc, ["dog", "cat"], context_length=8, seed=1)
        assert tps.context.shape == (8, 64)
        assert tps.context.requires_grad
        assert tps.class_rows.shape == (2, 64)
        assert not tps.class_rows.requires_grad
        assert 0.015 < tps.context.data.std() < 0.025

    def test_class_row_is_mean_of_token_rows(self, enc):
        tps = TextPromptSet.init(enc, ["post office"], context_length=4, seed=1)
        ids = enc.tokenize("post office")[:-1]
        want = enc.embedding_rows(ids).mean(axis=0)
        assert np.allclose(tps.class_rows.data[0], want, atol=1e-15)

    def test_unknown_class_name_rejected(self, enc):
        with pytest.raises(ParameterError, match="outside the encoder vocab"):
            TextPromptSet.init(enc, ["zyzzyva"], context_length=4, seed=1)

    def test_context_must_fit_text_tower(self, enc):
        with pytest.raises(ParameterError, match="capacity"):
            TextPromptSet.init(enc, ["dog"], context_length=80, seed=1)

    def test_sequence_layout(self, enc):
        tps = TextPromptSet.init(enc, ["dog", "cat"], context_length=5, seed=1)
        seq = tps.sequence(1)
        assert seq.shape == (7, 64)
        assert np.array_equal(seq.data[:5], tps.context.data)
        assert np.array_equal(seq.data[5], tps.class_rows.data[1])
        assert np.array_equal(seq.data[6], enc.eos_embedding())

    def test_embeddings_unit_and_distinct(self, enc):
        tps = TextPromptSet.init(enc, ["dog", "cat", "bench"], context_length=8, seed=1)
        emb = tps.embeddings(enc)
        assert emb.shape == (3, 64)
        assert np.allclose(np.linalg.norm(emb.data, axis=1), 1.0, atol=1e-9)
        sims = emb.data @ emb.data.T
        assert np.max(np.abs(sims[~np.eye(3, dtype=bool)])) < 0.999

    def test_context_gradient_flows(self, enc):
        tps = TextPromptSet.init(enc, ["dog", "cat"], context_length=4, seed=1)
        gs = grad(lambda: tps.embeddings(enc).sum(), tps.params())
        assert gs[0].shape == (4, 64)
        assert np.abs(gs[0]).max() > 0


class TestDualAdapter:
    def rows(self, n=5, d=64, seed=0):
        rng = np.random.default_rng(seed)
        return Tensor(
            l2_normalize(Tensor(rng.normal(size=(n, d))), axis=1).data,
            requires_grad=True,
        )

    def test_mix_validation(self):
        with pytest.raises(ParameterError):
            DualAdapter.init(64, mix=1.5, seed=1)
        with pytest.raises(ParameterError):
            DualAdapter.init(64, mix=-0.1, seed=1)

    def test_identity_at_mix_one(self):
        ad = DualAdapter.init(64, mix=1.0, seed=1)
        x = self.rows()
        for side in ("visual", "text"):
            out = ad.apply(x, side).data
            assert np.max(np.abs(out - x.data)) <= 1e-9

    def test_output_unit_rows(self):
        ad = DualAdapter.init(64, mix=0.5, seed=1)
        out = ad.apply(self.rows(), "visual").data
        assert np.allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-12)

    def test_normalize_flag(self):
        ad = DualAdapter.init(64, mix=0.0, seed=1)
        raw = ad.apply(self.rows(), "text", normalize=False).data
        assert not np.allclose(np.linalg.norm(raw, axis=1), 1.0, atol=1e-3)

    def test_sides_differ(self):
        ad = DualAdapter.init(64, mix=0.0, seed=1)
        x = self.rows()
        assert not np.allclose(
            ad.apply(x, "visual").data, ad.apply(x, "text").data, atol=1e-9
        )

    def test_rejects_bad_side_and_shape(self):
        ad = DualAdapter.init(64, mix=0.5, seed=1)
        with pytest.raises(ParameterError):
            ad.apply(self.rows(), "audio")
        with pytest.raises(ParameterError):
            ad.apply(Tensor(np.zeros((3, 32)), requires_grad=True), "visual")

    def test_shared_text_weights_accumulate_gradients(self):
        # one adapter used twice must match the sum of gradients from two
        # identical copies each used once
        x1, x2 = self.rows(seed=1), self.rows(seed=2)
        shared = DualAdapter.init(64, mix=0.5, seed=3)

        def loss_shared():
            return (
                ad_sum(shared.apply(x1, "text")) + ad_sum(shared.apply(x2, "text"))
            )

        def ad_sum(t):
            return (t * t).sum()

        gs_shared = grad(loss_shared, shared.params())

        copy_a = DualAdapter.init(64, mix=0.5, seed=3)
        copy_b = DualAdapter.init(64, mix=0.5, seed=3)
        gs_a = grad(lambda: ad_sum(copy_a.apply(x1, "text")), copy_a.params())
        gs_b = grad(lambda: ad_sum(copy_b.apply(x2, "text")), copy_b.params())
        for g_shared, g_a, g_b in zip(gs_shared, gs_a, gs_b):
            assert np.allclose(g_shared, g_a + g_b, atol=1e-12)

    def test_param_round_trip(self):
        ad = DualAdapter.init(32, mix=0.5, seed=1)
        params = ad.params()
        assert len(params) == 8
        ad.set_params(params)
        with pytest.raises(ParameterError):
            ad.set_params(params[:3])


class TestCheckpoint:
    def make(self, stage=2):
        rng = np.random.default_rng(8)
        tensors = {
            "pvp_pixels": rng.normal(size=(2, 8, 8, 3)),
            "context": rng.normal(size=(4, 16)),
        }
        meta = {
            "seed": 7,
            "encoder_digest": "abc123",
            "class_names": ["dog", "cat"],
            "hyperparams": {"lr": 0.1},
        }
        return Checkpoint(stage=stage, meta=meta, tensors=tensors)

    def test_round_trip(self, tmp_path):
        path = tmp_path / "model.pvpc"
        ckpt = self.make()
        save_checkpoint(path, ckpt)
        got = load_checkpoint(path)
        assert got.stage == ckpt.stage
        assert got.meta == ckpt.meta
        assert set(got.tensors) == set(ckpt.tensors)
        for name in ckpt.tensors:
            assert np.array_equal(got.tensors[name], ckpt.tensors[name])

    def test_save_load_save_byte_identical(self, tmp_path):
        p1, p2 = tmp_path / "a.pvpc", tmp_path / "b.pvpc"
        save_checkpoint(p1, self.make())
        save_checkpoint(p2, load_checkpoint(p1))
        assert p1.read_bytes() == p2.read_bytes()

    def test_digest_enforcement(self, tmp_path):
        path = tmp_path / "model.pvpc"
        save_checkpoint(path, self.make())
        load_checkpoint(path, expected_encoder_digest="abc123")
        with pytest.raises(DigestMismatchError, match="abc123"):
            load_checkpoint(path, expected_encoder_digest="other")

    def test_stage_validation(self):
        with pytest.raises(ParameterError):
            Checkpoint(stage=3, meta={}, tensors={})

    def test_missing_tensor_access(self):
        ckpt = self.make()
        with pytest.raises(FormatError, match="missing tensor"):
            ckpt.require("absent")

    def test_corrupt_magic(self, tmp_path):
        path = tmp_path / "model.pvpc"
        save_checkpoint(path, self.make())
        blob = bytearray(path.read_bytes())
        blob[0] = ord("X")
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="magic"):
            load_checkpoint(path)

    def test_corrupt_version(self, tmp_path):
        path = tmp_path / "model.pvpc"
        save_checkpoint(path, self.make())
        blob = bytearray(path.read_bytes())
        blob[4] = 7
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="version 7 at offset 4"):
            load_checkpoint(path)

    def test_corrupt_stage(self, tmp_path):
        path = tmp_path / "model.pvpc"
        save_checkpoint(path, self.make())
        blob = bytearray(path.read_bytes())
        blob[8] = 9
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="stage byte 9"):
            load_checkpoint(path)

    def test_truncated_payload_names_offset(self, tmp_path):
        path = tmp_path / "model.pvpc"
        save_checkpoint(path, self.make())
        blob = path.read_bytes()
        path.write_bytes(blob[:-10])
        with pytest.raises(FormatError, match="offset"):
            load_checkpoint(path)

    def test_trailing_garbage_rejected(self, tmp_path):
        path = tmp_path / "model.pvpc"
        save_checkpoint(path, self.make())
        path.write_bytes(path.read_bytes() + b"junk")
        with pytest.raises(FormatError, match="trailing"):
            load_checkpoint(path)

    def test_bad_meta_json(self, tmp_path):
        path = tmp_path / "model.pvpc"
        save_checkpoint(path, self.make())
        blob = bytearray(path.read_bytes())
        blob[16] = ord("?")  # first metadata byte
        path.write_bytes(bytes(blob))
        with pytest.raises(FormatError, match="metadata JSON"):
            load_checkpoint(path)