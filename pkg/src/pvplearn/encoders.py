"""A frozen, deterministic dual encoder mapping images and text to one space.

The pair is the fixed backbone the learnable prompts are trained against.
All weights derive from a counter-based generator keyed by (seed, stream),
so two constructions with the same config are bit-identical. Weights never
require grad; gradients flow only to the inputs (pixel tensors and text
embedding sequences), which is exactly what prompt learning needs.

Both modalities share the final output projection, which is what puts
image and text embeddings in a common space: distinct texts land in
well-separated directions, and a pixel pattern can be solved to land near
a chosen text direction.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import re
from typing import Sequence

import numpy as np

from .errors import InputError, ParameterError, ShapeError
from .numerics import Tensor, l2_normalize, no_grad, philox_generator, softmax

__all__ = ["FrozenEncoderPair", "UNK_ID", "EOS_ID"]

logger = logging.getLogger(__name__)

UNK_ID = 0
EOS_ID = 1

_WORD_RE = re.compile(r"[^a-z0-9]+")

# stream ids for weight draws; order is part of the reproducibility contract
_STREAMS = {
    "token_embeddings": 0,
    "positional": 1,
    "wq": 2,
    "wk": 3,
    "wv": 4,
    "w_out": 5,
    "b_out": 6,
    "patch_proj": 7,
    "patch_bias": 8,
    "pool_query": 9,
    "pool_wk": 10,
    "pool_wv": 11,
}


class FrozenEncoderPair:
    """Deterministic text and image encoders with a shared output head.

    Text path: token embeddings + positionals; the terminal position acts
    as an attention query over the content positions, and the attention-
    weighted value mix goes through the shared projection and unit
    normalization. The terminal row never contributes content, so texts
    that differ in any content token land in well-separated directions.

    Image path: non-overlapping square patches, linear patch features,
    attention pooling against a learned query, shared projection, unit
    normalization.
    """

    def __init__(
        self,
        vocab: Sequence[str],
        embed_dim: int = 64,
        patch_size: int = 4,
        max_text_len: int = 77,
        seed: int = 0,
    ):
        if embed_dim <= 0:
            raise ParameterError(f"embed_dim must be positive, got {embed_dim}")
        if patch_size <= 0:
            raise ParameterError(f"patch_size must be positive, got {patch_size}")
        if max_text_len < 2:
            raise ParameterError(
                f"max_text_len must be at least 2, got {max_text_len}"
            )
        words = sorted({w for raw in vocab for w in _WORD_RE.split(raw.lower()) if w})
        if not words:
            raise ParameterError("vocab contains no usable words")
        self.embed_dim = int(embed_dim)
        self.patch_size = int(patch_size)
        self.max_text_len = int(max_text_len)
        self.seed = int(seed)
        self.tokens: list[str] = ["<unk>", "<eos>", *words]
        self._ids = {tok: i for i, tok in enumerate(self.tokens)}

        d = self.embed_dim
        patch_dim = self.patch_size * self.patch_size * 3
        scales = {
            "token_embeddings": 1.0 / math.sqrt(d),
            "positional": 0.01,
            "wq": 1.0 / math.sqrt(d),
            "wk": 1.0 / math.sqrt(d),
            "wv": 1.0 / math.sqrt(d),
            "w_out": 1.0 / math.sqrt(d),
            "b_out": 0.01,
            "patch_proj": 1.0 / math.sqrt(patch_dim),
            "patch_bias": 0.01,
            "pool_query": 1.0,
            "pool_wk": 1.0 / math.sqrt(d),
            "pool_wv": 1.0 / math.sqrt(d),
        }
        shapes = {
            "token_embeddings": (len(self.tokens), d),
            "positional": (self.max_text_len, d),
            "wq": (d, d),
            "wk": (d, d),
            "wv": (d, d),
            "w_out": (d, d),
            "b_out": (d,),
            "patch_proj": (patch_dim, d),
            "patch_bias": (d,),
            "pool_query": (d, 1),
            "pool_wk": (d, d),
            "pool_wv": (d, d),
        }
        self._weights: dict[str, Tensor] = {}
        for name, stream in _STREAMS.items():
            rng = philox_generator(self.seed, stream)
            data = rng.normal(loc=0.0, scale=scales[name], size=shapes[name])
            self._weights[name] = Tensor(data, requires_grad=False)

    # ------------------------------------------------------------------
    # text path

    def tokenize(self, text: str) -> list[int]:
        """Lowercased word ids, unknowns mapped to UNK, EOS appended."""
        ids: list[int] = []
        for word in _WORD_RE.split(text.lower()):
            if not word:
                continue
            idx = self._ids.get(word, UNK_ID)
            if idx == UNK_ID:
                logger.debug("unknown token %r mapped to UNK", word)
            ids.append(idx)
        ids.append(EOS_ID)
        return ids

    def encode_text_tokens(self, ids: Sequence[int]) -> Tensor:
        """Encode a tokenized text; ids must be EOS-terminated."""
        ids = list(ids)
        if not ids:
            raise InputError("token sequence is empty")
        if ids[-1] != EOS_ID:
            raise InputError("token sequence must end with EOS")
        if len(ids) < 2:
            raise InputError("token sequence has no content before EOS")
        if len(ids) > self.max_text_len:
            raise InputError(
                f"token sequence length {len(ids)} exceeds max {self.max_text_len}"
            )
        if any(i < 0 or i >= len(self.tokens) for i in ids):
            raise InputError("token id outside vocabulary")
        rows = self._weights["token_embeddings"][ids]
        return self.encode_text_embeddings(rows)

    def encode_text(self, text: str) -> Tensor:
        return self.encode_text_tokens(self.tokenize(text))

    def encode_text_embeddings(self, seq: Tensor) -> Tensor:
        """Encode a (L, D) embedding sequence; differentiable w.r.t. seq.

        This is the entry point for learned prompt sequences; feeding the
        embedding rows of a tokenized text reproduces encode_text_tokens
        bit for bit.
        """
        if not isinstance(seq, Tensor):
            seq = Tensor(seq)
        if seq.ndim != 2 or seq.shape[1] != self.embed_dim:
            raise ShapeError(
                f"expected sequence of shape (L, {self.embed_dim}), got {seq.shape}"
            )
        length = seq.shape[0]
        if length < 2:
            raise ShapeError(
                "sequence needs at least one content position plus the terminal row"
            )
        if length > self.max_text_len:
            raise ShapeError(
                f"sequence length {length} exceeds max {self.max_text_len}"
            )
        w = self._weights
        x = seq + w["positional"][0:length]
        content = x[0 : length - 1]
        query = x[length - 1 : length]
        scale = 1.0 / math.sqrt(self.embed_dim)
        attn = softmax((query @ w["wq"]) @ (content @ w["wk"]).T * scale, axis=1)
        readout = attn @ (content @ w["wv"])
        out = l2_normalize(readout @ w["w_out"] + w["b_out"], axis=1)
        return out.reshape((self.embed_dim,))

    def embedding_rows(self, ids: Sequence[int]) -> np.ndarray:
        """Copy of the token embedding rows for the given ids."""
        return self._weights["token_embeddings"].data[list(ids)].copy()

    def eos_embedding(self) -> np.ndarray:
        return self._weights["token_embeddings"].data[EOS_ID].copy()

    # ------------------------------------------------------------------
    # image path

    def _patch_features(self, pixels: Tensor) -> Tensor:
        if not isinstance(pixels, Tensor):
            pixels = Tensor(pixels)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ShapeError(f"expected (H, W, 3) pixels, got {pixels.shape}")
        h, wdt, _ = pixels.shape
        p = self.patch_size
        if h != wdt:
            raise ShapeError(f"image must be square, got {h}x{wdt}")
        if h % p != 0:
            raise ShapeError(f"side {h} not divisible by patch size {p}")
        g = h // p
        patches = (
            pixels.reshape((g, p, g, p, 3))
            .transpose((0, 2, 1, 3, 4))
            .reshape((g * g, p * p * 3))
        )
        w = self._weights
        return patches @ w["patch_proj"] + w["patch_bias"]

    def encode_image(self, pixels) -> Tensor:
        """Global image embedding (D,), unit norm; differentiable w.r.t. pixels."""
        feats = self._patch_features(pixels if isinstance(pixels, Tensor) else Tensor(pixels))
        w = self._weights
        scale = 1.0 / math.sqrt(self.embed_dim)
        scores = (feats @ w["pool_wk"]) @ w["pool_query"] * scale
        attn = softmax(scores, axis=0)
        pooled = ((feats @ w["pool_wv"]) * attn).sum(axis=0, keepdims=True)
        out = l2_normalize(pooled @ w["w_out"] + w["b_out"], axis=1)
        return out.reshape((self.embed_dim,))

    def uniform_patch_response(self) -> tuple[np.ndarray, np.ndarray]:
        """Affine map (A, c) from one repeated patch to the raw global output.

        When every patch of an image equals the same vector x, attention
        pooling is uniform and the pre-normalization global embedding is
        exactly x @ A + c. Lets callers solve for pixel patterns that land
        near a chosen embedding direction.
        """
        w = self._weights
        a = w["patch_proj"].data @ w["pool_wv"].data @ w["w_out"].data
        c = (
            w["patch_bias"].data @ w["pool_wv"].data @ w["w_out"].data
            + w["b_out"].data
        )
        return a.copy(), c.copy()

    def patch_grid(self, pixels) -> np.ndarray:
        """Per-patch embeddings (gh, gw, D) through the shared head, unit rows.

        Inference-only helper for spatial correlation maps; never taped.
        """
        with no_grad():
            feats = self._patch_features(
                pixels if isinstance(pixels, Tensor) else Tensor(pixels)
            )
            w = self._weights
            proj = l2_normalize((feats @ w["pool_wv"]) @ w["w_out"] + w["b_out"], axis=1)
        n = proj.shape[0]
        g = int(math.isqrt(n))
        return proj.data.reshape((g, g, self.embed_dim)).copy()

    # ------------------------------------------------------------------
    # identity

    def weights_checksum(self) -> str:
        """sha256 over all weight bytes in fixed stream order."""
        h = hashlib.sha256()
        for name in _STREAMS:
            h.update(name.encode("utf-8"))
            h.update(np.ascontiguousarray(self._weights[name].data).tobytes())
        return h.hexdigest()

    def config(self) -> dict:
        return {
            "embed_dim": self.embed_dim,
            "patch_size": self.patch_size,
            "max_text_len": self.max_text_len,
            "seed": self.seed,
            "vocab": list(self.tokens[2:]),
        }

    def digest(self) -> str:
        """sha256 of config plus weight checksum; names this exact encoder."""
        payload = dict(self.config())
        payload["weights"] = self.weights_checksum()
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    @classmethod
    def from_config(cls, cfg: dict) -> "FrozenEncoderPair":
        return cls(
            vocab=cfg["vocab"],
            embed_dim=cfg["embed_dim"],
            patch_size=cfg["patch_size"],
            max_text_len=cfg["max_text_len"],
            seed=cfg["seed"],
        )
