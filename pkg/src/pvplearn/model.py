"""Learnable prompt parameters and the dual residual adapter.

Three parameter groups train against the frozen encoder pair:

* one pseudo-image pixel slab per class, encoded by the image tower;
* a shared bank of context vectors prepended to each class token
  embedding, encoded by the text tower;
* a pair of small residual adapters (one per modality) blended with the
  identity by a mix weight, applied on top of the frozen embeddings.

The text adapter is a single set of weights reused for both learned
prompt sequences and free-form corpus texts; gradient contributions from
both uses accumulate on the same tensors.
"""

from __future__ import annotations

import numpy as np

from .encoders import EOS_ID, UNK_ID, FrozenEncoderPair
from .errors import ParameterError
from .numerics import Tensor, concat, gaussian_init, l2_normalize, stack

__all__ = ["PseudoVisualPrompt", "TextPromptSet", "DualAdapter"]

# init streams; disjoint from the encoder weight streams by a wide margin
STREAM_PVP = 100
STREAM_CONTEXT = 101
STREAM_ADAPTER_VISUAL_W1 = 102
STREAM_ADAPTER_VISUAL_W2 = 103
STREAM_ADAPTER_TEXT_W1 = 104
STREAM_ADAPTER_TEXT_W2 = 105

INIT_STD = 0.02


class PseudoVisualPrompt:
    """One learnable pixel slab per class, shape (N, H, W, 3)."""

    def __init__(self, pixels: Tensor):
        if pixels.ndim != 4 or pixels.shape[3] != 3:
            raise ParameterError(f"expected (N, H, W, 3) pixels, got {pixels.shape}")
        if pixels.shape[1] != pixels.shape[2]:
            raise ParameterError(
                f"prompt images must be square, got {pixels.shape[1]}x{pixels.shape[2]}"
            )
        self.pixels = pixels

    @classmethod
    def init(
        cls, n_classes: int, hw: int, seed: int, std: float = INIT_STD
    ) -> "PseudoVisualPrompt":
        if n_classes < 1:
            raise ParameterError(f"need at least one class, got {n_classes}")
        if hw < 1:
            raise ParameterError(f"side length must be positive, got {hw}")
        pixels = gaussian_init(
            (n_classes, hw, hw, 3), mean=0.0, std=std, seed=seed, stream=STREAM_PVP
        )
        return cls(pixels)

    @property
    def n_classes(self) -> int:
        return self.pixels.shape[0]

    def class_image(self, i: int) -> Tensor:
        """The i-th slab as (H, W, 3), still attached to the tape."""
        return self.pixels[i]

    def embeddings(self, encoders: FrozenEncoderPair) -> Tensor:
        """Encode every slab; rows are unit-norm image embeddings (N, D)."""
        return stack(
            [encoders.encode_image(self.pixels[i]) for i in range(self.n_classes)],
            axis=0,
        )

    def params(self) -> list[Tensor]:
        return [self.pixels]

    def set_params(self, params: list[Tensor]) -> None:
        (self.pixels,) = params


class TextPromptSet:
    """Shared learnable context vectors plus one frozen class row each.

    The sequence for class i is [r_1 .. r_M, g_i, eos] where g_i is the
    mean token embedding of the class name and only the r vectors train.
    """

    def __init__(
        self,
        context: Tensor,
        class_rows: Tensor,
        eos_row: Tensor,
        class_names: list[str],
    ):
        if context.ndim != 2:
            raise ParameterError(f"context must be (M, D), got {context.shape}")
        if class_rows.ndim != 2 or class_rows.shape[1] != context.shape[1]:
            raise ParameterError(
                f"class rows {class_rows.shape} incompatible with context {context.shape}"
            )
        if class_rows.shape[0] != len(class_names):
            raise ParameterError(
                f"{class_rows.shape[0]} class rows for {len(class_names)} names"
            )
        self.context = context
        self.class_rows = class_rows
        self.eos_row = eos_row
        self.class_names = list(class_names)

    @classmethod
    def init(
        cls,
        encoders: FrozenEncoderPair,
        class_names: list[str],
        context_length: int,
        seed: int,
        std: float = INIT_STD,
    ) -> "TextPromptSet":
        if context_length < 1:
            raise ParameterError(
                f"context_length must be positive, got {context_length}"
            )
        if not class_names:
            raise ParameterError("class_names is empty")
        # sequence must fit the text tower: M context + class row + eos
        if context_length + 2 > encoders.max_text_len:
            raise ParameterError(
                f"context_length {context_length} + 2 exceeds text capacity "
                f"{encoders.max_text_len}"
            )
        rows = []
        for name in class_names:
            ids = encoders.tokenize(name)[:-1]  # drop EOS
            if not ids:
                raise ParameterError(f"class name {name!r} has no tokens")
            if UNK_ID in ids:
                raise ParameterError(
                    f"class name {name!r} contains words outside the encoder vocab"
                )
            rows.append(encoders.embedding_rows(ids).mean(axis=0))
        context = gaussian_init(
            (context_length, encoders.embed_dim),
            mean=0.0,
            std=std,
            seed=seed,
            stream=STREAM_CONTEXT,
        )
        class_rows = Tensor(np.stack(rows), requires_grad=False)
        eos_row = Tensor(encoders.embedding_rows([EOS_ID])[0], requires_grad=False)
        return cls(context, class_rows, eos_row, class_names)

    @property
    def n_classes(self) -> int:
        return self.class_rows.shape[0]

    @property
    def context_length(self) -> int:
        return self.context.shape[0]

    def sequence(self, i: int) -> Tensor:
        """Prompt rows for class i: (M + 2, D), eos-terminated."""
        d = self.context.shape[1]
        return concat(
            [
                self.context,
                self.class_rows[i : i + 1],
                self.eos_row.reshape((1, d)),
            ],
            axis=0,
        )

    def embeddings(self, encoders: FrozenEncoderPair) -> Tensor:
        """Encode every class prompt; unit-norm rows (N, D)."""
        return stack(
            [
                encoders.encode_text_embeddings(self.sequence(i))
                for i in range(self.n_classes)
            ],
            axis=0,
        )

    def params(self) -> list[Tensor]:
        return [self.context]

    def set_params(self, params: list[Tensor]) -> None:
        (self.context,) = params


class DualAdapter:
    """Residual two-layer adapters for each modality.

    adapted = (1 - mix) * f(x) + mix * x with f a bottleneck MLP; at
    mix = 1 the adapter is the identity on unit-norm rows. The text-side
    weights serve both learned prompts and corpus texts.
    """

    SIDES = ("visual", "text")

    def __init__(self, weights: dict[str, Tensor], mix: float, embed_dim: int):
        if not 0.0 <= mix <= 1.0:
            raise ParameterError(f"mix must lie in [0, 1], got {mix}")
        self.weights = weights
        self.mix = float(mix)
        self.embed_dim = int(embed_dim)

    @classmethod
    def init(
        cls, embed_dim: int, mix: float, seed: int, std: float = INIT_STD
    ) -> "DualAdapter":
        if embed_dim < 1:
            raise ParameterError(f"embed_dim must be positive, got {embed_dim}")
        hidden = max(1, embed_dim // 4)
        streams = {
            ("visual", "w1"): STREAM_ADAPTER_VISUAL_W1,
            ("visual", "w2"): STREAM_ADAPTER_VISUAL_W2,
            ("text", "w1"): STREAM_ADAPTER_TEXT_W1,
            ("text", "w2"): STREAM_ADAPTER_TEXT_W2,
        }
        weights: dict[str, Tensor] = {}
        for side in cls.SIDES:
            weights[f"{side}_w1"] = gaussian_init(
                (embed_dim, hidden), std=std, seed=seed, stream=streams[(side, "w1")]
            )
            weights[f"{side}_b1"] = Tensor(np.zeros(hidden), requires_grad=True)
            weights[f"{side}_w2"] = gaussian_init(
                (hidden, embed_dim), std=std, seed=seed, stream=streams[(side, "w2")]
            )
            weights[f"{side}_b2"] = Tensor(np.zeros(embed_dim), requires_grad=True)
        return cls(weights, mix, embed_dim)

    PARAM_ORDER = (
        "visual_w1",
        "visual_b1",
        "visual_w2",
        "visual_b2",
        "text_w1",
        "text_b1",
        "text_w2",
        "text_b2",
    )

    def apply(self, x: Tensor, side: str, normalize: bool = True) -> Tensor:
        """Adapt (rows, D) embeddings through the given side's bottleneck."""
        if side not in self.SIDES:
            raise ParameterError(f"side must be one of {self.SIDES}, got {side!r}")
        if x.ndim != 2 or x.shape[1] != self.embed_dim:
            raise ParameterError(
                f"expected (rows, {self.embed_dim}) input, got {x.shape}"
            )
        w = self.weights
        hidden = (x @ w[f"{side}_w1"] + w[f"{side}_b1"]).relu()
        residual = hidden @ w[f"{side}_w2"] + w[f"{side}_b2"]
        out = residual * (1.0 - self.mix) + x * self.mix
        return l2_normalize(out, axis=1) if normalize else out

    def params(self) -> list[Tensor]:
        return [self.weights[name] for name in self.PARAM_ORDER]

    def set_params(self, params: list[Tensor]) -> None:
        if len(params) != len(self.PARAM_ORDER):
            raise ParameterError(
                f"expected {len(self.PARAM_ORDER)} tensors, got {len(params)}"
            )
        for name, p in zip(self.PARAM_ORDER, params):
            self.weights[name] = p
