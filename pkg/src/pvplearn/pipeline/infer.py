"""Inference: fused class scores and per-patch correlation maps.

Scores for each image fuse two cosine channels: against the adapted
pseudo-image embeddings (visual) and against the adapted text prompt
embeddings (textual). A stage-1 checkpoint has no text channel and is
scored purely visually.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..checkpoint import Checkpoint
from ..encoders import EOS_ID, FrozenEncoderPair
from ..errors import DigestMismatchError, ParameterError
from ..model import DualAdapter, PseudoVisualPrompt, TextPromptSet
from ..numerics import Tensor, no_grad

__all__ = [
    "InferenceResult",
    "class_references",
    "infer",
    "correlation_map",
    "save_heatmap_pgm",
    "save_heatmap_csv",
]


@dataclass
class InferenceResult:
    """Fused and per-channel score matrices, shape (n_images, n_classes)."""

    scores: np.ndarray
    visual_scores: np.ndarray
    text_scores: np.ndarray
    alpha: float
    class_names: list[str]


def _check_digest(ckpt: Checkpoint, encoders: FrozenEncoderPair) -> None:
    found = ckpt.meta.get("encoder_digest")
    if found != encoders.digest():
        raise DigestMismatchError(
            f"checkpoint was trained against encoder {found}, "
            f"current encoder is {encoders.digest()}"
        )


def _rebuild(ckpt: Checkpoint, encoders: FrozenEncoderPair):
    """Model pieces from checkpoint tensors; adapter is None for stage 1."""
    pvp = PseudoVisualPrompt(Tensor(ckpt.require("pvp_pixels").copy()))
    if ckpt.stage == 1:
        return pvp, None, None
    hp = ckpt.meta["hyperparams"]
    context = Tensor(ckpt.require("context").copy())
    class_rows = Tensor(ckpt.require("class_rows").copy())
    eos_row = Tensor(encoders.embedding_rows([EOS_ID])[0])
    prompts = TextPromptSet(
        context, class_rows, eos_row, list(ckpt.meta["class_names"])
    )
    weights = {
        name: Tensor(ckpt.require(f"adapter_{name}").copy())
        for name in DualAdapter.PARAM_ORDER
    }
    adapter = DualAdapter(weights, hp["lambda_mix"], encoders.embed_dim)
    return pvp, prompts, adapter


def class_references(
    ckpt: Checkpoint, encoders: FrozenEncoderPair
) -> tuple[np.ndarray, np.ndarray | None]:
    """Per-class reference embeddings (visual, textual or None), unit rows."""
    _check_digest(ckpt, encoders)
    pvp, prompts, adapter = _rebuild(ckpt, encoders)
    normalize = True
    if ckpt.stage == 2:
        normalize = bool(ckpt.meta["hyperparams"].get("normalize_adapter", True))
    with no_grad():
        v = pvp.embeddings(encoders)
        if ckpt.stage == 1:
            return v.data.copy(), None
        u = adapter.apply(v, "visual", normalize)
        g = adapter.apply(prompts.embeddings(encoders), "text", normalize)
    return u.data.copy(), g.data.copy()


def _image_embeddings(
    images: np.ndarray, ckpt: Checkpoint, encoders: FrozenEncoderPair
) -> np.ndarray:
    images = np.asarray(images, dtype=np.float64)
    if images.ndim == 3:
        images = images[None]
    if images.ndim != 4 or images.shape[3] != 3:
        raise ParameterError(f"expected (n, H, W, 3) images, got {images.shape}")
    use_adapter = ckpt.stage == 2 and bool(
        ckpt.meta["hyperparams"].get("adapter_at_inference", True)
    )
    with no_grad():
        feats = np.stack([encoders.encode_image(img).data for img in images])
        if use_adapter:
            _, _, adapter = _rebuild(ckpt, encoders)
            normalize = bool(ckpt.meta["hyperparams"].get("normalize_adapter", True))
            feats = adapter.apply(Tensor(feats), "visual", normalize).data
    return feats


def infer(
    images: np.ndarray,
    ckpt: Checkpoint,
    encoders: FrozenEncoderPair,
    alpha: float | None = None,
) -> InferenceResult:
    """Score images against every class; rows fuse the two channels.

    alpha defaults to the trained value; a stage-1 checkpoint forces the
    purely visual channel regardless of the requested alpha.
    """
    u, g = class_references(ckpt, encoders)
    if alpha is None:
        alpha = float(ckpt.meta["hyperparams"].get("alpha", 0.5))
    if not 0.0 <= alpha <= 1.0:
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha}")
    if ckpt.stage == 1:
        alpha = 1.0
    feats = _image_embeddings(images, ckpt, encoders)
    visual = feats @ u.T
    text = feats @ g.T if g is not None else np.zeros_like(visual)
    scores = alpha * visual + (1.0 - alpha) * text
    return InferenceResult(
        scores=scores,
        visual_scores=visual,
        text_scores=text,
        alpha=alpha,
        class_names=list(ckpt.meta["class_names"]),
    )


def correlation_map(
    image: np.ndarray,
    ckpt: Checkpoint,
    encoders: FrozenEncoderPair,
    class_index: int,
    alpha: float | None = None,
) -> np.ndarray:
    """Per-patch cosine grid (gh, gw) against one class's fused reference."""
    u, g = class_references(ckpt, encoders)
    n = u.shape[0]
    if not 0 <= class_index < n:
        raise ParameterError(f"class_index {class_index} outside 0..{n - 1}")
    if alpha is None:
        alpha = float(ckpt.meta["hyperparams"].get("alpha", 0.5))
    if ckpt.stage == 1 or g is None:
        ref = u[class_index]
    else:
        ref = alpha * u[class_index] + (1.0 - alpha) * g[class_index]
    norm = np.linalg.norm(ref)
    if norm == 0:
        raise ParameterError("degenerate reference embedding")
    ref = ref / norm
    grid = encoders.patch_grid(np.asarray(image, dtype=np.float64))
    return grid @ ref


def save_heatmap_pgm(path, cmap: np.ndarray) -> None:
    """Write the correlation grid as a binary PGM, mapping [-1, 1] to 0..255."""
    cmap = np.asarray(cmap, dtype=np.float64)
    if cmap.ndim != 2:
        raise ParameterError(f"heatmap must be 2-D, got shape {cmap.shape}")
    clipped = np.clip(cmap, -1.0, 1.0)
    gray = np.round((clipped + 1.0) * 127.5).astype(np.uint8)
    h, w = gray.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + gray.tobytes())


def save_heatmap_csv(path, cmap: np.ndarray) -> None:
    cmap = np.asarray(cmap, dtype=np.float64)
    if cmap.ndim != 2:
        raise ParameterError(f"heatmap must be 2-D, got shape {cmap.shape}")
    lines = [",".join(f"{v:.10g}" for v in row) for row in cmap]
    Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
