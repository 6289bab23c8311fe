"""Synthetic labeled images aligned with the frozen encoder's text space.

Each class gets a tiled pixel pattern solved by least squares so that its
image embedding points near the class name's text embedding. Images are
clipped sums of the patterns for their label set plus Gaussian noise,
which makes multi-label recognition genuinely solvable by the encoder
pair while staying fully synthetic and deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..encoders import FrozenEncoderPair
from ..errors import InputError, ParameterError
from ..numerics import philox_generator

__all__ = [
    "class_pattern",
    "decorrelated_targets",
    "SynthDataset",
    "synth_dataset",
    "save_synth",
    "load_synth",
]

STREAM_COMBOS = 201
STREAM_NOISE = 202

PATTERN_PEAK = 0.45


# singular value cutoffs tried when solving for a pattern; exact solves of
# ill-conditioned maps explode in norm and die under the pixel peak rescale,
# so the best truncation level is found by realized cosine
_RCOND_LADDER = (None, 0.01, 0.03, 0.1, 0.2, 0.3)


def decorrelated_targets(
    encoders: FrozenEncoderPair, class_names: list[str]
) -> np.ndarray:
    """Unit target directions for each class with cross-talk removed.

    Text embeddings of distinct words under a random frozen encoder can
    share cosines of 0.5 or more, which leaks score mass between classes
    in any benchmark built directly on them. Symmetric (Lowdin)
    orthogonalization finds the orthonormal frame closest to the raw
    embeddings in aggregate, so each target keeps a high cosine to its
    own class text while becoming exactly orthogonal to every other.
    """
    t = np.stack([encoders.encode_text(name).data for name in class_names])
    gram = t @ t.T
    w, v = np.linalg.eigh(gram)
    if w.min() <= 1e-10:
        raise ParameterError("class text embeddings are linearly dependent")
    targets = (v @ np.diag(1.0 / np.sqrt(w)) @ v.T) @ t
    return targets / np.linalg.norm(targets, axis=1, keepdims=True)


def class_pattern(
    encoders: FrozenEncoderPair,
    class_name: str,
    hw: int,
    target: np.ndarray | None = None,
) -> np.ndarray:
    """A (hw, hw, 3) tile pattern whose embedding tracks the class text.

    Solves the uniform-patch affine map for the patch vector closest to
    the class text embedding (or an explicit target direction), rescales
    to a fixed pixel peak, and keeps the truncated solve whose actual
    encoded image lands closest to the target. Deterministic throughout.
    """
    p = encoders.patch_size
    if hw < p or hw % p != 0:
        raise ParameterError(f"side {hw} incompatible with patch size {p}")
    if target is None:
        target = encoders.encode_text(class_name).data
    elif target.shape != (encoders.embed_dim,):
        raise ParameterError(
            f"target shape {target.shape} does not match embed dim {encoders.embed_dim}"
        )
    a, c = encoders.uniform_patch_response()
    g = hw // p
    best: np.ndarray | None = None
    best_cos = -np.inf
    for rcond in _RCOND_LADDER:
        x, *_ = np.linalg.lstsq(a.T, target - c, rcond=rcond)
        peak = np.abs(x).max()
        if peak == 0:
            continue
        tile = (x * (PATTERN_PEAK / peak)).reshape((p, p, 3))
        pattern = np.tile(tile, (g, g, 1))
        realized = float(encoders.encode_image(pattern).data @ target)
        if realized > best_cos:
            best_cos = realized
            best = pattern
    if best is None:
        raise ParameterError(f"degenerate pattern for class {class_name!r}")
    return best


@dataclass
class SynthDataset:
    """Images (n, hw, hw, 3), multi-hot labels (n, N), and class names."""

    images: np.ndarray
    labels: np.ndarray
    class_names: list[str]

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise ParameterError(
                f"{self.images.shape[0]} images vs {self.labels.shape[0]} label rows"
            )
        if self.labels.shape[1] != len(self.class_names):
            raise ParameterError(
                f"label width {self.labels.shape[1]} vs {len(self.class_names)} classes"
            )

    @property
    def n_images(self) -> int:
        return self.images.shape[0]


def synth_dataset(
    class_names: list[str],
    encoders: FrozenEncoderPair,
    images_per_combo: int = 8,
    noise_std: float = 0.02,
    seed: int = 0,
    n_combos: int | None = None,
    hw: int = 16,
) -> SynthDataset:
    """Build a benchmark set over class combinations.

    The first N combinations are the N singletons, guaranteeing every
    class appears alone at least once; the rest are random subsets of
    size one to three. Every image of a combination shares the same
    pattern sum and differs only in its noise draw.
    """
    n = len(class_names)
    if n < 1:
        raise ParameterError("need at least one class")
    if images_per_combo < 1:
        raise ParameterError(f"images_per_combo must be positive, got {images_per_combo}")
    if noise_std < 0:
        raise ParameterError(f"noise_std must be non-negative, got {noise_std}")
    total_combos = n_combos if n_combos is not None else n
    if total_combos < n:
        raise ParameterError(
            f"n_combos {total_combos} cannot cover all {n} singleton classes"
        )
    targets = decorrelated_targets(encoders, class_names)
    patterns = np.stack(
        [
            class_pattern(encoders, name, hw, target=targets[i])
            for i, name in enumerate(class_names)
        ]
    )
    combo_rng = philox_generator(seed, STREAM_COMBOS)
    combos: list[tuple[int, ...]] = [(i,) for i in range(n)]
    while len(combos) < total_combos:
        k = int(combo_rng.integers(1, min(3, n) + 1))
        combos.append(tuple(sorted(combo_rng.choice(n, size=k, replace=False))))
    noise_rng = philox_generator(seed, STREAM_NOISE)
    images = np.empty((total_combos * images_per_combo, hw, hw, 3))
    labels = np.zeros((total_combos * images_per_combo, n))
    row = 0
    for combo in combos:
        base = np.clip(patterns[list(combo)].sum(axis=0), -1.0, 1.0)
        for _ in range(images_per_combo):
            noise = noise_rng.normal(0.0, noise_std, size=base.shape) if noise_std else 0.0
            images[row] = base + noise
            labels[row, list(combo)] = 1.0
            row += 1
    return SynthDataset(images=images, labels=labels, class_names=list(class_names))


def save_synth(path, ds: SynthDataset) -> None:
    np.savez(
        path,
        images=ds.images,
        labels=ds.labels,
        class_names=np.array(ds.class_names, dtype=object),
    )


def load_synth(path) -> SynthDataset:
    import pickle
    import zipfile

    try:
        data = np.load(path, allow_pickle=True)
        return SynthDataset(
            images=np.asarray(data["images"], dtype=np.float64),
            labels=np.asarray(data["labels"], dtype=np.float64),
            class_names=[str(c) for c in data["class_names"]],
        )
    except (
        KeyError,
        OSError,
        ValueError,
        EOFError,
        pickle.UnpicklingError,
        zipfile.BadZipFile,
    ) as exc:
        raise InputError(f"cannot load dataset from {path}: {exc}") from exc
