"""Training objectives: pairwise ranking, symmetric contrastive, and BCE.

The second-stage objective is a weighted sum of three parts computed on
unit-norm embeddings:

* an alignment term tying class i's visual prompt to class i's text
  prompt (square similarity matrix against an identity target);
* a ranking term scoring corpus texts against the visual prompts;
* a ranking term scoring corpus texts against the text prompts.

Each ranking term can be swapped for a multi-hot BCE variant and the
alignment term for a ranking variant, to support ablations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ParameterError, ShapeError
from .numerics import Tensor, logsumexp, softplus

__all__ = [
    "LabelSets",
    "LossConfig",
    "LossReport",
    "ranking_loss",
    "contrastive_alignment",
    "prompt_ranking_loss",
    "multihot_bce_loss",
    "total_loss",
]

VTC_VARIANTS = ("CE", "RL")
RANK_VARIANTS = ("RL", "CE")


@dataclass(frozen=True)
class LabelSets:
    """Positive and negative class index sets for one sample.

    The two sets must partition the full class range and positives must
    be non-empty; samples without any matched class never reach a loss.
    """

    positives: tuple[int, ...]
    negatives: tuple[int, ...]

    def __post_init__(self):
        pos, neg = set(self.positives), set(self.negatives)
        if not pos:
            raise ContractError("sample has no positive classes")
        if pos & neg:
            raise ContractError(f"classes in both sets: {sorted(pos & neg)}")
        n = len(pos) + len(neg)
        if pos | neg != set(range(n)):
            raise ContractError(
                f"sets must partition 0..{n - 1}, got {sorted(pos | neg)}"
            )

    @classmethod
    def from_positives(cls, positives, n_classes: int) -> "LabelSets":
        pos = tuple(sorted(set(int(i) for i in positives)))
        if pos and (pos[0] < 0 or pos[-1] >= n_classes):
            raise ContractError(f"class index outside 0..{n_classes - 1}: {pos}")
        neg = tuple(i for i in range(n_classes) if i not in set(pos))
        return cls(positives=pos, negatives=neg)

    @property
    def n_classes(self) -> int:
        return len(self.positives) + len(self.negatives)


@dataclass(frozen=True)
class LossConfig:
    """Weights, temperatures, and variant switches for the objective."""

    margin: float = 1.0
    tau: float = 0.02
    gamma: float = 1.0
    eta: float = 1.0
    nu: float = 1.0
    vtc_variant: str = "CE"
    visual_variant: str = "RL"
    text_variant: str = "RL"
    tau_ce: float = 1.0

    def __post_init__(self):
        if self.margin < 0:
            raise ParameterError(f"margin must be non-negative, got {self.margin}")
        if self.tau <= 0:
            raise ParameterError(f"tau must be positive, got {self.tau}")
        if self.tau_ce <= 0:
            raise ParameterError(f"tau_ce must be positive, got {self.tau_ce}")
        for name in ("gamma", "eta", "nu"):
            if getattr(self, name) < 0:
                raise ParameterError(
                    f"{name} must be non-negative, got {getattr(self, name)}"
                )
        if self.vtc_variant not in VTC_VARIANTS:
            raise ParameterError(
                f"vtc_variant must be one of {VTC_VARIANTS}, got {self.vtc_variant!r}"
            )
        if self.visual_variant not in RANK_VARIANTS:
            raise ParameterError(
                f"visual_variant must be one of {RANK_VARIANTS}, "
                f"got {self.visual_variant!r}"
            )
        if self.text_variant not in RANK_VARIANTS:
            raise ParameterError(
                f"text_variant must be one of {RANK_VARIANTS}, got {self.text_variant!r}"
            )


@dataclass
class LossReport:
    """Scalar values of the three parts and their weighted total."""

    vtc: float = 0.0
    visual: float = 0.0
    text: float = 0.0
    total: float = 0.0

    def as_dict(self) -> dict:
        return {"vtc": self.vtc, "visual": self.visual, "text": self.text,
                "total": self.total}


def _check_scores(scores: Tensor, labels: list[LabelSets]) -> tuple[int, int]:
    if scores.ndim != 2:
        raise ShapeError(f"scores must be (B, N), got {scores.shape}")
    b, n = scores.shape
    if len(labels) != b:
        raise ShapeError(f"{len(labels)} label sets for {b} score rows")
    for ls in labels:
        if ls.n_classes != n:
            raise ShapeError(
                f"label sets cover {ls.n_classes} classes, scores have {n}"
            )
    return b, n


def ranking_loss(scores: Tensor, labels: list[LabelSets], margin: float = 1.0) -> Tensor:
    """Mean over samples of sum_{i in pos, j in neg} max(0, m - s_i + s_j).

    Zero exactly when every positive score clears every negative score of
    the same sample by at least the margin. Invariant to adding a constant
    to any single sample's scores.
    """
    b, n = _check_scores(scores, labels)
    mask = np.zeros((b, n, n))
    for k, ls in enumerate(labels):
        for i in ls.positives:
            mask[k, i, ls.negatives] = 1.0
    diff = scores.reshape((b, n, 1)) - scores.reshape((b, 1, n))
    hinge = (Tensor(margin) - diff).relu()
    return (hinge * Tensor(mask)).sum() * (1.0 / b)


def contrastive_alignment(u: Tensor, g: Tensor, tau: float) -> Tensor:
    """Symmetric cross-entropy against an identity target on u @ g.T / tau.

    Both inputs are (N, D); row i of each is the same class in the two
    modalities. Computed through logsumexp, so small tau is safe.
    """
    if u.ndim != 2 or g.ndim != 2 or u.shape != g.shape:
        raise ShapeError(f"expected matching (N, D) inputs, got {u.shape} and {g.shape}")
    n = u.shape[0]
    s = u @ g.T * (1.0 / tau)
    idx = (list(range(n)), list(range(n)))
    diag = s[idx]
    rows = (logsumexp(s, axis=1) - diag).mean()
    cols = (logsumexp(s, axis=0) - diag).mean()
    return (rows + cols) * 0.5


def prompt_ranking_loss(
    text_emb: Tensor, prompt_emb: Tensor, labels: list[LabelSets], margin: float = 1.0
) -> Tensor:
    """Ranking loss on similarities between batch texts and class prompts."""
    if text_emb.ndim != 2 or prompt_emb.ndim != 2:
        raise ShapeError(
            f"expected 2-D embeddings, got {text_emb.shape} and {prompt_emb.shape}"
        )
    return ranking_loss(text_emb @ prompt_emb.T, labels, margin)


def multihot_bce_loss(
    scores: Tensor, labels: list[LabelSets], tau_ce: float = 1.0
) -> Tensor:
    """Mean binary cross-entropy of scores/tau_ce against the multi-hot target.

    BCE(x, y) = y*softplus(-x) + (1-y)*softplus(x), averaged over all
    (sample, class) cells.
    """
    b, n = _check_scores(scores, labels)
    target = np.zeros((b, n))
    for k, ls in enumerate(labels):
        target[k, list(ls.positives)] = 1.0
    x = scores * (1.0 / tau_ce)
    y = Tensor(target)
    cell = y * softplus(-x) + (1.0 - y) * softplus(x)
    return cell.mean()


def _singleton_labels(n: int) -> list[LabelSets]:
    return [LabelSets.from_positives([i], n) for i in range(n)]


def total_loss(
    u: Tensor,
    g: Tensor,
    text_emb: Tensor,
    labels: list[LabelSets],
    cfg: LossConfig,
) -> tuple[Tensor, LossReport]:
    """Weighted second-stage objective.

    u: adapted visual prompt embeddings (N, D)
    g: adapted text prompt embeddings (N, D)
    text_emb: adapted batch text embeddings (B, D)
    labels: per-text label sets, len B
    """
    n = u.shape[0]
    if cfg.vtc_variant == "CE":
        vtc = contrastive_alignment(u, g, cfg.tau)
    else:
        vtc = ranking_loss(u @ g.T, _singleton_labels(n), cfg.margin)
    if cfg.visual_variant == "RL":
        visual = prompt_ranking_loss(text_emb, u, labels, cfg.margin)
    else:
        visual = multihot_bce_loss(text_emb @ u.T, labels, cfg.tau_ce)
    if cfg.text_variant == "RL":
        text = prompt_ranking_loss(text_emb, g, labels, cfg.margin)
    else:
        text = multihot_bce_loss(text_emb @ g.T, labels, cfg.tau_ce)
    total = vtc * cfg.gamma + visual * cfg.eta + text * cfg.nu
    report = LossReport(
        vtc=float(vtc.data),
        visual=float(visual.data),
        text=float(text.data),
        total=float(total.data),
    )
    return total, report
