"""Scikit-learn style facade over the two-stage training pipeline.

The estimator trains on labeled texts and scores images: fit consumes a
text corpus with multi-hot class targets, decision_function and predict
consume (n, H, W, 3) pixel arrays. All constructor arguments are stored
verbatim so get_params, set_params, and clone behave as sklearn expects.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .corpus.generate import CorpusText
from .encoders import FrozenEncoderPair
from .errors import ParameterError
from .losses import LossConfig
from .pipeline import StageConfig, evaluate_map, infer, train_stage1, train_stage2

__all__ = ["PvpClassifier"]


class PvpClassifier(BaseEstimator):
    """Multi-label classifier learning one prompt pair per class.

    Parameters mirror the pipeline configuration; encoders and
    class_names bind the estimator to a frozen encoder pair whose
    vocabulary must cover the class names.
    """

    def __init__(
        self,
        encoders: FrozenEncoderPair | None = None,
        class_names: list[str] | None = None,
        seed: int = 0,
        batch_size: int = 32,
        stage1_epochs: int = 40,
        stage1_lr: float = 0.1,
        stage2_epochs: int = 20,
        lr_text: float = 1e-4,
        lr_pvp: float = 1e-6,
        loss: LossConfig | None = None,
        lambda_mix: float = 0.5,
        context_length: int = 16,
        alpha: float = 0.5,
        prompt_hw: int = 16,
        normalize_adapter: bool = True,
        adapter_at_inference: bool = True,
        decision_threshold: float = 0.25,
    ):
        self.encoders = encoders
        self.class_names = class_names
        self.seed = seed
        self.batch_size = batch_size
        self.stage1_epochs = stage1_epochs
        self.stage1_lr = stage1_lr
        self.stage2_epochs = stage2_epochs
        self.lr_text = lr_text
        self.lr_pvp = lr_pvp
        self.loss = loss
        self.lambda_mix = lambda_mix
        self.context_length = context_length
        self.alpha = alpha
        self.prompt_hw = prompt_hw
        self.normalize_adapter = normalize_adapter
        self.adapter_at_inference = adapter_at_inference
        self.decision_threshold = decision_threshold

    def _stage_config(self) -> StageConfig:
        return StageConfig(
            seed=self.seed,
            batch_size=self.batch_size,
            stage1_epochs=self.stage1_epochs,
            stage1_lr=self.stage1_lr,
            stage2_epochs=self.stage2_epochs,
            lr_text=self.lr_text,
            lr_pvp=self.lr_pvp,
            loss=self.loss if self.loss is not None else LossConfig(),
            lambda_mix=self.lambda_mix,
            context_length=self.context_length,
            alpha=self.alpha,
            prompt_hw=self.prompt_hw,
            normalize_adapter=self.normalize_adapter,
            adapter_at_inference=self.adapter_at_inference,
        )

    def fit(self, X, y):
        """Train both stages on texts X with multi-hot targets y.

        X is a sequence of strings; y is (n_texts, n_classes) with at
        least one positive per row.
        """
        if self.encoders is None:
            raise ParameterError("encoders must be set before fitting")
        if not self.class_names:
            raise ParameterError("class_names must be set before fitting")
        y = np.asarray(y)
        texts = list(X)
        if y.ndim != 2 or y.shape != (len(texts), len(self.class_names)):
            raise ParameterError(
                f"y must have shape ({len(texts)}, {len(self.class_names)}), "
                f"got {y.shape}"
            )
        corpus = [
            CorpusText(text=t, labels=tuple(int(i) for i in np.flatnonzero(row > 0)))
            for t, row in zip(texts, y)
        ]
        cfg = self._stage_config()
        stage1 = train_stage1(corpus, list(self.class_names), self.encoders, cfg)
        self.stage1_checkpoint_ = stage1
        self.checkpoint_ = train_stage2(corpus, stage1, self.encoders, cfg)
        self.classes_ = np.asarray(self.class_names, dtype=object)
        return self

    def _require_fitted(self) -> None:
        if not hasattr(self, "checkpoint_"):
            raise NotFittedError(
                "this PvpClassifier instance is not fitted yet; call fit first"
            )

    def decision_function(self, X) -> np.ndarray:
        """Fused per-class scores for images X, shape (n_images, n_classes)."""
        self._require_fitted()
        result = infer(np.asarray(X), self.checkpoint_, self.encoders, alpha=self.alpha)
        return result.scores

    def transform(self, X) -> np.ndarray:
        """Alias of decision_function: images to class-similarity space."""
        return self.decision_function(X)

    def predict(self, X) -> np.ndarray:
        """Multi-hot predictions: scores thresholded at decision_threshold."""
        return (self.decision_function(X) >= self.decision_threshold).astype(np.int64)

    def score(self, X, y) -> float:
        """Mean average precision of the fused scores against multi-hot y.

        Ranking quality is the native figure of merit here, so this
        deliberately replaces the accuracy default.
        """
        return evaluate_map(self.decision_function(X), np.asarray(y))[0]
