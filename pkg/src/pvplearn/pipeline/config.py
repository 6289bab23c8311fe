"""Resolved run configuration for both training stages."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields

from ..errors import ParameterError
from ..losses import LossConfig

__all__ = ["StageConfig"]


@dataclass(frozen=True)
class StageConfig:
    """Every knob of a two-stage run, with working defaults.

    First stage: pixel slabs only, large learning rate. Second stage:
    context vectors and adapter at a moderate rate, pixels kept nearly
    frozen by a much smaller one. Both stages anneal with a cosine
    schedule. alpha weighs the visual against the textual similarity at
    inference.
    """

    seed: int = 0
    batch_size: int = 32
    stage1_epochs: int = 40
    stage1_lr: float = 0.1
    stage2_epochs: int = 20
    lr_text: float = 1e-4
    lr_pvp: float = 1e-6
    loss: LossConfig = field(default_factory=LossConfig)
    lambda_mix: float = 0.5
    context_length: int = 16
    alpha: float = 0.5
    prompt_hw: int = 16
    normalize_adapter: bool = True
    adapter_at_inference: bool = True

    def __post_init__(self):
        if self.batch_size < 1:
            raise ParameterError(f"batch_size must be positive, got {self.batch_size}")
        if self.stage1_epochs < 0 or self.stage2_epochs < 0:
            raise ParameterError("epoch counts cannot be negative")
        if self.stage1_lr < 0 or self.lr_text < 0 or self.lr_pvp < 0:
            raise ParameterError("learning rates cannot be negative")
        if not 0.0 <= self.lambda_mix <= 1.0:
            raise ParameterError(
                f"lambda_mix must lie in [0, 1], got {self.lambda_mix}"
            )
        if not 0.0 <= self.alpha <= 1.0:
            raise ParameterError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.context_length < 1:
            raise ParameterError(
                f"context_length must be positive, got {self.context_length}"
            )
        if self.prompt_hw < 1:
            raise ParameterError(f"prompt_hw must be positive, got {self.prompt_hw}")

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "StageConfig":
        """Build from a plain dict, rejecting unknown keys by name."""
        valid = {f.name for f in fields(cls)}
        unknown = set(data) - valid
        if unknown:
            raise ParameterError(
                f"unknown config keys {sorted(unknown)}; valid keys: {sorted(valid)}"
            )
        kwargs = dict(data)
        if "loss" in kwargs and isinstance(kwargs["loss"], dict):
            loss_valid = {f.name for f in fields(LossConfig)}
            loss_unknown = set(kwargs["loss"]) - loss_valid
            if loss_unknown:
                raise ParameterError(
                    f"unknown loss config keys {sorted(loss_unknown)}; "
                    f"valid keys: {sorted(loss_valid)}"
                )
            kwargs["loss"] = LossConfig(**kwargs["loss"])
        return cls(**kwargs)

    def replace(self, **changes) -> "StageConfig":
        data = self.as_dict()
        for key, value in changes.items():
            if key.startswith("loss."):
                data["loss"][key[5:]] = value
            else:
                data[key] = value
        return StageConfig.from_dict(data)
