"""The two training stages.

Stage one learns only the pseudo-image pixels by ranking corpus texts
against their image embeddings. Stage two restarts from a stage-one
checkpoint and co-trains pixels (tiny rate), text context vectors, and
the dual adapter under the combined objective. Both stages write a CSV
loss log and emit a self-describing checkpoint.
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import numpy as np

from ..checkpoint import Checkpoint
from ..corpus.generate import CorpusText
from ..encoders import FrozenEncoderPair
from ..errors import ContractError, DigestMismatchError, ParameterError
from ..losses import LabelSets, LossReport, ranking_loss, total_loss
from ..model import DualAdapter, PseudoVisualPrompt, TextPromptSet
from ..numerics import CosineSchedule, Tensor, grad, no_grad, philox_generator, sgd_step
from .config import StageConfig

__all__ = ["train_stage1", "train_stage2"]

logger = logging.getLogger(__name__)

STREAM_SHUFFLE_S1 = 300
STREAM_SHUFFLE_S2 = 301

LOG_COLUMNS = ("epoch", "step", "l_vtc", "l_visual", "l_text", "total", "lr")


class _LossLog:
    """Accumulates per-step rows and writes one CSV at the end."""

    def __init__(self, path):
        self.path = Path(path) if path else None
        self.rows: list[tuple] = []

    def add(self, epoch: int, step: int, report: LossReport, lr: float) -> None:
        self.rows.append(
            (epoch, step, report.vtc, report.visual, report.text, report.total, lr)
        )

    def write(self) -> None:
        if not self.path:
            return
        with open(self.path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(LOG_COLUMNS)
            writer.writerows(self.rows)


def _label_sets(texts: list[CorpusText], n_classes: int) -> list[LabelSets]:
    return [LabelSets.from_positives(t.labels, n_classes) for t in texts]


def _encode_texts(texts: list[CorpusText], encoders: FrozenEncoderPair) -> np.ndarray:
    with no_grad():
        return np.stack([encoders.encode_text(t.text).data for t in texts])


def _batches(n_items: int, batch_size: int, rng) -> list[np.ndarray]:
    order = rng.permutation(n_items)
    return [order[s : s + batch_size] for s in range(0, n_items, batch_size)]


def _base_meta(cfg: StageConfig, class_names: list[str], encoders: FrozenEncoderPair) -> dict:
    return {
        "seed": cfg.seed,
        "hyperparams": cfg.as_dict(),
        "class_names": list(class_names),
        "encoder_digest": encoders.digest(),
        "encoder_config": encoders.config(),
    }


def train_stage1(
    texts: list[CorpusText],
    class_names: list[str],
    encoders: FrozenEncoderPair,
    cfg: StageConfig,
    log_path=None,
) -> Checkpoint:
    """Learn the pixel slabs against the frozen pair; returns a stage-1 checkpoint."""
    if not texts:
        raise ParameterError("training corpus is empty")
    n = len(class_names)
    pvp = PseudoVisualPrompt.init(n, cfg.prompt_hw, cfg.seed)
    labels = _label_sets(texts, n)
    text_emb = _encode_texts(texts, encoders)
    sched = CosineSchedule(cfg.stage1_lr, max(1, cfg.stage1_epochs))
    shuffle_rng = philox_generator(cfg.seed, STREAM_SHUFFLE_S1)
    log = _LossLog(log_path)
    aborted = False
    for epoch in range(cfg.stage1_epochs):
        lr = sched.lr(epoch)
        for step, batch in enumerate(_batches(len(texts), cfg.batch_size, shuffle_rng)):
            h_b = Tensor(text_emb[batch])
            batch_labels = [labels[i] for i in batch]

            def loss_fn():
                v = pvp.embeddings(encoders)
                return ranking_loss(h_b @ v.T, batch_labels, cfg.loss.margin)

            try:
                grads = grad(loss_fn, pvp.params())
            except ContractError as exc:
                logger.error(
                    "aborting stage 1 at epoch %d step %d: %s", epoch, step, exc
                )
                aborted = True
                break
            with no_grad():
                value = float(loss_fn().data)
            log.add(epoch, step, LossReport(visual=value, total=value), lr)
            pvp.set_params(sgd_step(pvp.params(), grads, lr))
        if aborted:
            break
    log.write()
    meta = _base_meta(cfg, class_names, encoders)
    meta["aborted"] = aborted
    return Checkpoint(
        stage=1, meta=meta, tensors={"pvp_pixels": pvp.pixels.data.copy()}
    )


def train_stage2(
    texts: list[CorpusText],
    stage1_ckpt: Checkpoint,
    encoders: FrozenEncoderPair,
    cfg: StageConfig,
    log_path=None,
) -> Checkpoint:
    """Co-train pixels, context vectors, and adapter from a stage-1 state."""
    if not texts:
        raise ParameterError("training corpus is empty")
    if stage1_ckpt.stage != 1:
        raise ParameterError(f"expected a stage-1 checkpoint, got stage {stage1_ckpt.stage}")
    found = stage1_ckpt.meta.get("encoder_digest")
    if found != encoders.digest():
        raise DigestMismatchError(
            f"stage-1 checkpoint was trained against encoder {found}, "
            f"current encoder is {encoders.digest()}"
        )
    class_names = list(stage1_ckpt.meta["class_names"])
    n = len(class_names)
    pvp = PseudoVisualPrompt(
        Tensor(stage1_ckpt.require("pvp_pixels").copy(), requires_grad=True)
    )
    prompts = TextPromptSet.init(encoders, class_names, cfg.context_length, cfg.seed)
    adapter = DualAdapter.init(encoders.embed_dim, cfg.lambda_mix, cfg.seed)
    labels = _label_sets(texts, n)
    text_emb = _encode_texts(texts, encoders)
    sched_text = CosineSchedule(cfg.lr_text, max(1, cfg.stage2_epochs))
    sched_pvp = CosineSchedule(cfg.lr_pvp, max(1, cfg.stage2_epochs))
    shuffle_rng = philox_generator(cfg.seed, STREAM_SHUFFLE_S2)
    log = _LossLog(log_path)
    aborted = False
    for epoch in range(cfg.stage2_epochs):
        lr_text = sched_text.lr(epoch)
        lr_pvp = sched_pvp.lr(epoch)
        for step, batch in enumerate(_batches(len(texts), cfg.batch_size, shuffle_rng)):
            e_raw = Tensor(text_emb[batch])
            batch_labels = [labels[i] for i in batch]
            report_box: list[LossReport] = []

            def loss_fn():
                u = adapter.apply(
                    pvp.embeddings(encoders), "visual", cfg.normalize_adapter
                )
                g = adapter.apply(
                    prompts.embeddings(encoders), "text", cfg.normalize_adapter
                )
                if u.shape != (n, encoders.embed_dim) or g.shape != u.shape:
                    raise ContractError(
                        f"prompt embedding matrices must be ({n}, "
                        f"{encoders.embed_dim}), got {u.shape} and {g.shape}"
                    )
                e_b = adapter.apply(e_raw, "text", cfg.normalize_adapter)
                value, report = total_loss(u, g, e_b, batch_labels, cfg.loss)
                report_box.append(report)
                return value

            all_params = pvp.params() + prompts.params() + adapter.params()
            try:
                grads = grad(loss_fn, all_params)
            except ContractError as exc:
                logger.error(
                    "aborting stage 2 at epoch %d step %d: %s", epoch, step, exc
                )
                aborted = True
                break
            log.add(epoch, step, report_box[-1], lr_text)
            n_pvp = len(pvp.params())
            pvp.set_params(sgd_step(pvp.params(), grads[:n_pvp], lr_pvp))
            rest = prompts.params() + adapter.params()
            new_rest = sgd_step(rest, grads[n_pvp:], lr_text)
            prompts.set_params(new_rest[: len(prompts.params())])
            adapter.set_params(new_rest[len(prompts.params()) :])
        if aborted:
            break
    log.write()
    meta = _base_meta(cfg, class_names, encoders)
    meta["aborted"] = aborted
    tensors = {
        "pvp_pixels": pvp.pixels.data.copy(),
        "context": prompts.context.data.copy(),
        "class_rows": prompts.class_rows.data.copy(),
    }
    for name in DualAdapter.PARAM_ORDER:
        tensors[f"adapter_{name}"] = adapter.weights[name].data.copy()
    return Checkpoint(stage=2, meta=meta, tensors=tensors)
