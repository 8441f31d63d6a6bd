"""Training loop: AdamW, cosine schedule, gradient clipping and accumulation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from loguru import logger

from ..data import Dataset, splitmix64
from ..errors import ConfigError, NumericError, TrainingDivergedError
from ..heads import loss_cls, loss_hm, total_loss
from ..heatmap import heatmap_mae
from ..model import VideoTransformer
from ..schemas import ClipEntry, EpochLog
from ..settings import RunConfig
from ..tensor import scale
from .checkpoint import save_checkpoint
from .optim import AdamW, ParamGroup, clip_grad_norm, cosine_lr
from .windows import ClipSource

HEAD_PREFIX = "head."


@dataclass
class TrainResult:
    model: VideoTransformer
    history: list[EpochLog] = field(default_factory=list)
    checkpoint: Path | None = None


def build_optimizer(model: VideoTransformer, cfg: RunConfig) -> AdamW:
    """Two parameter groups: the heads and everything else (backbone)."""
    named = model.named_parameters()
    opt = cfg.optimizer
    heads = [p for n, p in named.items() if n.startswith(HEAD_PREFIX)]
    backbone = [p for n, p in named.items() if not n.startswith(HEAD_PREFIX)]
    return AdamW(
        groups=[
            ParamGroup("backbone", backbone, opt.lr_backbone, opt.weight_decay),
            ParamGroup("heads", heads, opt.lr_heads, opt.weight_decay),
        ],
        beta1=opt.beta1,
        beta2=opt.beta2,
        eps=opt.eps,
    )


class Trainer:
    """Single-writer training over the train split of a dataset."""

    def __init__(
        self, cfg: RunConfig, dataset: Dataset, model: VideoTransformer | None = None
    ) -> None:
        if cfg.pose_tokens and dataset.manifest.landmarks != cfg.heads.landmarks:
            msg = (
                f"Dataset has {dataset.manifest.landmarks} landmarks, "
                f"heads.landmarks={cfg.heads.landmarks}"
            )
            raise ConfigError(msg)
        if len(dataset.manifest.classes) > cfg.heads.num_classes:
            msg = (
                f"Dataset has {len(dataset.manifest.classes)} classes, "
                f"heads.num_classes={cfg.heads.num_classes}"
            )
            raise ConfigError(msg)
        self.cfg = cfg
        self.dataset = dataset
        self.model = model or VideoTransformer.from_config(cfg)
        self.source = ClipSource(dataset, cfg)
        self.optimizer = build_optimizer(self.model, cfg)

    def _schedule(self, step: int, total: int) -> tuple[float, float]:
        opt = self.cfg.optimizer
        lrs = (
            cosine_lr(step, total, opt.lr_backbone, opt.lr_backbone * opt.min_lr_ratio),
            cosine_lr(step, total, opt.lr_heads, opt.lr_heads * opt.min_lr_ratio),
        )
        self.optimizer.set_lr("backbone", lrs[0])
        self.optimizer.set_lr("heads", lrs[1])
        return lrs

    def fit(self, run_dir: str | Path | None = None) -> TrainResult:
        """Train for `optimizer.epochs` epochs; write log and checkpoint to `run_dir`."""
        cfg = self.cfg
        opt = cfg.optimizer
        entries = self.dataset.entries("train")
        if not entries:
            raise ConfigError("The dataset has no training clips")
        batches_per_epoch = math.ceil(len(entries) / opt.batch_size)
        steps_per_epoch = math.ceil(batches_per_epoch / opt.accumulate_grad_batches)
        clips_per_step = opt.batch_size * opt.accumulate_grad_batches
        total_steps = steps_per_epoch * opt.epochs
        rng = np.random.default_rng(splitmix64(cfg.seed))

        log_path = None
        if run_dir is not None:
            Path(run_dir).mkdir(parents=True, exist_ok=True)
            log_path = Path(run_dir) / "training_log.jsonl"
            log_path.write_text("", encoding="utf-8")

        history: list[EpochLog] = []
        step = 0
        lrs = self._schedule(0, total_steps)
        for epoch in range(1, opt.epochs + 1):
            order = rng.permutation(len(entries))
            sums = {"loss": 0.0, "cls": 0.0, "hm": 0.0, "mae": 0.0}
            correct = 0
            self.optimizer.zero_grad()
            for b in range(batches_per_epoch):
                window = b // opt.accumulate_grad_batches * clips_per_step
                # gradients are averaged over every clip that feeds one optimizer step
                step_clips = min(len(entries), window + clips_per_step) - window
                batch = [entries[i] for i in order[b * opt.batch_size : (b + 1) * opt.batch_size]]
                for entry in batch:
                    parts = self._train_clip(entry, step_clips, epoch)
                    sums["loss"] += parts[0]
                    sums["cls"] += parts[1]
                    sums["hm"] += parts[2]
                    sums["mae"] += parts[3]
                    correct += parts[4]
                last = b == batches_per_epoch - 1
                if (b + 1) % opt.accumulate_grad_batches == 0 or last:
                    clip_grad_norm(self.model.parameters(), opt.grad_clip)
                    self.optimizer.step()
                    self.optimizer.zero_grad()
                    step += 1
                    lrs = self._schedule(step, total_steps)

            n = len(entries)
            record = EpochLog(
                epoch=epoch,
                loss=sums["loss"] / n,
                loss_cls=sums["cls"] / n,
                loss_hm=sums["hm"] / n,
                train_accuracy=correct / n,
                heatmap_mae=sums["mae"] / n if cfg.pose_tokens else None,
                lr_backbone=lrs[0],
                lr_heads=lrs[1],
            )
            history.append(record)
            logger.info(
                "epoch {}/{} loss={:.4f} cls={:.4f} hm={:.4f} acc={:.3f}",
                epoch,
                opt.epochs,
                record.loss,
                record.loss_cls,
                record.loss_hm,
                record.train_accuracy,
            )
            if log_path is not None:
                with log_path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record.model_dump(), sort_keys=True) + "\n")

        checkpoint = None
        if run_dir is not None:
            checkpoint = save_checkpoint(Path(run_dir) / "checkpoint", self.model, cfg)
        return TrainResult(model=self.model, history=history, checkpoint=checkpoint)

    def _train_clip(
        self, entry: ClipEntry, step_clips: int, epoch: int
    ) -> tuple[float, float, float, float, int]:
        cfg = self.cfg
        start = self.source.starts(entry, 1)[0]
        try:
            out = self.model.forward(self.source.window(entry, start), cfg.selection)
            l_cls = loss_cls(out.logits, entry.label, cfg.heads.label_smoothing)
            l_hm = None
            mae = 0.0
            if out.heatmaps is not None:
                target = self.source.target(entry, start)
                l_hm = loss_hm(out.heatmaps, target, cfg.heads.mse_scale)
                mae = heatmap_mae(np.clip(out.heatmaps.data, 0.0, 1.0), target)
            loss = total_loss(l_cls, l_hm, cfg.heads.w_cls, cfg.heads.w_hm)
            scale(loss, 1.0 / step_clips).backward()
        except NumericError as exc:
            msg = f"Training diverged at epoch {epoch} on clip {entry.id}: {exc}"
            raise TrainingDivergedError(msg) from exc
        correct = int(int(np.argmax(out.logits.data)) == entry.label)
        hm_value = 0.0 if l_hm is None else l_hm.item()
        return loss.item(), l_cls.item(), hm_value, mae, correct


def train(cfg: RunConfig, dataset: Dataset, run_dir: str | Path | None = None) -> TrainResult:
    return Trainer(cfg, dataset).fit(run_dir)
