"""Training loop: PFBS-driven epochs, AdamW, step learning-rate decay, best-F1 checkpointing."""

from __future__ import annotations

import csv
import io
import logging
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import torch

from . import pfbs
from .checkpoint import Checkpoint
from .config import TrainConfig
from .data import PatchPair, dataset_stats, partition_by_category
from .losses import LossConfig, compute_loss, inverse_frequency_weights
from .metrics import ConfusionCounts, MetricsReport, confusion, report
from .model import HANet, predict

log = logging.getLogger(__name__)

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8


class TrainingDiverged(RuntimeError):
    pass


def lr_at_epoch(initial_lr: float, epoch: int, step_size: int = 8, gamma: float = 0.5) -> float:
    """Staircase decay; ``epoch`` is 0-based."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return initial_lr * gamma ** (epoch // step_size)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    lr: float
    fg: int
    bg: int
    steps: int
    val: MetricsReport | None = None


@dataclass
class TrainingHistory:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_f1: float | None = None
    manifests: dict[int, list[str]] = field(default_factory=dict)

    @property
    def losses(self) -> list[float]:
        return [r.loss for r in self.records]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HISTORY_FIELDS)
        for r in self.records:
            v = r.val
            vals = [""] * 6 if v is None else [
                repr(v.f1), repr(v.precision), repr(v.recall), repr(v.oa), repr(v.kappa), repr(v.iou)]
            w.writerow([r.epoch, repr(r.loss), repr(r.lr), r.fg, r.bg] + vals)
        return buf.getvalue()


HISTORY_FIELDS = ("epoch", "loss", "lr", "fg", "bg",
                  "val_f1", "val_pre", "val_rec", "val_oa", "val_kc", "val_iou")


def seed_everything(seed: int, deterministic: bool = False) -> None:
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)
    if deterministic:
        torch.use_deterministic_algorithms(True)


def to_batch(patches: Sequence[PatchPair], device="cpu", dtype=torch.float32):
    t1 = torch.from_numpy(np.stack([p.t1 for p in patches])).to(device, dtype) / 255.0
    t2 = torch.from_numpy(np.stack([p.t2 for p in patches])).to(device, dtype) / 255.0
    gt = torch.from_numpy(np.stack([p.label for p in patches])).to(device).long()
    return t1, t2, gt


def batches(items: Sequence, size: int):
    for i in range(0, len(items), size):
        yield items[i:i + size]


def resolve_loss(loss: LossConfig, train_patches) -> LossConfig:
    if loss.class_weights is not None:
        return loss
    frac = dataset_stats(train_patches).changed_fraction
    return LossConfig(loss.kind, inverse_frequency_weights(frac),
                      loss.dice_eps, loss.focal_gamma, loss.focal_alpha)


@torch.no_grad()
def evaluate_model(model: HANet, patches: Sequence[PatchPair], batch_size: int = 8) -> MetricsReport:
    model.eval()
    counts = ConfusionCounts()
    for chunk in batches(list(patches), batch_size):
        t1, t2, gt = to_batch(chunk)
        pred = predict(model(t1, t2))
        counts = counts + confusion(pred.numpy(), gt.numpy())
    return report(counts)


def evaluate(checkpoint: Checkpoint, patches: Sequence[PatchPair], batch_size: int = 8) -> MetricsReport:
    if not patches:
        raise ValueError("nothing to evaluate")
    tile = checkpoint.config.tile
    if patches[0].label.shape != (tile, tile):
        raise ValueError(f"checkpoint expects {tile}x{tile} patches, got {patches[0].label.shape}")
    return evaluate_model(checkpoint.build_model(), patches, batch_size)


def train(config: TrainConfig, train_patches: Sequence[PatchPair],
          val_patches: Sequence[PatchPair] = (), model: HANet | None = None,
          on_epoch: Callable[[EpochRecord], None] | None = None):
    """Run the full schedule; returns (best checkpoint, history).

    Without validation patches the last epoch's state is kept. ``on_epoch`` may
    return True to end training after that epoch.
    """
    if not train_patches:
        raise ValueError("empty training set")
    seed_everything(config.seed, config.deterministic)
    if model is None:
        model = HANet(config.model)

    by_id = {p.id: p for p in train_patches}
    if len(by_id) != len(train_patches):
        raise ValueError("training patch ids are not unique")
    fg, bg = partition_by_category(train_patches)
    fg_ids, bg_ids = [p.id for p in fg], [p.id for p in bg]
    loss_cfg = resolve_loss(config.loss, train_patches)
    log.info("pools: %d foreground, %d background; loss %s weights %s",
             len(fg_ids), len(bg_ids), loss_cfg.kind, loss_cfg.class_weights)

    opt = torch.optim.AdamW(model.parameters(), lr=config.initial_lr, betas=ADAM_BETAS,
                            eps=ADAM_EPS, weight_decay=config.weight_decay)
    history = TrainingHistory()
    best = None
    steps = 0

    for epoch in range(1, config.epochs + 1):
        lr = lr_at_epoch(config.initial_lr, epoch - 1, config.step_size, config.gamma)
        for group in opt.param_groups:
            group["lr"] = lr
        plan = pfbs.epoch_plan(config.schedule, epoch, len(fg_ids), len(bg_ids))
        ids = pfbs.select_samples(plan, fg_ids, bg_ids, config.schedule.seed)
        history.manifests[epoch] = ids

        model.train()
        total, seen = 0.0, 0
        for chunk in batches(ids, config.batch_size):
            if config.max_steps and steps >= config.max_steps:
                break
            t1, t2, gt = to_batch([by_id[i] for i in chunk])
            loss = compute_loss(model(t1, t2), gt, loss_cfg)
            if not torch.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss {loss.item()} at epoch {epoch}, step {steps + 1}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            steps += 1
            total += loss.item() * len(chunk)
            seen += len(chunk)

        val = evaluate_model(model, val_patches, config.batch_size) if val_patches else None
        rec = EpochRecord(epoch, total / seen if seen else math.nan, lr,
                          plan.fg_count, plan.bg_count, steps, val)
        history.records.append(rec)
        if val is not None:
            if history.best_val_f1 is None or val.f1 > history.best_val_f1:
                history.best_val_f1, history.best_epoch = val.f1, epoch
                best = Checkpoint.from_model(model, epoch, val.f1)
        log.info("epoch %d lr %.3g fg %d bg %d loss %.5f val_f1 %s",
                 epoch, lr, plan.fg_count, plan.bg_count, rec.loss,
                 "-" if val is None else f"{val.f1:.4f}")
        stop = bool(on_epoch(rec)) if on_epoch else False
        if stop or (config.max_steps and steps >= config.max_steps):
            break

    if best is None:
        history.best_epoch = history.records[-1].epoch
        best = Checkpoint.from_model(model, history.best_epoch, None)
    return best, history
