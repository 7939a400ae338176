"""Hybrid (weighted cross-entropy + dice) loss and the focal-loss alternative.

All losses take logits shaped (2, H, W) or (B, 2, H, W) and a binary ground
truth shaped (H, W) or (B, H, W). Class 1 is "changed".
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F


@dataclass
class LossConfig:
    kind: str = "hybrid"
    # None means "derive from the training split's class balance"
    class_weights: tuple | None = None
    dice_eps: float = 1.0
    focal_gamma: float = 2.0
    focal_alpha: float = 0.25

    def __post_init__(self):
        if self.kind not in ("hybrid", "focal"):
            raise ValueError(f"unknown loss {self.kind!r}")
        if self.class_weights is not None:
            if len(self.class_weights) != 2 or min(self.class_weights) < 0:
                raise ValueError("class_weights must be two nonnegative numbers")
            self.class_weights = tuple(float(w) for w in self.class_weights)
        if self.dice_eps <= 0:
            raise ValueError("dice_eps must be positive")


def inverse_frequency_weights(changed_fraction: float) -> tuple[float, float]:
    """(w0, w1) = (changed fraction, unchanged fraction)."""
    return (changed_fraction, 1.0 - changed_fraction)


def _prepare(logits, gt):
    if logits.dim() == 3:
        logits = logits.unsqueeze(0)
    if gt.dim() == 2:
        gt = gt.unsqueeze(0)
    if logits.shape[1] != 2 or logits.shape[0] != gt.shape[0] or logits.shape[2:] != gt.shape[1:]:
        raise ValueError(f"logits {tuple(logits.shape)} do not match gt {tuple(gt.shape)}")
    if not bool(((gt == 0) | (gt == 1)).all()):
        raise ValueError("ground truth must be binary")
    return logits, gt.long()


def weighted_ce(logits, gt, weights=(1.0, 1.0)):
    """Mean over pixels of w[y] * -log softmax(logits)[y]."""
    logits, gt = _prepare(logits, gt)
    logp = F.log_softmax(logits, dim=1)
    nll = -logp.gather(1, gt.unsqueeze(1)).squeeze(1)
    w = torch.as_tensor(weights, dtype=logits.dtype, device=logits.device)[gt]
    return (w * nll).mean()


def dice_loss(logits, gt, eps=1.0):
    """1 - (2 sum(p*y) + eps) / (sum(y) + sum(p) + eps), p = changed-class probability."""
    logits, gt = _prepare(logits, gt)
    p = torch.softmax(logits, dim=1)[:, 1]
    y = gt.to(p.dtype)
    return 1.0 - (2.0 * (p * y).sum() + eps) / (y.sum() + p.sum() + eps)


def hybrid_loss(logits, gt, config: LossConfig | None = None):
    config = config or LossConfig()
    weights = config.class_weights or (1.0, 1.0)
    return weighted_ce(logits, gt, weights) + dice_loss(logits, gt, config.dice_eps)


def focal_loss(logits, gt, gamma=2.0, alpha=0.25):
    """Mean of -alpha_t (1 - p_t)^gamma log p_t, alpha_t = alpha for class 1 else 1 - alpha."""
    if gamma < 0 or not 0 <= alpha <= 1:
        raise ValueError("need gamma >= 0 and alpha in [0, 1]")
    logits, gt = _prepare(logits, gt)
    logp_t = F.log_softmax(logits, dim=1).gather(1, gt.unsqueeze(1)).squeeze(1)
    p_t = logp_t.exp()
    alpha_t = torch.where(gt == 1, alpha, 1.0 - alpha).to(logits.dtype)
    return (-alpha_t * (1.0 - p_t) ** gamma * logp_t).mean()


def compute_loss(logits, gt, config: LossConfig):
    if config.kind == "focal":
        return focal_loss(logits, gt, config.focal_gamma, config.focal_alpha)
    return hybrid_loss(logits, gt, config)
