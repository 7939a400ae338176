"""HANet: Siamese multi-scale encoder with hierarchical attention (HAN) modules."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F


@dataclass
class HANetConfig:
    in_channels: int = 3
    tile: int = 256
    stage_channels: tuple = (16, 32, 64, 128)
    pcs_dilations: tuple = (1, 2, 3, 4)
    pcs_group_size_fraction: float = 0.5
    pooled_sizes: tuple = (128, 64, 32)
    num_classes: int = 2

    def __post_init__(self):
        self.stage_channels = tuple(int(c) for c in self.stage_channels)
        self.pcs_dilations = tuple(int(d) for d in self.pcs_dilations)
        self.pooled_sizes = tuple(int(s) for s in self.pooled_sizes)
        if len(self.stage_channels) != len(self.pooled_sizes) + 1:
            raise ValueError("need exactly one more stage than pooling layers")
        if any(c <= 0 for c in self.stage_channels):
            raise ValueError("stage_channels must be positive")
        sizes = (self.tile,) + self.pooled_sizes
        if any(a <= b for a, b in zip(sizes, sizes[1:])):
            raise ValueError("pooled_sizes must be strictly decreasing and below tile")

    @property
    def scale_sizes(self) -> tuple:
        return (self.tile,) + self.pooled_sizes

    @classmethod
    def scaled(cls, tile: int, stage_channels=(16, 32, 64, 128)) -> "HANetConfig":
        """Same architecture at a smaller tile; each pooling halves the size."""
        n = len(stage_channels) - 1
        return cls(tile=tile, stage_channels=tuple(stage_channels),
                   pooled_sizes=tuple(tile >> (i + 1) for i in range(n)))

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "HANetConfig":
        return cls(**d)


# --- attention cores: softmax / matmul / residual, no convolutions ---

def channel_attention_core(x, return_affinity=False):
    """C x C affinity over flattened positions; returns attended + x."""
    b, c, h, w = x.shape
    q = x.reshape(b, c, h * w)
    affinity = torch.softmax(torch.bmm(q, q.transpose(1, 2)), dim=-1)
    out = torch.bmm(affinity, q).reshape(b, c, h, w) + x
    return (out, affinity) if return_affinity else out


def column_attention_core(x, return_affinity=False):
    """For every column, an H x H affinity between that column's positions.

    affinity has shape (B, W, H, H).
    """
    energy = torch.einsum("bchw,bcgw->bwhg", x, x)
    affinity = torch.softmax(energy, dim=-1)
    out = torch.einsum("bwhg,bcgw->bchw", affinity, x) + x
    return (out, affinity) if return_affinity else out


def row_attention_core(x, return_affinity=False):
    """For every row, a W x W affinity; affinity has shape (B, H, W, W)."""
    energy = torch.einsum("bchw,bchv->bhwv", x, x)
    affinity = torch.softmax(energy, dim=-1)
    out = torch.einsum("bhwv,bchv->bchw", affinity, x) + x
    return (out, affinity) if return_affinity else out


class ConvBlock(nn.Module):
    """relu(bn(conv1x1(g(x)) + conv3x3'(x))) with g(x) = relu(bn(conv3x3(x)))."""

    def __init__(self, in_ch, out_ch):
        super().__init__()
        self.in_ch = in_ch
        self.conv_in = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.bn_in = nn.BatchNorm2d(out_ch)
        self.conv_mix = nn.Conv2d(out_ch, out_ch, 1)
        # a second, independent 3x3 kernel for the residual path
        self.conv_skip = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.bn_out = nn.BatchNorm2d(out_ch)

    def forward(self, x):
        if x.shape[-3] != self.in_ch:
            raise ValueError(f"ConvBlock expects {self.in_ch} channels, got {x.shape[-3]}")
        g = F.relu(self.bn_in(self.conv_in(x)))
        return F.relu(self.bn_out(self.conv_mix(g) + self.conv_skip(x)))


class PCS(nn.Module):
    """Parallel dilated group convolutions over the concatenated pair, fused by a 1x1 conv."""

    def __init__(self, channels, dilations=(1, 2, 3, 4), group_size_fraction=0.5):
        super().__init__()
        cat_ch = 2 * channels
        group_size = max(1, int(round(cat_ch * group_size_fraction)))
        if cat_ch % group_size:
            raise ValueError(f"group size {group_size} does not divide {cat_ch} channels")
        self.groups = cat_ch // group_size
        self.branches = nn.ModuleList(
            nn.Conv2d(cat_ch, cat_ch, 3, padding=d, dilation=d, groups=self.groups)
            for d in dilations
        )
        self.fuse = nn.Conv2d(cat_ch * len(dilations), channels, 1)

    def forward(self, f1, f2, return_intermediates=False):
        if f1.shape != f2.shape:
            raise ValueError(f"branch shapes differ: {tuple(f1.shape)} vs {tuple(f2.shape)}")
        cat = torch.cat([f1, f2], dim=1)
        s = torch.cat([conv(cat) for conv in self.branches], dim=1)
        out = self.fuse(s)
        if return_intermediates:
            return out, cat, s
        return out


class _AttentionBlock(nn.Module):
    core = staticmethod(channel_attention_core)

    def __init__(self, channels):
        super().__init__()
        self.conv_in = nn.Conv2d(channels, channels, 3, padding=1)
        self.conv_out = nn.Conv2d(channels, channels, 1)

    def forward(self, x):
        return self.conv_out(self.core(self.conv_in(x)))


class CAM(_AttentionBlock):
    core = staticmethod(channel_attention_core)


class ColumnAttention(_AttentionBlock):
    core = staticmethod(column_attention_core)


class RowAttention(_AttentionBlock):
    core = staticmethod(row_attention_core)


class HANModule(nn.Module):
    """PCS, then CAM and column-then-row attention in parallel, summed."""

    def __init__(self, channels, dilations=(1, 2, 3, 4), group_size_fraction=0.5):
        super().__init__()
        self.pcs = PCS(channels, dilations, group_size_fraction)
        self.cam = CAM(channels)
        self.col = ColumnAttention(channels)
        self.row = RowAttention(channels)

    def forward(self, f1, f2):
        out1 = self.pcs(f1, f2)
        return self.cam(out1) + self.row(self.col(out1))


class HANet(nn.Module):
    def __init__(self, config: HANetConfig | None = None):
        super().__init__()
        self.config = config = config or HANetConfig()
        widths = (config.in_channels,) + config.stage_channels
        self.blocks = nn.ModuleList(ConvBlock(a, b) for a, b in zip(widths, widths[1:]))
        self.pools = nn.ModuleList(nn.AdaptiveAvgPool2d(s) for s in config.pooled_sizes)
        self.hans = nn.ModuleList(
            HANModule(c, config.pcs_dilations, config.pcs_group_size_fraction)
            for c in config.stage_channels
        )
        self.head = nn.Conv2d(sum(config.stage_channels), config.num_classes, 1)
        init_weights(self)

    def _check(self, x):
        t = self.config.tile
        if x.dim() != 4 or tuple(x.shape[1:]) != (self.config.in_channels, t, t):
            raise ValueError(
                f"expected input (B, {self.config.in_channels}, {t}, {t}), got {tuple(x.shape)}")

    def encode(self, x):
        """Features of one temporal branch at every scale, finest first."""
        feats = []
        for i, block in enumerate(self.blocks):
            if i > 0:
                x = self.pools[i - 1](x)
            x = block(x)
            feats.append(x)
        return feats

    def encode_pair(self, t1, t2):
        """Encode both dates in one batch so batch norm sees the same statistics for each."""
        self._check(t1)
        self._check(t2)
        n = t1.shape[0]
        feats = self.encode(torch.cat([t1, t2], dim=0))
        return [f[:n] for f in feats], [f[n:] for f in feats]

    def forward(self, t1, t2):
        squeeze = t1.dim() == 3
        if squeeze:
            t1, t2 = t1.unsqueeze(0), t2.unsqueeze(0)
        feats1, feats2 = self.encode_pair(t1, t2)
        size = (self.config.tile, self.config.tile)
        outs = []
        for han, a, b in zip(self.hans, feats1, feats2):
            o = han(a, b)
            if o.shape[-2:] != size:
                o = F.interpolate(o, size=size, mode="bilinear", align_corners=False)
            outs.append(o)
        logits = self.head(torch.cat(outs, dim=1))
        return logits.squeeze(0) if squeeze else logits


def init_weights(module: nn.Module) -> None:
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            nn.init.kaiming_normal_(m.weight, mode="fan_in", nonlinearity="relu")
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, nn.BatchNorm2d):
            nn.init.ones_(m.weight)
            nn.init.zeros_(m.bias)


def predict(logits):
    """Argmax over the class axis; ties go to class 0 (unchanged)."""
    return (logits[..., 1, :, :] > logits[..., 0, :, :]).to(torch.uint8)


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())


def estimate_flops(model: HANet) -> int:
    """Multiply-accumulate count for one input pair (convolutions plus attention matmuls)."""
    total = 0
    hooks = []

    def conv_hook(m, inp, out):
        nonlocal total
        kh, kw = m.kernel_size
        total += out.numel() * (m.in_channels // m.groups) * kh * kw

    def attn_hook(m, inp, out):
        nonlocal total
        _, c, h, w = out.shape
        if isinstance(m, CAM):
            total += 2 * c * c * h * w
        elif isinstance(m, ColumnAttention):
            total += 2 * w * h * h * c
        elif isinstance(m, RowAttention):
            total += 2 * h * w * w * c

    for m in model.modules():
        if isinstance(m, nn.Conv2d):
            hooks.append(m.register_forward_hook(conv_hook))
        elif isinstance(m, (CAM, ColumnAttention, RowAttention)):
            hooks.append(m.register_forward_hook(attn_hook))
    cfg = model.config
    x = torch.zeros(1, cfg.in_channels, cfg.tile, cfg.tile)
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            model(x, x)
    finally:
        for h in hooks:
            h.remove()
        model.train(was_training)
    return total
