"""Training configuration and its flat ``key = value`` file format.

Example::

    # WHU-CD, Fixed-15
    initial_lr = 5e-4
    schedule = fixed_x
    x = 15
    loss = hybrid
    stage_channels = 16,32,64,128
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .losses import LossConfig
from .model import HANetConfig
from .pfbs import SamplingSchedule, parse_schedule


@dataclass
class TrainConfig:
    initial_lr: float = 5e-4
    weight_decay: float = 5e-4
    step_size: int = 8
    gamma: float = 0.5
    batch_size: int = 8
    epochs: int = 100
    schedule: SamplingSchedule = field(default_factory=SamplingSchedule)
    loss: LossConfig = field(default_factory=LossConfig)
    model: HANetConfig = field(default_factory=HANetConfig)
    seed: int = 0
    # optional cap on optimizer steps across all epochs (0 = no cap)
    max_steps: int = 0
    deterministic: bool = False

    def __post_init__(self):
        for name in ("initial_lr", "step_size", "gamma", "batch_size", "epochs"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.weight_decay < 0 or self.max_steps < 0:
            raise ValueError("weight_decay and max_steps must be nonnegative")


_INT = ("step_size", "batch_size", "epochs", "seed", "max_steps")
_FLOAT = ("initial_lr", "weight_decay", "gamma")


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


KNOWN_KEYS = set(_INT + _FLOAT) | {
    "schedule", "x", "y", "loss", "w0", "w1", "dice_eps", "focal_gamma", "focal_alpha",
    "deterministic", "tile", "stage_channels", "pooled_sizes", "pcs_dilations",
    "pcs_group_size_fraction", "in_channels",
}


def config_from_dict(kv: dict[str, str], **overrides) -> TrainConfig:
    kv = {**kv, **{k: str(v) for k, v in overrides.items() if v is not None}}
    unknown = set(kv) - KNOWN_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    args = {k: int(kv[k]) for k in _INT if k in kv}
    args.update({k: float(kv[k]) for k in _FLOAT if k in kv})
    if "deterministic" in kv:
        args["deterministic"] = _bool(kv["deterministic"])

    x = int(kv["x"]) if "x" in kv else None
    y = int(kv["y"]) if "y" in kv else None
    policy = kv.get("schedule", "normal")
    if ":" in policy:  # compact form, e.g. fixed:5
        args["schedule"] = parse_schedule(policy, args.get("seed", 0))
    else:
        args["schedule"] = SamplingSchedule(policy, x=x, y=y, seed=args.get("seed", 0))

    weights = None
    if "w0" in kv or "w1" in kv:
        if not ("w0" in kv and "w1" in kv):
            raise ValueError("set both w0 and w1, or neither")
        weights = (float(kv["w0"]), float(kv["w1"]))
    args["loss"] = LossConfig(
        kv.get("loss", "hybrid"), weights,
        float(kv.get("dice_eps", 1.0)),
        float(kv.get("focal_gamma", 2.0)),
        float(kv.get("focal_alpha", 0.25)),
    )

    margs = {}
    if "tile" in kv:
        margs["tile"] = int(kv["tile"])
    if "in_channels" in kv:
        margs["in_channels"] = int(kv["in_channels"])
    for key in ("stage_channels", "pooled_sizes", "pcs_dilations"):
        if key in kv:
            margs[key] = _ints(kv[key])
    if "pcs_group_size_fraction" in kv:
        margs["pcs_group_size_fraction"] = float(kv["pcs_group_size_fraction"])
    if "tile" in margs and "pooled_sizes" not in margs:
        n = len(margs.get("stage_channels", HANetConfig.stage_channels)) - 1
        margs["pooled_sizes"] = tuple(margs["tile"] >> (i + 1) for i in range(n))
    args["model"] = HANetConfig(**margs)
    return TrainConfig(**args)


def load_config(path, **overrides) -> TrainConfig:
    kv = parse_kv(Path(path).read_text()) if path else {}
    return config_from_dict(kv, **overrides)


def dump_config(cfg: TrainConfig) -> str:
    s, l, m = cfg.schedule, cfg.loss, cfg.model
    rows = [
        ("initial_lr", cfg.initial_lr), ("weight_decay", cfg.weight_decay),
        ("step_size", cfg.step_size), ("gamma", cfg.gamma),
        ("batch_size", cfg.batch_size), ("epochs", cfg.epochs),
        ("seed", cfg.seed), ("max_steps", cfg.max_steps),
        ("deterministic", str(cfg.deterministic).lower()),
        ("schedule", s.policy),
    ]
    if s.x is not None:
        rows.append(("x", s.x))
    if s.y is not None:
        rows.append(("y", s.y))
    rows += [("loss", l.kind)]
    if l.class_weights is not None:
        rows += [("w0", l.class_weights[0]), ("w1", l.class_weights[1])]
    rows += [
        ("dice_eps", l.dice_eps), ("focal_gamma", l.focal_gamma), ("focal_alpha", l.focal_alpha),
        ("in_channels", m.in_channels), ("tile", m.tile),
        ("stage_channels", ",".join(map(str, m.stage_channels))),
        ("pooled_sizes", ",".join(map(str, m.pooled_sizes))),
        ("pcs_dilations", ",".join(map(str, m.pcs_dilations))),
        ("pcs_group_size_fraction", m.pcs_group_size_fraction),
    ]
    return "".join(f"{k} = {v}\n" for k, v in rows)
