"""Progressive foreground-balanced sampling.

Each schedule maps a 1-based epoch to how many foreground and background
patches that epoch trains on. Foreground patches are always all included;
background patches are admitted as the cumulative prefix of one fixed,
seeded permutation, so backgrounds added at an epoch stay in every later
epoch.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

POLICIES = ("normal", "fixed_x", "linear_y", "fixed_x_linear_y")


@dataclass(frozen=True)
class SamplingSchedule:
    policy: str = "normal"
    x: int | None = None
    y: int | None = None
    seed: int = 0

    def __post_init__(self):
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}; expected one of {POLICIES}")
        if self.policy in ("fixed_x", "fixed_x_linear_y") and (self.x is None or self.x < 1):
            raise ValueError(f"{self.policy} needs x >= 1")
        if self.policy in ("linear_y", "fixed_x_linear_y") and (self.y is None or self.y < 1):
            raise ValueError(f"{self.policy} needs y >= 1")

    @classmethod
    def normal(cls, seed=0):
        return cls("normal", seed=seed)

    @classmethod
    def fixed(cls, x, seed=0):
        return cls("fixed_x", x=x, seed=seed)

    @classmethod
    def linear(cls, y, seed=0):
        return cls("linear_y", y=y, seed=seed)

    @classmethod
    def fixed_linear(cls, x, y, seed=0):
        return cls("fixed_x_linear_y", x=x, y=y, seed=seed)

    @property
    def full_epoch(self) -> int:
        """First epoch from which the full dataset is used."""
        if self.policy == "normal":
            return 1
        if self.policy == "fixed_x":
            return self.x + 1
        if self.policy == "linear_y":
            return self.y + 1
        return self.x + self.y + 1

    def label(self) -> str:
        if self.policy == "normal":
            return "Normal"
        if self.policy == "fixed_x":
            return f"Fixed-{self.x}"
        if self.policy == "linear_y":
            return f"Linear-{self.y}"
        return f"Fixed-{self.x} Linear-{self.y}"


@dataclass(frozen=True)
class EpochPlan:
    epoch: int
    fg_count: int
    bg_count: int

    @property
    def total(self) -> int:
        return self.fg_count + self.bg_count


def epoch_plan(schedule: SamplingSchedule, epoch: int, n_fg: int, n_bg: int) -> EpochPlan:
    if epoch < 1:
        raise ValueError("epochs are 1-based")
    if n_fg < 0 or n_bg < 0:
        raise ValueError("pool sizes must be nonnegative")
    p = schedule.policy
    if p == "normal" or n_bg == 0:
        bg = n_bg
    elif p == "fixed_x":
        bg = 0 if epoch <= schedule.x else n_bg
    elif p == "linear_y":
        if epoch <= schedule.y:
            bg = min(n_bg, (epoch - 1) * (n_bg // schedule.y))
        else:
            bg = n_bg
    else:
        x, y = schedule.x, schedule.y
        if epoch <= x:
            bg = 0
        elif epoch <= x + y:
            bg = min(n_bg, (epoch - x) * (n_bg // y))
        else:
            bg = n_bg
    return EpochPlan(epoch, n_fg, bg)


def _epoch_seed(seed: int, epoch: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, epoch])


def background_order(bg_pool: Sequence, seed: int) -> list:
    """The fixed permutation whose prefixes are the admitted backgrounds."""
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    return [bg_pool[i] for i in rng.permutation(len(bg_pool))]


def select_samples(plan: EpochPlan, fg_pool: Sequence, bg_pool: Sequence, seed: int) -> list:
    """Ordered sample ids for one epoch: all foregrounds plus a background prefix, shuffled."""
    if plan.fg_count > len(fg_pool) or plan.bg_count > len(bg_pool):
        raise ValueError(
            f"plan ({plan.fg_count}, {plan.bg_count}) exceeds pools "
            f"({len(fg_pool)}, {len(bg_pool)})")
    chosen = list(fg_pool[: plan.fg_count]) + background_order(bg_pool, seed)[: plan.bg_count]
    rng = np.random.default_rng(_epoch_seed(seed, plan.epoch))
    return [chosen[i] for i in rng.permutation(len(chosen))]


def full_plan(schedule: SamplingSchedule, n_fg: int, n_bg: int, epochs: int = 100) -> list[EpochPlan]:
    return [epoch_plan(schedule, e, n_fg, n_bg) for e in range(1, epochs + 1)]


def plan_csv(plans: list[EpochPlan]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["epoch", "fg_count", "bg_count", "total"])
    for p in plans:
        w.writerow([p.epoch, p.fg_count, p.bg_count, p.total])
    return buf.getvalue()


def parse_schedule(spec: str, seed: int = 0) -> SamplingSchedule:
    """Parse ``normal``, ``fixed:15``, ``linear:15`` or ``fixed-linear:10,10``."""
    name, _, args = spec.strip().lower().partition(":")
    nums = [int(a) for a in args.split(",") if a.strip()]
    if name == "normal":
        return SamplingSchedule.normal(seed)
    if name in ("fixed", "fixed_x") and len(nums) == 1:
        return SamplingSchedule.fixed(nums[0], seed)
    if name in ("linear", "linear_y") and len(nums) == 1:
        return SamplingSchedule.linear(nums[0], seed)
    if name in ("fixed-linear", "fixed_x_linear_y") and len(nums) == 2:
        return SamplingSchedule.fixed_linear(nums[0], nums[1], seed)
    raise ValueError(f"cannot parse schedule {spec!r}")
