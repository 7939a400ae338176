"""Synthetic bi-temporal patches for smoke tests and desk-scale experiments.

T2 is T1 under a random illumination/tint shift with sensor noise, plus a few
unlabeled vegetation blobs that change color (irrelevant change). Foreground
patches additionally get new rectangular roofs in T2; those pixels are the
only ones labeled changed.
"""

from __future__ import annotations

import numpy as np

from .data import ImagePairRecord, PatchPair


def _smooth_texture(rng, size, scale=4):
    coarse = rng.uniform(60, 170, size=(3, size // scale + 2, size // scale + 2))
    up = np.kron(coarse, np.ones((scale, scale)))[:, :size, :size]
    # cheap blur: average with shifted copies
    blurred = (up + np.roll(up, 1, 1) + np.roll(up, 1, 2) + np.roll(up, (1, 1), (1, 2))) / 4
    return blurred + rng.normal(0, 6, size=blurred.shape)


def make_patch(rng, size=32, foreground=True, max_buildings=2, building_range=(4, 8),
               parent_id="syn", offset=(0, 0)) -> PatchPair:
    t1 = _smooth_texture(rng, size)
    gain = rng.uniform(0.8, 1.2)
    tint = rng.normal(0, 8, size=(3, 1, 1))
    t2 = t1 * gain + tint + rng.normal(0, 6, size=t1.shape)
    label = np.zeros((size, size), np.uint8)

    for _ in range(rng.integers(1, 3)):
        r = rng.integers(2, max(3, size // 6))
        cy, cx = rng.integers(0, size, 2)
        yy, xx = np.ogrid[:size, :size]
        blob = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
        t1[:, blob] = np.array([60, 130, 50])[:, None] + rng.normal(0, 8, (3, blob.sum()))
        t2[:, blob] = np.array([140, 110, 60])[:, None] + rng.normal(0, 8, (3, blob.sum()))

    if foreground:
        lo, hi = building_range
        for _ in range(rng.integers(1, max_buildings + 1)):
            h, w = rng.integers(lo, hi + 1, 2)
            y, x = rng.integers(0, size - h + 1), rng.integers(0, size - w + 1)
            roof = np.array([215, 85, 70]) + rng.normal(0, 10, 3)
            t2[:, y:y + h, x:x + w] = roof[:, None, None] + rng.normal(0, 5, (3, h, w))
            label[y:y + h, x:x + w] = 1

    to8 = lambda a: np.clip(np.rint(a), 0, 255).astype(np.uint8)  # noqa: E731
    return PatchPair(parent_id, offset, to8(t1), to8(t2), label)


def make_patches(n, size=32, fg_fraction=0.25, seed=0, prefix="syn", **kw) -> list[PatchPair]:
    """n patches, the first round(n * fg_fraction) of them foreground, in shuffled order."""
    rng = np.random.default_rng(seed)
    n_fg = int(round(n * fg_fraction))
    kinds = np.array([True] * n_fg + [False] * (n - n_fg))
    rng.shuffle(kinds)
    return [make_patch(rng, size, bool(fg), parent_id=f"{prefix}{i}", **kw)
            for i, fg in enumerate(kinds)]


def make_pair(size=512, tile=256, fg_fraction=0.5, seed=0, pair_id="scene") -> ImagePairRecord:
    """A full scene assembled from synthetic tiles, for exercising the on-disk pipeline."""
    rng = np.random.default_rng(seed)
    t1 = np.zeros((size, size, 3), np.uint8)
    t2 = np.zeros_like(t1)
    label = np.zeros((size, size), np.uint8)
    for r in range(0, size, tile):
        for c in range(0, size, tile):
            th, tw = min(tile, size - r), min(tile, size - c)
            p = make_patch(rng, tile, bool(rng.random() < fg_fraction),
                           building_range=(tile // 8, tile // 4))
            t1[r:r + th, c:c + tw] = p.t1.transpose(1, 2, 0)[:th, :tw]
            t2[r:r + th, c:c + tw] = p.t2.transpose(1, 2, 0)[:th, :tw]
            label[r:r + th, c:c + tw] = p.label[:th, :tw]
    return ImagePairRecord(pair_id, t1, t2, label)
