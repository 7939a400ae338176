"""Bi-temporal dataset ingestion: loading, tiling, foreground/background tagging, statistics."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

FOREGROUND = "foreground"
BACKGROUND = "background"
IMAGE_SUFFIXES = (".png", ".tif", ".tiff")
SPLITS = ("train", "val", "test")


@dataclass
class ImagePairRecord:
    """One co-registered pair. Images are (H, W, 3) uint8, label is (H, W) in {0, 1}."""

    id: str
    image_t1: np.ndarray
    image_t2: np.ndarray
    label: np.ndarray

    def __post_init__(self):
        self.label = normalize_label(self.label)
        h, w = self.label.shape
        for name in ("image_t1", "image_t2"):
            img = getattr(self, name)
            if img.shape[:2] != (h, w):
                raise ValueError(
                    f"{self.id}: {name} is {img.shape[:2]}, label is {(h, w)}")


@dataclass
class PatchPair:
    """A tile of a pair in (C, H, W) layout."""

    parent_id: str
    offset: tuple[int, int]
    t1: np.ndarray
    t2: np.ndarray
    label: np.ndarray
    category: str = field(default="")

    def __post_init__(self):
        if not self.category:
            self.category = classify_patch(self.label)

    @property
    def id(self) -> str:
        return patch_id(self.parent_id, self.offset)

    @property
    def changed_pixels(self) -> int:
        return int(np.count_nonzero(self.label))


@dataclass(frozen=True)
class ClassBalanceReport:
    changed_pixels: int
    unchanged_pixels: int
    foreground_patches: int
    background_patches: int

    @property
    def changed_fraction(self) -> float:
        total = self.changed_pixels + self.unchanged_pixels
        return self.changed_pixels / total if total else 0.0

    @property
    def unchanged_fraction(self) -> float:
        return 1.0 - self.changed_fraction

    def __add__(self, other: "ClassBalanceReport") -> "ClassBalanceReport":
        return ClassBalanceReport(
            self.changed_pixels + other.changed_pixels,
            self.unchanged_pixels + other.unchanged_pixels,
            self.foreground_patches + other.foreground_patches,
            self.background_patches + other.background_patches,
        )

    def to_dict(self) -> dict:
        return {
            "changed_pixels": self.changed_pixels,
            "unchanged_pixels": self.unchanged_pixels,
            "changed_fraction": self.changed_fraction,
            "unchanged_fraction": self.unchanged_fraction,
            "foreground_patches": self.foreground_patches,
            "background_patches": self.background_patches,
        }

    def to_text(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self.to_dict().items())

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def patch_id(parent_id: str, offset: tuple[int, int]) -> str:
    return f"{parent_id}_{offset[0]}_{offset[1]}"


def normalize_label(label) -> np.ndarray:
    label = np.asarray(label)
    if label.ndim == 3:
        label = label.max(axis=2)
    if label.ndim != 2:
        raise ValueError(f"label must be 2-D, got shape {label.shape}")
    return (label != 0).astype(np.uint8)


def classify_patch(label) -> str:
    return FOREGROUND if np.any(label) else BACKGROUND


def tile_pair(pair: ImagePairRecord, tile: int = 256) -> list[PatchPair]:
    """Cut a pair into non-overlapping tile x tile patches, row-major; partial border tiles are dropped."""
    if tile < 1:
        raise ValueError("tile must be >= 1")
    h, w = pair.label.shape
    t1 = np.ascontiguousarray(pair.image_t1.transpose(2, 0, 1))
    t2 = np.ascontiguousarray(pair.image_t2.transpose(2, 0, 1))
    out = []
    for r in range(0, h - tile + 1, tile):
        for c in range(0, w - tile + 1, tile):
            out.append(PatchPair(
                pair.id, (r, c),
                t1[:, r:r + tile, c:c + tile].copy(),
                t2[:, r:r + tile, c:c + tile].copy(),
                pair.label[r:r + tile, c:c + tile].copy(),
            ))
    return out


def tile_many(pairs: Iterable[ImagePairRecord], tile: int = 256, workers: int = 1) -> list[PatchPair]:
    pairs = list(pairs)
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            chunks = list(ex.map(lambda p: tile_pair(p, tile), pairs))
    else:
        chunks = [tile_pair(p, tile) for p in pairs]
    return [p for chunk in chunks for p in chunk]


def stitch(patches: Sequence[PatchPair], height: int, width: int):
    """Reassemble patches at their offsets; returns (t1 HWC, t2 HWC, label, covered mask)."""
    t1 = np.zeros((height, width, 3), np.uint8)
    t2 = np.zeros((height, width, 3), np.uint8)
    label = np.zeros((height, width), np.uint8)
    covered = np.zeros((height, width), bool)
    for p in patches:
        r, c = p.offset
        th, tw = p.label.shape
        t1[r:r + th, c:c + tw] = p.t1.transpose(1, 2, 0)
        t2[r:r + th, c:c + tw] = p.t2.transpose(1, 2, 0)
        label[r:r + th, c:c + tw] = p.label
        covered[r:r + th, c:c + tw] = True
    return t1, t2, label, covered


def label_stats(label) -> ClassBalanceReport:
    label = normalize_label(label)
    changed = int(np.count_nonzero(label))
    fg = 1 if changed else 0
    return ClassBalanceReport(changed, label.size - changed, fg, 1 - fg)


def dataset_stats(patches: Sequence[PatchPair]) -> ClassBalanceReport:
    if len(patches) == 0:
        raise ValueError("dataset_stats needs at least one patch")
    total = ClassBalanceReport(0, 0, 0, 0)
    for p in patches:
        total = total + label_stats(p.label)
    return total


def split_dataset(patches: Sequence, val_fraction: float, seed: int = 0):
    """Seeded random split into (train, val); val gets floor(n * val_fraction) items."""
    if not 0 <= val_fraction < 1:
        raise ValueError("val_fraction must be in [0, 1)")
    n = len(patches)
    n_val = math.floor(n * val_fraction + 1e-9)
    perm = np.random.default_rng(seed).permutation(n)
    val_idx = set(perm[:n_val].tolist())
    train = [p for i, p in enumerate(patches) if i not in val_idx]
    val = [p for i, p in enumerate(patches) if i in val_idx]
    return train, val


def partition_by_category(patches: Sequence[PatchPair]):
    fg = [p for p in patches if p.category == FOREGROUND]
    bg = [p for p in patches if p.category == BACKGROUND]
    return fg, bg


# --- on-disk layout: <root>/<split>/{A,B,label}/<id>.<png|tif> ---

def _read_image(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def _read_label(path: Path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im)
    return normalize_label(arr)


def list_ids(root, split: str) -> list[str]:
    folder = Path(root) / split / "A"
    if not folder.is_dir():
        raise FileNotFoundError(f"missing directory {folder}")
    return sorted(p.stem for p in folder.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def _find(folder: Path, stem: str) -> Path:
    for suffix in IMAGE_SUFFIXES:
        p = folder / f"{stem}{suffix}"
        if p.exists():
            return p
    raise FileNotFoundError(f"no image for {stem!r} in {folder}")


def load_pair(root, split: str, pair_id: str) -> ImagePairRecord:
    base = Path(root) / split
    return ImagePairRecord(
        pair_id,
        _read_image(_find(base / "A", pair_id)),
        _read_image(_find(base / "B", pair_id)),
        _read_label(_find(base / "label", pair_id)),
    )


def load_split(root, split: str) -> list[ImagePairRecord]:
    return [load_pair(root, split, i) for i in list_ids(root, split)]


def save_pair(root, split: str, pair: ImagePairRecord) -> None:
    base = Path(root) / split
    for sub in ("A", "B", "label"):
        (base / sub).mkdir(parents=True, exist_ok=True)
    Image.fromarray(pair.image_t1).save(base / "A" / f"{pair.id}.png")
    Image.fromarray(pair.image_t2).save(base / "B" / f"{pair.id}.png")
    Image.fromarray(pair.label * 255).save(base / "label" / f"{pair.id}.png")


MANIFEST_FIELDS = ("id", "offset_row", "offset_col", "category")


def write_manifest(patches: Sequence[PatchPair], path) -> None:
    write_manifest_rows(
        [{"id": p.parent_id, "offset_row": p.offset[0], "offset_col": p.offset[1],
          "category": p.category} for p in patches], path)


def write_manifest_rows(rows: Sequence[dict], path) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(MANIFEST_FIELDS)
        for r in rows:
            w.writerow([r[k] for k in MANIFEST_FIELDS])


def read_manifest(path) -> list[dict]:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    for r in rows:
        r["offset_row"] = int(r["offset_row"])
        r["offset_col"] = int(r["offset_col"])
    return rows


def patches_from_manifest(root, split: str, rows: Sequence[dict], tile: int = 256) -> list[PatchPair]:
    """Materialize manifest entries by cropping their source pairs (each source is read once)."""
    cache: dict[str, ImagePairRecord] = {}
    out = []
    for r in rows:
        pid = r["id"]
        if pid not in cache:
            cache[pid] = load_pair(root, split, pid)
        pair = cache[pid]
        y, x = r["offset_row"], r["offset_col"]
        out.append(PatchPair(
            pid, (y, x),
            np.ascontiguousarray(pair.image_t1[y:y + tile, x:x + tile].transpose(2, 0, 1)),
            np.ascontiguousarray(pair.image_t2[y:y + tile, x:x + tile].transpose(2, 0, 1)),
            pair.label[y:y + tile, x:x + tile].copy(),
            r.get("category") or "",
        ))
    return out


def load_patches(root, split: str, tile: int = 256) -> list[PatchPair]:
    return tile_many(load_split(root, split), tile)
