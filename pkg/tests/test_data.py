import json

import numpy as np
import pytest

from hanet_cd.data import (
    BACKGROUND,
    FOREGROUND,
    ImagePairRecord,
    PatchPair,
    classify_patch,
    dataset_stats,
    load_patches,
    patches_from_manifest,
    read_manifest,
    save_pair,
    split_dataset,
    stitch,
    tile_many,
    tile_pair,
    write_manifest,
)
from hanet_cd.synthetic import make_pair


def random_pair(h, w, seed=0, pid="p"):
    rng = np.random.default_rng(seed)
    img = lambda: rng.integers(0, 256, (h, w, 3), dtype=np.uint8)  # noqa: E731
    label = (rng.random((h, w)) < 0.05).astype(np.uint8) * 255
    return ImagePairRecord(pid, img(), img(), label)


def test_label_normalized():
    pair = random_pair(8, 8)
    assert set(np.unique(pair.label)) <= {0, 1}


def test_mismatched_shapes():
    with pytest.raises(ValueError):
        ImagePairRecord("x", np.zeros((4, 4, 3), np.uint8), np.zeros((4, 5, 3), np.uint8),
                        np.zeros((4, 4), np.uint8))


def test_tile_512():
    patches = tile_pair(random_pair(512, 512), 256)
    assert [p.offset for p in patches] == [(0, 0), (0, 256), (256, 0), (256, 256)]
    assert patches[0].t1.shape == (3, 256, 256)


def test_tile_drops_partial_border():
    patches = tile_pair(random_pair(300, 300), 256)
    assert [p.offset for p in patches] == [(0, 0)]


def test_patch_count_levir_arithmetic():
    # 445 pairs of 1024 x 1024 at tile 256; checked on a small stand-in with the same ratio
    patches = tile_many([random_pair(64, 64, i, f"p{i}") for i in range(445)], 16)
    assert len(patches) == 7120


def test_stitch_roundtrip():
    pair = random_pair(70, 45, seed=2)
    patches = tile_pair(pair, 16)
    t1, t2, label, covered = stitch(patches, 70, 45)
    assert covered.sum() == 64 * 32
    assert np.array_equal(t1[covered], pair.image_t1[covered])
    assert np.array_equal(t2[covered], pair.image_t2[covered])
    assert np.array_equal(label[covered], pair.label[covered])


def test_stats_sum_matches_tiles():
    pair = random_pair(64, 64, seed=5)
    patches = tile_pair(pair, 16)
    stats = dataset_stats(patches)
    assert stats.changed_pixels == sum(p.changed_pixels for p in patches) == pair.label.sum()
    assert stats.changed_pixels + stats.unchanged_pixels == 64 * 64
    assert stats.foreground_patches + stats.background_patches == 16


def test_classify():
    z = np.zeros((256, 256), np.uint8)
    assert classify_patch(z) == BACKGROUND
    z[100, 7] = 1
    assert classify_patch(z) == FOREGROUND


def test_all_zero_stats():
    p = PatchPair("a", (0, 0), np.zeros((3, 4, 4), np.uint8), np.zeros((3, 4, 4), np.uint8),
                  np.zeros((4, 4), np.uint8))
    s = dataset_stats([p])
    assert s.changed_fraction == 0 and s.background_patches == 1


def test_empty_stats_error():
    with pytest.raises(ValueError):
        dataset_stats([])


def test_whu_fraction_arithmetic():
    from hanet_cd.data import ClassBalanceReport
    r = ClassBalanceReport(21_442_501, 481_873_979, 0, 0)
    assert round(r.changed_fraction * 100, 2) == 4.26
    assert round(r.unchanged_fraction * 100, 2) == 95.74


def test_stats_exports():
    s = dataset_stats(tile_pair(random_pair(32, 32), 16))
    assert json.loads(s.to_json())["changed_pixels"] == s.changed_pixels
    assert f"changed_pixels={s.changed_pixels}\n" in s.to_text()


def test_split_sizes():
    items = list(range(5040))
    train, val = split_dataset(items, 0.1, seed=3)
    assert (len(train), len(val)) == (4536, 504)
    assert sorted(train + val) == items and not set(train) & set(val)
    assert split_dataset(items, 0.1, seed=3) == (train, val)
    assert split_dataset(items, 0.0, seed=3) == (items, [])


def test_split_rejects_bad_fraction():
    with pytest.raises(ValueError):
        split_dataset([1, 2], 1.0)


def test_disk_roundtrip_and_manifest(tmp_path):
    pair = make_pair(size=96, tile=32, seed=1, pair_id="scene1")
    save_pair(tmp_path, "train", pair)
    patches = load_patches(tmp_path, "train", 32)
    assert len(patches) == 9
    assert np.array_equal(patches[4].t1, pair.image_t1[32:64, 32:64].transpose(2, 0, 1))
    assert np.array_equal(patches[4].label, pair.label[32:64, 32:64])

    write_manifest(patches, tmp_path / "manifest.csv")
    rows = read_manifest(tmp_path / "manifest.csv")
    assert rows[1] == {"id": "scene1", "offset_row": 0, "offset_col": 32,
                       "category": patches[1].category}
    again = patches_from_manifest(tmp_path, "train", rows, 32)
    for a, b in zip(patches, again):
        assert a.id == b.id and a.category == b.category
        assert np.array_equal(a.t2, b.t2) and np.array_equal(a.label, b.label)
