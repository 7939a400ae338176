"""Error maps, training-curve export and ablation sweep tables."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from PIL import Image  # noqa: E402

from .metrics import MetricsReport  # noqa: E402
from .trainer import HISTORY_FIELDS, TrainingHistory  # noqa: E402

WHITE = (255, 255, 255)  # TP
RED = (255, 0, 0)        # FP
BLACK = (0, 0, 0)        # TN
BLUE = (0, 0, 255)       # FN

# indexed by 2 * pred + gt
_PALETTE = np.array([BLACK, BLUE, RED, WHITE], dtype=np.uint8)

PLOT_STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 120,
}


def _binary(a, name):
    a = np.asarray(a)
    if not np.isin(a, (0, 1)).all():
        raise ValueError(f"{name} must be binary")
    return a.astype(np.uint8)


def render_error_map(pred, gt) -> np.ndarray:
    """(H, W, 3) uint8 raster: TP white, FP red, TN black, FN blue."""
    pred, gt = _binary(pred, "pred"), _binary(gt, "gt")
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    return _PALETTE[2 * pred + gt]


def decode_error_map(rgb) -> tuple[np.ndarray, np.ndarray]:
    rgb = np.asarray(rgb)
    pred = np.zeros(rgb.shape[:2], np.uint8)
    gt = np.zeros(rgb.shape[:2], np.uint8)
    matched = np.zeros(rgb.shape[:2], bool)
    for code, color in enumerate(_PALETTE):
        hit = (rgb == color).all(axis=-1)
        pred[hit], gt[hit] = code >> 1, code & 1
        matched |= hit
    if not matched.all():
        raise ValueError("raster contains colors outside the error-map palette")
    return pred, gt


def save_error_map(pred, gt, path) -> None:
    path = Path(path)
    if path.suffix.lower() not in (".png", ".tif", ".tiff", ".bmp"):
        raise ValueError("error maps need a lossless format (png, tif, bmp)")
    Image.fromarray(render_error_map(pred, gt)).save(path)


# --- training curves ---

def read_history_csv(path) -> dict[str, list[float]]:
    return parse_history_csv(Path(path).read_text())


def parse_history_csv(text: str) -> dict[str, list[float]]:
    rows = list(csv.DictReader(io.StringIO(text)))
    cols: dict[str, list[float]] = {k: [] for k in HISTORY_FIELDS}
    for r in rows:
        for k in HISTORY_FIELDS:
            cols[k].append(float(r[k]) if r[k] != "" else float("nan"))
    return cols


def plot_curves(cols: dict[str, list[float]], out_dir, stem: str = "curves") -> list[Path]:
    """Loss and validation precision per epoch; returns the written PNG paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    panels = (("loss", "training loss", "loss"), ("val_pre", "validation precision", "precision"))
    with plt.rc_context(PLOT_STYLE):
        for key, ylabel, suffix in panels:
            fig, ax = plt.subplots(figsize=(4.5, 3.0))
            ax.plot(cols["epoch"], cols[key], color="tab:blue", lw=1.2)
            ax.set_xlabel("epoch")
            ax.set_ylabel(ylabel)
            fig.tight_layout()
            path = out_dir / f"{stem}_{suffix}.png"
            # no Software/date metadata so identical data gives identical bytes
            fig.savefig(path, format="png", metadata={"Software": None})
            plt.close(fig)
            written.append(path)
    return written


def export_curves(history: TrainingHistory, out_dir, stem: str = "curves") -> tuple[Path, list[Path]]:
    if not history.records:
        raise ValueError("empty history")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{stem}.csv"
    csv_path.write_text(history.to_csv())
    return csv_path, plot_curves(read_history_csv(csv_path), out_dir, stem)


# --- sweep tables ---

SWEEP_FIELDS = ("config", "f1", "precision", "recall", "oa", "kappa", "iou")


def sweep_table(entries: Sequence[tuple[str, MetricsReport]]) -> tuple[str, str]:
    """CSV and aligned-text renderings, best F1 first."""
    if not entries:
        raise ValueError("empty sweep")
    rows = sorted(entries, key=lambda e: e[1].f1, reverse=True)
    cells = [[name] + [f"{getattr(r, k):.4f}" for k in SWEEP_FIELDS[1:]] for name, r in rows]

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_FIELDS)
    w.writerows(cells)

    table = [list(SWEEP_FIELDS)] + cells
    widths = [max(len(row[i]) for row in table) for i in range(len(SWEEP_FIELDS))]
    lines = []
    for j, row in enumerate(table):
        lines.append("  ".join(c.ljust(widths[0]) if i == 0 else c.rjust(widths[i])
                               for i, c in enumerate(row)).rstrip())
        if j == 0:
            lines.append("  ".join("-" * n for n in widths))
    return buf.getvalue(), "\n".join(lines) + "\n"


def parse_sweep_csv(text: str) -> list[dict]:
    out = []
    for r in csv.DictReader(io.StringIO(text)):
        out.append({k: (r[k] if k == "config" else float(r[k])) for k in SWEEP_FIELDS})
    return out


def plot_plan(plans_by_label: dict, path) -> Path:
    """Training patches per epoch (foreground plus admitted background) for each schedule."""
    path = Path(path)
    with plt.rc_context(PLOT_STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        for label, plans in plans_by_label.items():
            ax.step([p.epoch for p in plans], [p.total for p in plans], where="post", label=label, lw=1.2)
        ax.set_xlabel("epoch")
        ax.set_ylabel("training patches")
        ax.legend()
        fig.tight_layout()
        fig.savefig(path, format="png", metadata={"Software": None})
        plt.close(fig)
    return path
