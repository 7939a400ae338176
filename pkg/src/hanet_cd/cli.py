"""Command-line entry point: ``hanet-cd <command> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import data as dp
from . import pfbs
from .config import dump_config, load_config

log = logging.getLogger("hanet_cd")


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=argparse.SUPPRESS, help="key = value training config file")
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--out", default=argparse.SUPPRESS, help="output directory")
    p.add_argument("--deterministic", action="store_true", default=argparse.SUPPRESS)
    return p


def _out(args) -> Path:
    out = Path(getattr(args, "out", None) or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args, **extra):
    overrides = {"seed": getattr(args, "seed", None)}
    if getattr(args, "deterministic", False):
        overrides["deterministic"] = "true"
    overrides.update(extra)
    return load_config(getattr(args, "config", None), **overrides)


def _patches(args, split, tile):
    manifest = getattr(args, "manifest", None)
    if manifest:
        return dp.patches_from_manifest(args.data, split, dp.read_manifest(manifest), tile)
    return dp.load_patches(args.data, split, tile)


# --- data commands ---

def cmd_stats(args):
    from .model import HANet, count_parameters, estimate_flops

    cfg = _config(args)
    out = _out(args)
    if args.data:
        patches = dp.load_patches(args.data, args.split, cfg.model.tile)
        stats = dp.dataset_stats(patches)
        (out / f"stats_{args.split}.txt").write_text(stats.to_text())
        (out / f"stats_{args.split}.json").write_text(stats.to_json())
        sys.stdout.write(stats.to_text())
    model = HANet(cfg.model)
    n = count_parameters(model)
    macs = estimate_flops(model)
    print(f"parameters={n}")
    print(f"parameters_m={n / 1e6:.2f}")
    print(f"flops_g={macs / 1e9:.2f}")


def cmd_tile(args):
    cfg = _config(args)
    tile = args.tile or cfg.model.tile
    patches = dp.load_patches(args.data, args.split, tile)
    path = _out(args) / f"manifest_{args.split}.csv"
    dp.write_manifest(patches, path)
    fg, bg = dp.partition_by_category(patches)
    print(f"patches={len(patches)} foreground={len(fg)} background={len(bg)} manifest={path}")


def cmd_split(args):
    rows = dp.read_manifest(args.manifest)
    seed = getattr(args, "seed", 0)
    train, val = dp.split_dataset(rows, args.val_fraction, seed)
    out = _out(args)
    for name, part in (("train", train), ("val", val)):
        dp.write_manifest_rows(part, out / f"manifest_{name}.csv")
    print(f"train={len(train)} val={len(val)}")


def cmd_plan(args):
    from .reporting import plot_plan

    seed = getattr(args, "seed", 0)
    n_fg, n_bg = args.n_fg, args.n_bg
    if args.manifest:
        rows = dp.read_manifest(args.manifest)
        n_fg = sum(r["category"] == dp.FOREGROUND for r in rows)
        n_bg = len(rows) - n_fg
    if args.schedule:
        schedule = pfbs.parse_schedule(args.schedule, seed)
    else:
        schedule = _config(args).schedule
    plans = pfbs.full_plan(schedule, n_fg, n_bg, args.epochs)
    text = pfbs.plan_csv(plans)
    out = _out(args)
    (out / "plan.csv").write_text(text)
    plot_plan({schedule.label(): plans}, out / "plan.png")
    sys.stdout.write(text)


# --- model commands ---

def _train_val(args, cfg):
    tile = cfg.model.tile
    if args.train_manifest:
        train = dp.patches_from_manifest(args.data, "train", dp.read_manifest(args.train_manifest), tile)
    else:
        train = dp.load_patches(args.data, "train", tile)
    if args.val_manifest:
        val = dp.patches_from_manifest(args.data, args.val_split, dp.read_manifest(args.val_manifest), tile)
    elif (Path(args.data) / "val" / "A").is_dir():
        val = dp.load_patches(args.data, "val", tile)
    else:
        train, val = dp.split_dataset(train, args.val_fraction, cfg.seed)
    return train, val


def cmd_train(args):
    from .reporting import export_curves
    from .trainer import train

    overrides = {}
    if args.epochs:
        overrides["epochs"] = args.epochs
    if args.max_steps:
        overrides["max_steps"] = args.max_steps
    cfg = _config(args, **overrides)
    out = _out(args)
    (out / "config.txt").write_text(dump_config(cfg))
    train_p, val_p = _train_val(args, cfg)
    log.info("training on %d patches, validating on %d", len(train_p), len(val_p))

    ckpt, history = train(cfg, train_p, val_p)
    ckpt.save(out / "best.ckpt")
    (out / "history.csv").write_text(history.to_csv())
    export_curves(history, out, "curves")
    mdir = out / "manifests"
    mdir.mkdir(exist_ok=True)
    for epoch, ids in history.manifests.items():
        (mdir / f"epoch_{epoch:03d}.txt").write_text("\n".join(ids) + "\n")
    summary = {"best_epoch": history.best_epoch, "best_val_f1": history.best_val_f1,
               "epochs_run": len(history.records)}
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    print(json.dumps(summary))


def _load_ckpt(path):
    from .checkpoint import Checkpoint

    return Checkpoint.load(path)


def cmd_eval(args):
    from .trainer import evaluate

    ckpt = _load_ckpt(args.checkpoint)
    patches = _patches(args, args.split, ckpt.config.tile)
    rep = evaluate(ckpt, patches)
    out = _out(args)
    (out / f"metrics_{args.split}.json").write_text(rep.to_json())
    print(rep.to_json())


def cmd_predict(args):
    import torch
    from PIL import Image

    from .model import predict
    from .reporting import save_error_map
    from .trainer import batches, to_batch

    ckpt = _load_ckpt(args.checkpoint)
    model = ckpt.build_model()
    patches = _patches(args, args.split, ckpt.config.tile)
    out = _out(args)
    (out / "pred").mkdir(exist_ok=True)
    if args.errmap:
        (out / "errmap").mkdir(exist_ok=True)
    with torch.no_grad():
        for chunk in batches(patches, 8):
            t1, t2, _ = to_batch(chunk)
            preds = predict(model(t1, t2)).numpy()
            for p, pred in zip(chunk, preds):
                Image.fromarray(pred * 255).save(out / "pred" / f"{p.id}.png")
                if args.errmap:
                    save_error_map(pred, p.label, out / "errmap" / f"{p.id}.png")
    print(f"predicted {len(patches)} patches into {out / 'pred'}")


# --- reporting commands ---

def _binary_png(path):
    from PIL import Image

    with Image.open(path) as im:
        return dp.normalize_label(np.asarray(im))


def cmd_errmap(args):
    from .reporting import save_error_map

    out = _out(args)
    pred_path, gt_path = Path(args.pred), Path(args.gt)
    if pred_path.is_dir():
        pairs = [(p, gt_path / p.name) for p in sorted(pred_path.iterdir())
                 if p.suffix.lower() in dp.IMAGE_SUFFIXES]
    else:
        pairs = [(pred_path, gt_path)]
    for p, g in pairs:
        save_error_map(_binary_png(p), _binary_png(g), out / f"{p.stem}_errmap.png")
    print(f"wrote {len(pairs)} error maps to {out}")


def cmd_curves(args):
    from .reporting import plot_curves, read_history_csv

    paths = plot_curves(read_history_csv(args.history), _out(args), args.stem)
    for p in paths:
        print(p)


def cmd_sweep(args):
    from .metrics import MetricsReport
    from .reporting import sweep_table

    entries = []
    for item in args.reports:
        name, _, path = item.partition("=")
        if not path:
            name, path = Path(item).stem, item
        d = json.loads(Path(path).read_text())
        entries.append((name, MetricsReport(**{k: d[k] for k in (
            "f1", "precision", "recall", "oa", "kappa", "iou", "tp", "tn", "fp", "fn")})))
    csv_text, table = sweep_table(entries)
    out = _out(args)
    (out / "sweep.csv").write_text(csv_text)
    (out / "sweep.txt").write_text(table)
    sys.stdout.write(table)


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="hanet-cd", parents=[common],
                                     description="HANet change detection with PFBS sampling")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=fn)
        return p

    p = add("stats", cmd_stats, "class-balance statistics, parameter count and FLOPs")
    p.add_argument("--data")
    p.add_argument("--split", default="train")

    p = add("tile", cmd_tile, "tile a split and write its patch manifest")
    p.add_argument("--data", required=True)
    p.add_argument("--split", default="train")
    p.add_argument("--tile", type=int)

    p = add("split", cmd_split, "split a manifest into train/val manifests")
    p.add_argument("--manifest", required=True)
    p.add_argument("--val-fraction", type=float, default=0.1)

    p = add("plan", cmd_plan, "per-epoch PFBS plan as CSV")
    p.add_argument("--schedule", help="normal | fixed:X | linear:Y | fixed-linear:X,Y")
    p.add_argument("--n-fg", type=int, default=1200)
    p.add_argument("--n-bg", type=int, default=3336)
    p.add_argument("--manifest", help="count pools from a manifest instead")
    p.add_argument("--epochs", type=int, default=100)

    p = add("train", cmd_train, "train HANet")
    p.add_argument("--data", required=True)
    p.add_argument("--train-manifest")
    p.add_argument("--val-manifest")
    p.add_argument("--val-split", default="train", help="split directory the val manifest points into")
    p.add_argument("--val-fraction", type=float, default=0.1)
    p.add_argument("--epochs", type=int)
    p.add_argument("--max-steps", type=int)

    for name, fn, help_ in (("eval", cmd_eval, "evaluate a checkpoint"),
                            ("predict", cmd_predict, "write binary change maps")):
        p = add(name, fn, help_)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--data", required=True)
        p.add_argument("--split", default="test")
        p.add_argument("--manifest")
        if name == "predict":
            p.add_argument("--errmap", action="store_true", help="also write error maps")

    p = add("errmap", cmd_errmap, "color-coded error maps from prediction and label images")
    p.add_argument("--pred", required=True, help="prediction image or directory")
    p.add_argument("--gt", required=True, help="label image or directory")

    p = add("curves", cmd_curves, "re-render training curves from a history CSV")
    p.add_argument("--history", required=True)
    p.add_argument("--stem", default="curves")

    p = add("sweep", cmd_sweep, "table of metric reports sorted by F1")
    p.add_argument("reports", nargs="+", help="name=metrics.json or metrics.json")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose or args.command == "train" else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
