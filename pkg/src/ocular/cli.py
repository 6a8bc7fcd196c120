"""Command-line entry point: ``ocular {perclos,saccade,spectacles,roc,train} ...``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import config, pipelines
from .dataset import DatasetError, open_dataset
from .pgm import PgmError


def _overrides(args) -> dict:
    out = {}
    for item in args.set or []:
        if "=" not in item:
            raise config.ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    if args.seed is not None:
        out["seed"] = args.seed
    if getattr(args, "fps", None) is not None:
        out["fps"] = args.fps
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ocular", description="Eye-monitoring batch pipelines over PGM frame datasets.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, dataset=True):
        if dataset:
            p.add_argument("--dataset", required=True, type=Path, help="directory with manifest.txt and frames")
        p.add_argument("--config", type=Path, help="flat key = value file")
        p.add_argument("--out", required=True, type=Path, help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")
        p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("perclos", help="face, eye and eye-state per frame, then PERCLOS windows")
    common(p)
    p.add_argument("--models", type=Path, help="directory of trained models (bundled ones fill gaps)")
    p.add_argument("--fps", type=float, help="override the manifest frame rate")

    p = sub.add_parser("saccade", help="iris tracking and saccade parameters on an eye-region clip")
    common(p)
    p.add_argument("--eog", type=Path, help="EOG CSV to correlate against")
    p.add_argument("--fps", type=float, help="override the manifest frame rate")

    p = sub.add_parser("spectacles", help="spectacle detection factor per face crop")
    common(p)

    p = sub.add_parser("roc", help="ROC points and AUC from a score,label CSV")
    common(p, dataset=False)
    p.add_argument("--scores", required=True, type=Path)

    p = sub.add_parser("train", help="train a model family and report held-out metrics")
    common(p)
    p.add_argument("--mode", required=True, choices=pipelines.TRAIN_MODES)
    return ap


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = config.load(args.config, _overrides(args))
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    (out / "config_used.cfg").write_text(cfg.dumps())
    q = args.quiet
    if args.command == "roc":
        pipelines.run_roc(args.scores, out, q)
        return 0
    ds = open_dataset(args.dataset)
    if args.command == "perclos":
        models = pipelines.EyeModels.load(args.models, cfg.features)
        pipelines.run_perclos(ds, cfg, out, models, q)
    elif args.command == "saccade":
        pipelines.run_saccade(ds, cfg, out, args.eog, q)
    elif args.command == "spectacles":
        pipelines.run_spectacles(ds, cfg, out, q)
    else:
        pipelines.train_models(ds, args.mode, cfg, out, q)
    return 0


def main(argv=None) -> None:
    try:
        code = run(argv)
    except (config.ConfigError, DatasetError, pipelines.InputError, PgmError, FileNotFoundError) as exc:
        print(f"ocular: error: {exc}", file=sys.stderr)
        code = 2
    sys.exit(code)


if __name__ == "__main__":
    main()
