"""Command-line front end.

Subcommands: synth, segment, features, train, evaluate, sweep.
Exit codes: 0 success (possibly with warnings), 1 hard error, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import PipelineConfig, load_config
from .errors import PolypsegError, UsageError
from . import pipeline


def _add_common(parser, manifest=True, config=True, out=True):
    if manifest:
        parser.add_argument("--manifest", required=True, help="dataset manifest JSON")
    if config:
        parser.add_argument("--config", help="pipeline config JSON (defaults used when omitted)")
    if out:
        parser.add_argument("--out", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polypseg",
        description="superpixel segmentation and polyp classification for endoscopy frames",
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset with exact masks")
    p.add_argument("--out", required=True)
    p.add_argument("--count", type=int, required=True, help="number of frames")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--patients", type=int, default=5)
    p.add_argument("--size", type=int, default=576, help="frame edge length in pixels")

    p = sub.add_parser("segment", help="write superpixel label maps for every frame and k")
    _add_common(p)
    p.add_argument("--k", type=int, help="restrict to a single superpixel count")

    p = sub.add_parser("features", help="extract per-superpixel feature CSVs")
    _add_common(p)
    p.add_argument("--k", type=int, help="restrict to a single superpixel count")

    p = sub.add_parser("train", help="train the classifier on the train split")
    _add_common(p)
    p.add_argument("--k", type=int, help="superpixel count to train at (default: config train_k)")

    p = sub.add_parser("evaluate", help="score the model on the test split for every k")
    _add_common(p)
    p.add_argument("--model", help="model JSON (default: <out>/model.json)")

    p = sub.add_parser("sweep", help="segment, extract, and score every k end to end")
    _add_common(p)
    p.add_argument("--model", help="optional model JSON for classified metrics")

    return parser


def _config_from(args) -> PipelineConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return PipelineConfig()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "synth":
            return pipeline.cmd_synth(Path(args.out), args.count, args.seed, args.patients, args.size)
        cfg = _config_from(args)
        if args.command == "segment":
            return pipeline.cmd_segment(args.manifest, cfg, Path(args.out), only_k=args.k)
        if args.command == "features":
            return pipeline.cmd_features(args.manifest, cfg, Path(args.out), only_k=args.k)
        if args.command == "train":
            return pipeline.cmd_train(args.manifest, cfg, Path(args.out), k=args.k)
        if args.command == "evaluate":
            return pipeline.cmd_evaluate(args.manifest, cfg, Path(args.out), model_file=args.model)
        if args.command == "sweep":
            return pipeline.cmd_sweep(args.manifest, cfg, Path(args.out), model_file=args.model)
        raise UsageError(f"unknown command {args.command}")
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PolypsegError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
