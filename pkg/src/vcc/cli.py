"""Command-line entry point: ``vcc <command> --config FILE``."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline
from .config import ConfigError, load_config


def _blocks(text):
    try:
        r, c = text.lower().split("x")
        r, c = int(r), int(c)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected RxC, e.g. 4x1, got {text!r}") from None
    if r < 1 or c < 1:
        raise argparse.ArgumentTypeError("grid dimensions must be positive")
    return r, c


def _common(p):
    p.add_argument("--config", required=True, help="config file, or the name of a shipped config (e.g. ucsd_ped2)")
    p.add_argument("--deterministic", action="store_true", default=None, help="deterministic torch kernels")
    p.add_argument("--device", help="torch device, e.g. cpu or cuda:0")
    p.add_argument("--blocks", type=_blocks, metavar="RxC", help="override the block grid")
    p.add_argument("--data-root", help="override data_root")
    p.add_argument("--output-root", help="override output_root")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser():
    ap = argparse.ArgumentParser(prog="vcc", description="Visual cloze completion video anomaly detection")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in [
        ("extract", "RoIs, cubes and flow stacks for the train and test splits"),
        ("train", "train the completion networks and training-score statistics"),
        ("score", "score the test split"),
        ("evaluate", "frame- and pixel-level AUC/EER"),
        ("plot", "render the ROC curves"),
        ("all", "run every stage in order"),
    ]:
        _common(sub.add_parser(name, help=helptext))
    run = sub.add_parser("run", help="run one stage, selected with --stage")
    _common(run)
    run.add_argument("--stage", required=True, choices=pipeline.STAGES + ("all",))
    syn = sub.add_parser("synth", help="write the synthetic moving-shapes dataset")
    _common(syn)
    return ap


def _load(args):
    over = {}
    if args.device:
        over["device"] = args.device
    if args.deterministic is not None:
        over["deterministic"] = args.deterministic
    if args.blocks:
        over["grid_rows"], over["grid_cols"] = args.blocks
    cfg = load_config(args.config, **over)
    # command-line paths are relative to the working directory, not the config
    if args.data_root:
        cfg = cfg.replace(data_root=args.data_root)
    if args.output_root:
        cfg = cfg.replace(output_root=args.output_root)
    return cfg


def _report(stage, result):
    if stage == "extract":
        for split, counts in result.items():
            print(f"{split}: {len(counts)} clips, {sum(counts.values())} events")
    elif stage == "train":
        ms, _ = result
        print(f"trained {len(ms.nets)} networks")
    elif stage == "score":
        print(f"scored {len(result)} clips")
    elif stage == "evaluate":
        print(f"frame-level AUC {result['frame_auc']:.4f}  EER {result['frame_eer']:.4f}")
        if "pixel_auc" in result:
            print(f"pixel-level AUC {result['pixel_auc']:.4f}  EER {result['pixel_eer']:.4f}")
        if "ablation" in result:
            print("ablation AUCs: " + json.dumps({k: round(v, 4) for k, v in result["ablation"].items()}))
    elif stage == "plot":
        print(f"wrote {result}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        if args.command == "synth":
            from .datasets import write_synthetic_dataset

            write_synthetic_dataset(cfg.data_root, cfg.synth_seed, n_train=cfg.synth_n_train,
                                    n_test=cfg.synth_n_test, n_frames=cfg.synth_n_frames)
            print(f"wrote synthetic dataset to {cfg.data_root}")
            return 0
        stage = args.stage if args.command == "run" else args.command
        stages = pipeline.STAGES if stage == "all" else (stage,)
        for s in stages:
            _report(s, pipeline.run_stage(s, cfg))
    except (ConfigError, pipeline.StageError, FileNotFoundError, ValueError, KeyError) as e:
        print(f"vcc: error: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
