"""``terraseg`` command-line entry point.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .errors import TerrasegError

log = logging.getLogger("terraseg")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _fmt(prog):
    return argparse.ArgumentDefaultsHelpFormatter(prog, max_help_position=32)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="terraseg", description="U-Net segmentation of satellite imagery.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("train", help="train a U-Net", formatter_class=_fmt)
    p.add_argument("--data", required=True, help="dataset root with images/ and masks/")
    p.add_argument("--out", required=True, help="output directory for best.ckpt and metrics.csv")
    p.add_argument("--lr", type=float, default=0.001, help="Adam learning rate")
    p.add_argument("--batch", type=int, default=32, help="training batch size")
    p.add_argument("--val-batch", type=int, default=24, help="validation batch size")
    p.add_argument("--epochs", type=int, default=50, help="maximum epochs")
    p.add_argument("--patience", type=int, default=9,
                   help="stop after this many epochs without validation-loss improvement")
    p.add_argument("--split", type=float, default=0.8, help="training fraction")
    p.add_argument("--seed", type=int, default=0, help="seed for init, split and shuffles")
    p.add_argument("--img-size", type=int, default=256, help="square input extent")
    p.add_argument("--depth", type=int, default=4, help="number of pooling stages")
    p.add_argument("--width", type=int, default=64, help="channels at the first stage")
    p.add_argument("--workers", type=int, default=0, help="image decoding threads")
    p.add_argument("--deterministic", action="store_true",
                   help="single-threaded kernels for bitwise-reproducible runs")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset", formatter_class=_fmt)
    p.add_argument("--checkpoint", required=True, help="checkpoint written by train")
    p.add_argument("--data", required=True, help="dataset root; every pair is evaluated")
    p.add_argument("--val-batch", type=int, default=24, help="evaluation batch size")

    p = sub.add_parser("predict", help="segment one image", formatter_class=_fmt)
    p.add_argument("--checkpoint", required=True, help="checkpoint written by train")
    p.add_argument("--image", required=True, help="RGB image to segment")
    p.add_argument("--out", required=True, help="output mask (.png or .pgm)")

    p = sub.add_parser("ndwi", help="water mask from green and NIR bands", formatter_class=_fmt)
    p.add_argument("--green", required=True, help="green band (8- or 16-bit grayscale)")
    p.add_argument("--nir", required=True, help="near-infrared band, same size as --green")
    p.add_argument("--out", required=True, help="output mask (.png or .pgm)")
    p.add_argument("--threshold", type=float, default=0.0, help="NDWI at or above this is water")

    p = sub.add_parser("plot", help="SVG accuracy/loss/IoU curves", formatter_class=_fmt)
    p.add_argument("--metrics", required=True, help="metrics.csv written by train")
    p.add_argument("--out", required=True, help="output directory")
    return parser


def _threads_from_env():
    raw = os.environ.get("TERRASEG_THREADS")
    if not raw:
        return None
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"TERRASEG_THREADS must be an integer, got {raw!r}") from None
    if value < 1:
        raise UsageError("TERRASEG_THREADS must be >= 1")
    return value


def _train(args):
    from .model import UNetConfig
    from .trainer import TrainConfig, train
    model = UNetConfig(depth=args.depth, base_width=args.width, img_size=args.img_size)
    config = TrainConfig(data_root=args.data, out_dir=args.out, lr=args.lr, train_batch=args.batch,
                         val_batch=args.val_batch, max_epochs=args.epochs, patience=args.patience,
                         split=args.split, seed=args.seed, img_size=args.img_size, model=model,
                         deterministic=args.deterministic, threads=_threads_from_env(),
                         workers=args.workers)
    _, history = train(config)
    log.info("trained %d epochs; outputs in %s", len(history), args.out)


def _eval(args):
    from .checkpoint import load_checkpoint
    from .data import scan_dataset
    from .trainer import evaluate, thread_limit
    params, config = load_checkpoint(args.checkpoint)
    manifest = scan_dataset(args.data)
    with thread_limit(_threads_from_env()):
        result = evaluate(params, config, manifest, args.val_batch)
    print(f"accuracy={result.accuracy!r} loss={result.loss!r} iou={result.iou!r}")


def _predict(args):
    from .checkpoint import load_checkpoint
    from .trainer import predict
    params, config = load_checkpoint(args.checkpoint)
    predict(params, config, args.image, args.out)


def _ndwi(args):
    from .ndwi import ndwi_mask_file
    ndwi_mask_file(args.green, args.nir, args.out, args.threshold)


def _plot(args):
    from .plotting import plot_curves
    plot_curves(args.metrics, args.out)


COMMANDS = {"train": _train, "eval": _eval, "predict": _predict, "ndwi": _ndwi, "plot": _plot}


def run(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "train" or args.command == "eval":
            _threads_from_env()
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"terraseg: {exc}", file=sys.stderr)
        return 1
    except (TerrasegError, OSError) as exc:
        print(f"terraseg {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
