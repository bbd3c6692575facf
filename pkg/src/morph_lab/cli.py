"""Command-line interface for morph-lab."""

from __future__ import annotations

import argparse
from pathlib import Path
from typing import Optional

from morph_lab.codec import MorphFrameSpec
from morph_lab.config import SweepConfig, TrainConfig
from morph_lab.dataset import SnrPolicy
from morph_lab.errors import (
    ConfigurationError,
    DatasetError,
    DatasetIOError,
    NoCrossingError,
    ParameterError,
    ShapeError,
)
from morph_lab.harness import DECODERS, SchemeSetup, make_setup
from morph_lab.output import log, set_quiet
from morph_lab.pipeline import (
    load_model,
    run_compare,
    run_detect,
    run_eval_ser,
    run_gen_dataset,
    run_snr_threshold,
    run_train,
)
from morph_lab.tools import parse_int_list, parse_sf_set, parse_snr_grid

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NO_CROSSING = 4


def _float_pair(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from e
    return lo, hi


def parse_args(argv: Optional[list[str]] = None) -> argparse.Namespace:
    """Parse CLI arguments."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="Master seed (default: 0).")
    common.add_argument(
        "--bw", type=float, default=125_000.0, help="Bandwidth in Hz (default: 125000)."
    )
    common.add_argument("--quiet", action="store_true", help="Suppress progress output.")

    p = argparse.ArgumentParser(
        prog="morph-lab",
        description="Morph SF-hopping LoRa lab: datasets, training, SER sweeps, detection.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-dataset", parents=[common], help="Write a labeled IQ dataset.")
    g.add_argument("--scheme", choices=["morph", "ifo2"], default="morph")
    g.add_argument("--sf-set", type=str, default="9,12", help="SF range, e.g. 9,12.")
    g.add_argument("--sf", type=int, default=12, help="IFO-2 spreading factor.")
    g.add_argument("--count", type=int, default=20, help="Symbols per class (default: 20).")
    g.add_argument(
        "--snr", type=str, default="clean", help="clean, a fixed SNR, or lo:hi (uniform)."
    )
    g.add_argument("-o", "--out", type=Path, required=True, help="Output dataset file.")

    t = sub.add_parser("train", parents=[common], help="Train the neural decoder.")
    t.add_argument("dataset", type=Path, help="Dataset written by gen-dataset.")
    t.add_argument("-o", "--out", type=Path, required=True, help="Output checkpoint file.")
    t.add_argument("--epochs", type=int, default=30)
    t.add_argument("--batch-size", type=int, default=64)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--augmentations", type=int, default=200, help="Noisy copies per symbol.")
    t.add_argument("--aug-snr", type=_float_pair, default=(-40.0, 0.0), help="lo:hi dB.")
    t.add_argument("--val-fraction", type=float, default=0.2)
    t.add_argument("--loader-workers", type=int, default=0)

    e = sub.add_parser("eval-ser", parents=[common], help="Monte-Carlo SER sweep to CSV.")
    e.add_argument("--scheme", choices=sorted(DECODERS), default="morph")
    e.add_argument(
        "--decoder",
        choices=sorted({d for ds in DECODERS.values() for d in ds}),
        default=None,
        help="Decoder (default: the scheme's classical decoder).",
    )
    e.add_argument("--sf-set", type=str, default="9,12", help="Morph SF range.")
    e.add_argument("--sf", type=str, default="12", help="LoRa/IFO-2 SFs, e.g. 7,8,9.")
    e.add_argument("--repeats", type=str, default="4", help="Ostinato repeats, e.g. 2,4,8.")
    e.add_argument("--model", type=Path, default=None, help="Checkpoint for --decoder neural.")
    e.add_argument("--snr-grid", type=str, required=True, help="lo:hi:step in dB.")
    e.add_argument("--trials", type=int, default=2000, help="Symbols per SNR point.")
    e.add_argument("--block-size", type=int, default=250)
    e.add_argument(
        "--workers", type=int, default=None, help="Threads (default: MORPH_LAB_WORKERS or CPUs)."
    )
    e.add_argument("--cfo", type=float, default=0.0, help="Carrier frequency offset in Hz.")
    e.add_argument("--sfo", type=float, default=0.0, help="Sampling frequency offset in ppm.")
    e.add_argument("--target", type=float, default=0.01, help="Target SER (default: 0.01).")
    e.add_argument("--refine", action="store_true", help="Add a finer pass at the crossing.")
    e.add_argument("--refine-step", type=float, default=0.5)
    e.add_argument("--csv", type=Path, default=None, help="Output CSV file.")

    s = sub.add_parser("snr-threshold", parents=[common], help="Thresholds from a CSV.")
    s.add_argument("csv", type=Path)
    s.add_argument("--target", type=float, default=0.01)

    d = sub.add_parser("detect", parents=[common], help="Preamble detection trials.")
    d.add_argument("--sf-set", type=str, default="9,12")
    d.add_argument("--preamble", type=int, default=8, help="Preamble chirps (default: 8).")
    d.add_argument("--payload", type=int, default=4, help="Payload symbols per frame.")
    d.add_argument("--snr", type=float, required=True, help="SNR in dB.")
    d.add_argument("--trials", type=int, default=100)

    c = sub.add_parser("compare", parents=[common], help="Threshold/data-rate summary.")
    c.add_argument("inputs", type=Path, nargs="+", help="CSV files from eval-ser.")
    c.add_argument("--target", type=float, default=0.01)
    c.add_argument("--csv", type=Path, default=None, help="Merged CSV output.")
    c.add_argument("--summary", type=Path, default=None, help="Summary table output.")

    return p.parse_args(argv)


def build_setups(args: argparse.Namespace) -> list[SchemeSetup]:
    """One setup per requested SF (LoRa, IFO-2) or repeat count (Ostinato)."""
    model = load_model(args.model) if args.model is not None else None
    common = dict(bw=args.bw, sf_set=parse_sf_set(args.sf_set), model=model)
    if args.scheme in ("lora", "ifo2"):
        return [
            make_setup(args.scheme, args.decoder, sf=sf, **common)  # type: ignore[arg-type]
            for sf in parse_int_list(args.sf)
        ]
    if args.scheme == "ostinato":
        return [
            make_setup(args.scheme, args.decoder, repeats=k, **common)  # type: ignore[arg-type]
            for k in parse_int_list(args.repeats)
        ]
    return [make_setup(args.scheme, args.decoder, **common)]  # type: ignore[arg-type]


def dispatch(args: argparse.Namespace) -> None:
    if args.command == "gen-dataset":
        spec = MorphFrameSpec(sf_set=parse_sf_set(args.sf_set), bw=args.bw)
        run_gen_dataset(
            args.scheme, spec, args.count, SnrPolicy.parse(args.snr), args.out, args.seed,
            ifo2_sf=args.sf,
        )
    elif args.command == "train":
        cfg = TrainConfig(
            epochs=args.epochs,
            batch_size=args.batch_size,
            lr=args.lr,
            seed=args.seed,
            augmentations=args.augmentations,
            snr_range=args.aug_snr,
            val_fraction=args.val_fraction,
            workers=args.loader_workers,
        )
        out = run_train(args.dataset, args.out, cfg)
        log(f"\nSuccess. Checkpoint -> {out['checkpoint']}")
    elif args.command == "eval-ser":
        extra = {} if args.workers is None else {"workers": args.workers}
        cfg = SweepConfig(
            snr_grid=parse_snr_grid(args.snr_grid),
            trials=args.trials,
            seed=args.seed,
            block_size=args.block_size,
            cfo_hz=args.cfo,
            sfo_ppm=args.sfo,
            target_ser=args.target,
            refine_step=args.refine_step,
            **extra,
        )
        run_eval_ser(build_setups(args), cfg, args.csv, refine=args.refine)
    elif args.command == "snr-threshold":
        run_snr_threshold(args.csv, args.target)
    elif args.command == "detect":
        spec = MorphFrameSpec(
            sf_set=parse_sf_set(args.sf_set),
            bw=args.bw,
            preamble_len=args.preamble,
            payload_symbols=args.payload,
        )
        run_detect(spec, args.snr, args.trials, args.seed)
    elif args.command == "compare":
        run_compare(args.inputs, args.target, args.csv, args.summary)


def _report(msg: str) -> None:
    """Errors are printed even under --quiet."""
    set_quiet(False)
    log(msg)


def main(argv: Optional[list[str]] = None) -> int:
    """Entry point returning an exit code."""
    args = parse_args(argv)
    previous = set_quiet(args.quiet)
    try:
        dispatch(args)
    except NoCrossingError as e:
        _report(f"ERROR: {e}")
        return EXIT_NO_CROSSING
    except (ConfigurationError, ParameterError) as e:
        _report(f"ERROR: {e}")
        return EXIT_CONFIG
    except (DatasetIOError, DatasetError, ShapeError, OSError) as e:
        _report(f"ERROR: {e}")
        return EXIT_IO
    except Exception as e:
        _report(f"\nFAILED: {e}")
        return EXIT_FAILURE
    finally:
        set_quiet(previous)
    return EXIT_OK


def main_cli() -> None:
    """Wrapper for the console_scripts entry point."""
    raise SystemExit(main())
