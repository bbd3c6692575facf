"""Orchestration of each CLI subcommand: banners, timing, file outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence

from morph_lab.checkpoint import load_checkpoint, save_checkpoint
from morph_lab.codec import MorphFrameSpec
from morph_lab.config import SweepConfig, TrainConfig
from morph_lab.dataset import DatasetScheme, SnrPolicy, gen_dataset, read_dataset
from morph_lab.errors import NoCrossingError
from morph_lab.harness import (
    CompareReport,
    DetectionStats,
    SchemeSetup,
    SerCurve,
    ThresholdReport,
    check_monotonic,
    compare_report,
    read_csv,
    refine_threshold,
    run_detection_trials,
    run_ser_sweep,
    snr_threshold,
    write_csv,
)
from morph_lab.neural import MorphNet, parameter_summary, train
from morph_lab.output import StepTimer, banner, log
from morph_lab.tools import write_text


def load_model(path: Path) -> MorphNet:
    ckpt = load_checkpoint(path)
    model = ckpt.build()
    meta = ckpt.metadata
    log(
        f"[model] {path.name}: {parameter_summary(model)}, "
        f"scheme={meta.get('scheme', '?')} sf_set={meta.get('sf_set', '?')} "
        f"val_acc={meta.get('val_accuracy', float('nan')):.4f}"
    )
    return model


def run_gen_dataset(
    scheme: DatasetScheme,
    spec: MorphFrameSpec,
    count_per_class: int,
    policy: SnrPolicy,
    out_path: Path,
    seed: int,
    *,
    ifo2_sf: int = 12,
) -> Path:
    banner(f"[gen-dataset] {scheme} {spec.label} x{count_per_class}/class ({policy.describe()})")
    with StepTimer(f"write {out_path.name}"):
        gen_dataset(scheme, spec, count_per_class, policy, out_path, seed, ifo2_sf=ifo2_sf)
    return out_path


def run_train(dataset_path: Path, out_path: Path, cfg: TrainConfig) -> dict[str, object]:
    banner(f"[train] {dataset_path.name} -> {out_path.name}")
    with StepTimer("load dataset"):
        data = read_dataset(dataset_path).to_labeled()
    log(f"[train] {len(data.symbols)} clean symbols, seed={cfg.seed}, epochs={cfg.epochs}")
    with StepTimer("train"):
        ckpt = train(data, cfg)
    with StepTimer(f"write {out_path.name}"):
        save_checkpoint(ckpt, out_path)
    return {
        "checkpoint": out_path,
        "train_accuracy": ckpt.metadata["train_accuracy"],
        "val_accuracy": ckpt.metadata["val_accuracy"],
    }


def run_eval_ser(
    setups: Sequence[SchemeSetup],
    cfg: SweepConfig,
    csv_path: Optional[Path],
    *,
    refine: bool = False,
) -> list[SerCurve]:
    banner(f"[eval-ser] {len(setups)} configuration(s), {cfg.trials} trials/point")
    curves: list[SerCurve] = []
    for setup in setups:
        with StepTimer(f"sweep {setup.scheme_id} {setup.config_id}"):
            curve = run_ser_sweep(setup, cfg)
        if refine:
            try:
                with StepTimer(f"refine {setup.config_id}"):
                    report, curve = refine_threshold(setup, cfg, curve)
                log(f"[eval-ser] refined threshold {report.threshold_db:.2f} dB")
            except NoCrossingError as e:
                log(f"[WARN] no refinement: {e}")
        for lo, hi in check_monotonic(curve):
            log(f"[WARN] {setup.config_id}: SER at {hi:g} dB exceeds SER at {lo:g} dB")
        curves.append(curve)
    if csv_path is not None:
        write_csv(curves, csv_path)
        log(f"[OK] Wrote: {csv_path}")
    return curves


def run_snr_threshold(csv_path: Path, target: float) -> list[ThresholdReport]:
    """Threshold of every curve in the CSV; raises if any curve has no crossing."""
    banner(f"[snr-threshold] {csv_path.name} at SER {target:g}")
    reports: list[ThresholdReport] = []
    failure: Optional[NoCrossingError] = None
    for curve in read_csv(csv_path):
        try:
            r = snr_threshold(curve, target)
        except NoCrossingError as e:
            log(f"[!!] {e}")
            failure = failure or e
            continue
        log(
            f"{curve.scheme:<16} {curve.config:<20} threshold={r.threshold_db:+.2f} dB "
            f"(grid step {r.grid_step_db:g} dB)"
        )
        reports.append(r)
    if failure is not None:
        raise failure
    return reports


def run_detect(spec: MorphFrameSpec, snr_db: float, trials: int, seed: int) -> DetectionStats:
    banner(f"[detect] {spec.label} preamble={spec.preamble_len} at {snr_db:g} dB")
    with StepTimer(f"{trials} detection trials"):
        st = run_detection_trials(spec, snr_db, trials, seed)
    log(
        f"[detect] detection rate {st.detection_rate:.4f}, false-alarm rate "
        f"{st.false_alarm_rate:.4f}, payload SER {st.payload_ser:.4g}"
    )
    return st


def run_compare(
    csv_paths: Sequence[Path],
    target: float,
    out_csv: Optional[Path] = None,
    summary_path: Optional[Path] = None,
) -> CompareReport:
    banner(f"[compare] {len(csv_paths)} file(s)")
    curves: list[SerCurve] = []
    for p in csv_paths:
        curves.extend(read_csv(p))
    report = compare_report(curves, target)
    table = report.format_table()
    log(table)
    if out_csv is not None:
        write_csv(curves, out_csv)
        log(f"[OK] Wrote: {out_csv}")
    if summary_path is not None:
        write_text(summary_path, table + "\n")
        log(f"[OK] Wrote: {summary_path}")
    return report
