"""Logging and progress output helpers."""

from __future__ import annotations

import time
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from morph_lab.harness import SerPoint

_quiet = False


def set_quiet(quiet: bool) -> bool:
    """Silence (or restore) progress output; returns the previous setting."""
    global _quiet
    previous, _quiet = _quiet, quiet
    return previous


def log(msg: str) -> None:
    """Print a message with immediate flush unless output is silenced."""
    if not _quiet:
        print(msg, flush=True)


def banner(msg: str) -> None:
    """Print a prominent section banner."""
    log("\n" + "=" * 72)
    log(msg)
    log("=" * 72)


def log_point(label: str, point: SerPoint) -> None:
    """Log one SER grid point with its Wilson interval."""
    lo, hi = point.ci
    log(
        f"[ser] {label:<28} snr={point.snr_db:+7.2f} dB  "
        f"{point.n_errors:>6}/{point.n_symbols:<6} ser={point.ser:.4g} "
        f"ci=[{lo:.4g}, {hi:.4g}]"
    )


class StepTimer:
    """Context manager that logs elapsed time for a labeled step."""

    def __init__(self, label: str) -> None:
        self.label = label
        self.t0 = 0.0
        self.elapsed = 0.0

    def __enter__(self) -> StepTimer:
        self.t0 = time.perf_counter()
        log(f"[..] {self.label}")
        return self

    def __exit__(self, exc_type, exc, tb) -> None:  # type: ignore[no-untyped-def]
        self.elapsed = time.perf_counter() - self.t0
        if exc is None:
            log(f"[OK] {self.label} ({self.elapsed:.2f}s)")
        else:
            log(f"[!!] {self.label} failed after {self.elapsed:.2f}s")
