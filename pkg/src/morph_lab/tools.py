"""Argument parsing and small file helpers shared by the CLI and pipeline."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from morph_lab.errors import ConfigurationError, DatasetIOError


def parse_sf_set(text: str) -> tuple[int, ...]:
    """``9,12`` (range endpoints) or ``9,10,11,12`` (explicit) to an SF tuple."""
    vals = parse_int_list(text)
    if len(vals) == 2:
        lo, hi = vals
        if hi - lo != 3:
            raise ConfigurationError(f"SF range {lo},{hi} must span four SFs")
        return tuple(range(lo, hi + 1))
    if len(vals) == 4 and all(b - a == 1 for a, b in zip(vals, vals[1:])):
        return tuple(vals)
    raise ConfigurationError(f"cannot read an SF set from {text!r}; use e.g. 9,12")


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise ConfigurationError(f"expected comma-separated integers, got {text!r}") from e


def parse_snr_grid(text: str) -> tuple[float, ...]:
    """``lo:hi:step`` (both ends inclusive) or a comma list of SNRs."""
    try:
        if ":" not in text:
            return tuple(float(v) for v in text.split(",") if v.strip())
        lo, hi, step = (float(v) for v in text.split(":"))
    except ValueError as e:
        raise ConfigurationError(f"bad SNR grid {text!r}; use lo:hi:step") from e
    if step <= 0 or hi < lo:
        raise ConfigurationError(f"bad SNR grid {text!r}; need lo <= hi and step > 0")
    n = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return tuple(round(lo + k * step, 6) for k in range(n))


def read_text(path: Path) -> str:
    """Read a text file as UTF-8."""
    try:
        return path.read_text(encoding="utf-8")
    except OSError as e:
        raise DatasetIOError(path, e) from e


def write_text(path: Path, text: str) -> None:
    """Write a text file as UTF-8, creating parent directories."""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise DatasetIOError(path, e) from e
