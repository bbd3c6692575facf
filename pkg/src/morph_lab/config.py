"""Configuration dataclasses for training runs and SER sweeps."""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from morph_lab.errors import ConfigurationError

WORKERS_ENV = "MORPH_LAB_WORKERS"


def default_workers() -> int:
    """Worker count from ``MORPH_LAB_WORKERS``, else the CPU count."""
    raw = os.environ.get(WORKERS_ENV)
    if raw is None or raw.strip() == "":
        return max(1, os.cpu_count() or 1)
    try:
        value = int(raw)
    except ValueError as e:
        raise ConfigurationError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from e
    if value < 1:
        raise ConfigurationError(f"{WORKERS_ENV} must be >= 1, got {value}")
    return value


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for training the neural decoder."""

    epochs: int = 30
    batch_size: int = 64
    lr: float = 1e-3
    seed: int = 0
    augmentations: int = 200
    snr_range: tuple[float, float] = (-40.0, 0.0)
    val_fraction: float = 0.2
    workers: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "snr_range", tuple(float(v) for v in self.snr_range))
        if self.epochs < 1 or self.batch_size < 1 or self.augmentations < 1:
            raise ConfigurationError("epochs, batch_size and augmentations must be >= 1")
        if self.lr <= 0:
            raise ConfigurationError(f"lr must be positive, got {self.lr}")
        if self.snr_range[0] > self.snr_range[1]:
            raise ConfigurationError(f"snr_range is inverted: {self.snr_range}")
        if not 0.0 <= self.val_fraction < 1.0:
            raise ConfigurationError(f"val_fraction must be in [0, 1), got {self.val_fraction}")
        if self.workers < 0:
            raise ConfigurationError(f"workers must be >= 0, got {self.workers}")


@dataclass(frozen=True)
class SweepConfig:
    """Monte-Carlo settings for an SER-vs-SNR sweep."""

    snr_grid: tuple[float, ...]
    trials: int = 2000
    seed: int = 0
    block_size: int = 250
    workers: int = field(default_factory=default_workers)
    cfo_hz: float = 0.0
    sfo_ppm: float = 0.0
    target_ser: float = 0.01
    refine_step: float = 0.5

    def __post_init__(self) -> None:
        object.__setattr__(self, "snr_grid", tuple(float(v) for v in self.snr_grid))
        if not self.snr_grid:
            raise ConfigurationError("snr_grid is empty")
        if self.trials < 1:
            raise ConfigurationError(f"trials must be >= 1, got {self.trials}")
        if self.block_size < 1:
            raise ConfigurationError(f"block_size must be >= 1, got {self.block_size}")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")
        if not 0.0 < self.target_ser < 1.0:
            raise ConfigurationError(f"target_ser must be in (0, 1), got {self.target_ser}")
        if self.refine_step <= 0:
            raise ConfigurationError(f"refine_step must be positive, got {self.refine_step}")

    @property
    def n_blocks(self) -> int:
        return -(-self.trials // self.block_size)
