"""Channel emulation: calibrated AWGN, CFO, SFO and initial phase."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from morph_lab.errors import ParameterError, ShapeError
from morph_lab.phy import IqBuffer

MAX_SFO_PPM = 100.0


@dataclass(frozen=True)
class ChannelConfig:
    """Impairments for one transmission; ``seed`` fixes the noise draw."""

    snr_db: float
    cfo_hz: float = 0.0
    sfo_ppm: float = 0.0
    phase0_rad: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not math.isfinite(self.snr_db):
            raise ParameterError(f"snr_db must be finite, got {self.snr_db}")
        if not 0.0 <= self.phase0_rad < 2 * math.pi:
            raise ParameterError(f"phase0_rad must be in [0, 2*pi), got {self.phase0_rad}")
        if abs(self.sfo_ppm) >= MAX_SFO_PPM:
            raise ParameterError(f"|sfo_ppm| must be < {MAX_SFO_PPM}, got {self.sfo_ppm}")


def noise_variance(signal_power: float, snr_db: float) -> float:
    """Total complex noise variance giving ``snr_db`` against ``signal_power``."""
    return signal_power / 10.0 ** (snr_db / 10.0)


def add_awgn(
    sig: IqBuffer,
    snr_db: float,
    seed: int,
    *,
    reference_power: Optional[float] = None,
) -> IqBuffer:
    """Add i.i.d. complex Gaussian noise at ``snr_db`` over the full band.

    The SNR is referenced to ``mean |x|^2`` of ``sig`` unless a
    ``reference_power`` (e.g. the clean transmit power) is given.
    """
    if len(sig) == 0:
        raise ShapeError("cannot add noise to an empty buffer")
    p_s = sig.power if reference_power is None else reference_power
    sigma = math.sqrt(noise_variance(p_s, snr_db) / 2.0)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(len(sig)) + 1j * rng.standard_normal(len(sig))
    return IqBuffer(sig.samples + sigma * noise, sig.fs)


def apply_offsets(sig: IqBuffer, cfg: ChannelConfig) -> IqBuffer:
    """Rotate by phase0 + CFO ramp, then resample by (1 + sfo_ppm * 1e-6)."""
    if abs(cfg.sfo_ppm) >= MAX_SFO_PPM:
        raise ParameterError(f"|sfo_ppm| must be < {MAX_SFO_PPM}, got {cfg.sfo_ppm}")
    x = sig.samples
    if cfg.cfo_hz != 0.0 or cfg.phase0_rad != 0.0:
        n = np.arange(len(x))
        x = x * np.exp(1j * (cfg.phase0_rad + 2 * np.pi * cfg.cfo_hz * n / sig.fs))
    if cfg.sfo_ppm != 0.0:
        factor = 1.0 + cfg.sfo_ppm * 1e-6
        n_out = int(np.floor((len(x) - 1) / factor)) + 1
        t = np.arange(n_out) * factor
        grid = np.arange(len(x))
        x = np.interp(t, grid, x.real) + 1j * np.interp(t, grid, x.imag)
    return IqBuffer(x, sig.fs)


def impair(sig: IqBuffer, cfg: ChannelConfig) -> IqBuffer:
    """Offsets followed by AWGN referenced to the clean transmit power."""
    return add_awgn(
        apply_offsets(sig, cfg), cfg.snr_db, cfg.seed, reference_power=sig.power
    )
