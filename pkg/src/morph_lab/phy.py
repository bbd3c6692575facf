"""LoRa CSS baseband chirp synthesis and dechirp demodulation."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import signal

from morph_lab.errors import ParameterError, ShapeError

SF_RANGE = range(7, 13)
DEFAULT_BW = 125_000.0
DECIMATION_TAPS = 64


@dataclass(frozen=True)
class IqBuffer:
    """Complex baseband samples at sample rate ``fs`` (Hz).

    The sample array is made read-only on construction so buffers can be
    shared between threads.
    """

    samples: np.ndarray
    fs: float

    def __post_init__(self) -> None:
        arr = np.array(self.samples, dtype=np.complex128, copy=True)
        if arr.ndim != 1:
            raise ShapeError(f"IQ samples must be 1-D, got shape {arr.shape}")
        if self.fs <= 0:
            raise ParameterError(f"sample rate must be positive, got {self.fs}")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration_s(self) -> float:
        return len(self) / self.fs

    @property
    def power(self) -> float:
        """Mean sample power ``mean |x[n]|^2``."""
        if len(self) == 0:
            return 0.0
        return float(np.mean(np.abs(self.samples) ** 2))

    def window(self, start: int, length: int) -> IqBuffer:
        """Return ``length`` samples starting at ``start``."""
        if start < 0 or start + length > len(self):
            raise ShapeError(
                f"window [{start}, {start + length}) outside buffer of {len(self)}"
            )
        return IqBuffer(self.samples[start:start + length], self.fs)


@dataclass(frozen=True)
class ChirpConfig:
    """One chirp: spreading factor, bandwidth, sample rate, symbol value."""

    sf: int
    bw: float = DEFAULT_BW
    fs: Optional[float] = None
    symbol_value: int = 0

    def __post_init__(self) -> None:
        if self.sf not in SF_RANGE:
            raise ParameterError(f"sf must be in 7..12, got {self.sf}")
        if self.bw <= 0:
            raise ParameterError(f"bw must be positive, got {self.bw}")
        if self.fs is None:
            object.__setattr__(self, "fs", float(self.bw))
        ratio = self.fs / self.bw
        if ratio < 1 or abs(ratio - round(ratio)) > 1e-9:
            raise ParameterError(
                f"fs ({self.fs}) must be an integer multiple of bw ({self.bw})"
            )
        if not 0 <= self.symbol_value < 2 ** self.sf:
            raise ParameterError(
                f"symbol_value must be in [0, {2 ** self.sf}), got {self.symbol_value}"
            )

    @property
    def oversampling(self) -> int:
        return int(round(self.fs / self.bw))

    @property
    def n_chips(self) -> int:
        return 2 ** self.sf

    @property
    def n_samples(self) -> int:
        return self.n_chips * self.oversampling

    @property
    def duration_s(self) -> float:
        return self.n_chips / self.bw


def _instantaneous_frequency(cfg: ChirpConfig, upchirp: bool) -> np.ndarray:
    """Per-sample frequency in Hz, folded into [-bw/2, bw/2)."""
    n = np.arange(cfg.n_samples)
    step = cfg.bw / cfg.n_chips
    f = np.mod(
        -cfg.bw / 2 + cfg.symbol_value * step + n * step / cfg.oversampling + cfg.bw,
        cfg.bw,
    ) - cfg.bw / 2
    return f if upchirp else -f


def chirp_phase_advance(cfg: ChirpConfig, upchirp: bool = True) -> float:
    """Net oscillator phase a chirp adds, wrapped to (-pi, pi].

    Equals -pi * bw / fs (mod 2*pi) for up-chirps of any SF and symbol value.
    """
    total = float(np.sum(2 * np.pi * _instantaneous_frequency(cfg, upchirp) / cfg.fs))
    return float(np.angle(np.exp(1j * total)))


def gen_chirp(cfg: ChirpConfig, upchirp: bool = True, phase0: float = 0.0) -> IqBuffer:
    """Generate one chirp by phase accumulation.

    phi[0] = phase0 and phi[n+1] = phi[n] + 2*pi*f(n)/fs, so the frequency
    fold at +bw/2 needs no special handling.
    """
    f = _instantaneous_frequency(cfg, upchirp)
    increments = 2 * np.pi * f / cfg.fs
    phase = phase0 + np.concatenate(([0.0], np.cumsum(increments[:-1])))
    return IqBuffer(np.exp(1j * phase), cfg.fs)


@lru_cache(maxsize=None)
def base_downchirp(sf: int, bw: float = DEFAULT_BW) -> np.ndarray:
    """Chip-rate base down-chirp samples (conjugate of the base up-chirp)."""
    return gen_chirp(ChirpConfig(sf=sf, bw=bw), upchirp=False).samples


def dechirp_spectrum(samples: np.ndarray, sf: int) -> np.ndarray:
    """Unnormalised 2^sf-point spectrum of ``samples * base_downchirp``."""
    n = 2 ** sf
    if samples.shape[-1] != n:
        raise ShapeError(f"dechirp expects {n} samples for SF-{sf}, got {samples.shape[-1]}")
    return np.fft.fft(samples * base_downchirp(sf))


def dechirp_decode(sym: IqBuffer, sf: int) -> tuple[int, float]:
    """Return (symbol value, peak magnitude); ties resolve to the lowest bin."""
    if sf not in SF_RANGE:
        raise ParameterError(f"sf must be in 7..12, got {sf}")
    mag = np.abs(dechirp_spectrum(sym.samples, sf))
    k = int(np.argmax(mag))
    return k, float(mag[k])


def decimate_to_chiprate(sig: IqBuffer, bw: float) -> IqBuffer:
    """Low-pass to +-bw/2 and keep every (fs/bw)-th sample."""
    ratio = sig.fs / bw
    if ratio < 1 or abs(ratio - round(ratio)) > 1e-9:
        raise ParameterError(f"fs ({sig.fs}) is not an integer multiple of bw ({bw})")
    down = int(round(ratio))
    if down == 1:
        return sig
    taps = signal.firwin(DECIMATION_TAPS, bw / 2, window="hamming", fs=sig.fs)
    out = signal.resample_poly(sig.samples, 1, down, window=taps)
    return IqBuffer(out, float(bw))
