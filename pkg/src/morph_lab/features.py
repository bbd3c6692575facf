"""Real/imaginary STFT spectrograms and phase/SNR augmentation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from morph_lab.channel import add_awgn
from morph_lab.errors import ParameterError, ShapeError
from morph_lab.phy import IqBuffer

DEFAULT_F_BINS = 64
DEFAULT_T_FRAMES = 129


@dataclass(frozen=True)
class Spectrogram:
    """``data[0]`` is the real part, ``data[1]`` the imaginary part (F x T)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        if self.data.ndim != 3 or self.data.shape[0] != 2:
            raise ShapeError(f"spectrogram must be 2 x F x T, got {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ParameterError("spectrogram contains non-finite entries")

    @property
    def f_bins(self) -> int:
        return int(self.data.shape[1])

    @property
    def t_frames(self) -> int:
        return int(self.data.shape[2])

    @property
    def magnitude(self) -> np.ndarray:
        return np.hypot(self.data[0], self.data[1])


def stft_hop(n_samples: int, t_frames: int) -> int:
    if t_frames < 2 or n_samples % (t_frames - 1):
        raise ParameterError(
            f"{n_samples} samples cannot be split into {t_frames} frames with an "
            f"integral hop; choose t_frames - 1 dividing the symbol length"
        )
    return n_samples // (t_frames - 1)


def stft_features(
    sym: IqBuffer,
    f_bins: int = DEFAULT_F_BINS,
    t_frames: int = DEFAULT_T_FRAMES,
    *,
    normalize: bool = True,
) -> Spectrogram:
    """Rectangular-window STFT with centred framing, stacked as real/imag.

    The symbol is zero-padded by f_bins/2 on each side so exactly
    ``t_frames`` frames result. The transform is orthonormal, so before
    normalisation the tensor energy equals the summed frame energy. With
    ``normalize`` the tensor is divided by its RMS (all-zero input stays zero).
    """
    n = len(sym)
    if f_bins < 2 or f_bins % 2 or f_bins > n:
        raise ParameterError(f"f_bins must be even and <= {n}, got {f_bins}")
    hop = stft_hop(n, t_frames)
    half = f_bins // 2
    padded = np.concatenate(
        (np.zeros(half, np.complex128), sym.samples, np.zeros(half, np.complex128))
    )
    frames = sliding_window_view(padded, f_bins)[::hop][:t_frames]
    spec = np.fft.fftshift(np.fft.fft(frames, axis=1, norm="ortho"), axes=1).T
    data = np.stack((spec.real, spec.imag)).astype(np.float32)
    if normalize:
        rms = float(np.sqrt(np.mean(data.astype(np.float64) ** 2)))
        if rms > 0:
            data = (data / rms).astype(np.float32)
    return Spectrogram(data)


@dataclass(frozen=True)
class AugmentParams:
    phase_rad: float
    snr_db: float
    noise_seed: int


def draw_augmentation(rng: np.random.Generator, snr_range: tuple[float, float]) -> AugmentParams:
    lo, hi = snr_range
    if lo > hi:
        raise ParameterError(f"snr_range lower bound {lo} exceeds upper bound {hi}")
    return AugmentParams(
        phase_rad=float(rng.uniform(0.0, 2 * np.pi)),
        snr_db=float(rng.uniform(lo, hi)) if hi > lo else float(lo),
        noise_seed=int(rng.integers(0, 2 ** 63 - 1)),
    )


def augment(sym: IqBuffer, snr_range: tuple[float, float], seed: int) -> IqBuffer:
    """Uniform random initial phase, then AWGN at a uniformly drawn SNR."""
    p = draw_augmentation(np.random.default_rng(seed), snr_range)
    rotated = IqBuffer(sym.samples * np.exp(1j * p.phase_rad), sym.fs)
    return add_awgn(rotated, p.snr_db, p.noise_seed)
