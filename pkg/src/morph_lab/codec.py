"""Morph SF-hopping frames, the correlation (Cor) decoder, and the
Ostinato and IFO-2 baseline codecs.

A Morph symbol carries two bits in its spreading factor: ``hop_period``
consecutive base up-chirps at ``sf_set[v]``, which always fill exactly one
SF_max chirp period.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence, Union

import numpy as np

from morph_lab.errors import ParameterError, ShapeError
from morph_lab.phy import (
    DEFAULT_BW,
    ChirpConfig,
    IqBuffer,
    base_downchirp,
    chirp_phase_advance,
    dechirp_decode,
    gen_chirp,
)

SF_SET_CHOICES = ((7, 8, 9, 10), (8, 9, 10, 11), (9, 10, 11, 12))
SFD_CHIRPS = 2
OSTINATO_SF = 12
OSTINATO_REPEATS = (2, 4, 8)
IFO2_SFS = (10, 11, 12)
# Initial frequency offsets of the four IFO-2 codes, in units of bw.
IFO2_OFFSETS = (-0.5, -0.25, 0.0, 0.25)
# dechirp bins that count as bin 0 for Cor
PEAK_BINS = (0, 1, -1)

CorMode = Literal["coherent", "noncoherent"]
Bits = Union[str, Sequence[int]]


@dataclass(frozen=True)
class MorphFrameSpec:
    """On-air layout of a Morph frame.

    ``phase_continuous`` selects whether each chirp starts at the phase the
    previous one ended on (the default) or restarts at zero.
    """

    sf_set: tuple[int, ...] = (9, 10, 11, 12)
    bw: float = DEFAULT_BW
    preamble_len: int = 8
    payload_symbols: int = 16
    phase_continuous: bool = True
    oversampling: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "sf_set", tuple(int(s) for s in self.sf_set))
        if self.sf_set not in SF_SET_CHOICES:
            raise ParameterError(
                f"sf_set must be one of {SF_SET_CHOICES}, got {self.sf_set}"
            )
        if self.preamble_len < 1:
            raise ParameterError(f"preamble_len must be >= 1, got {self.preamble_len}")
        if self.payload_symbols < 0:
            raise ParameterError(
                f"payload_symbols must be >= 0, got {self.payload_symbols}"
            )
        if self.oversampling < 1:
            raise ParameterError(f"oversampling must be >= 1, got {self.oversampling}")

    @classmethod
    def from_range(cls, sf_min: int, sf_max: int, **kwargs: object) -> MorphFrameSpec:
        if sf_max - sf_min != 3:
            raise ParameterError(f"SF range must span 4 SFs, got [{sf_min}, {sf_max}]")
        return cls(sf_set=tuple(range(sf_min, sf_max + 1)), **kwargs)  # type: ignore[arg-type]

    @property
    def sf_min(self) -> int:
        return self.sf_set[0]

    @property
    def sf_max(self) -> int:
        return self.sf_set[-1]

    @property
    def fs(self) -> float:
        return self.bw * self.oversampling

    @property
    def symbol_samples(self) -> int:
        return 2 ** self.sf_max * self.oversampling

    @property
    def symbol_duration_s(self) -> float:
        return 2 ** self.sf_max / self.bw

    @property
    def header_samples(self) -> int:
        """Preamble plus SFD length in samples."""
        return (self.preamble_len + SFD_CHIRPS) * self.symbol_samples

    @property
    def frame_samples(self) -> int:
        return self.header_samples + self.payload_symbols * self.symbol_samples

    @property
    def data_rate(self) -> float:
        return morph_data_rate(self.sf_max, self.bw)

    @property
    def label(self) -> str:
        return f"SH-[{self.sf_min},{self.sf_max}]"


@dataclass(frozen=True)
class MorphSymbol:
    bits2: int
    sf: int
    hop_period: int

    @classmethod
    def from_bits(cls, bits2: int, spec: MorphFrameSpec) -> MorphSymbol:
        if not 0 <= bits2 <= 3:
            raise ParameterError(f"bits2 must be in [0, 3], got {bits2}")
        sf = spec.sf_set[bits2]
        return cls(bits2=bits2, sf=sf, hop_period=freq_hopping_period(sf, spec.sf_max))


def freq_hopping_period(sf: int, sf_max: int) -> int:
    """Chirps per hop so that every symbol lasts one SF_max chirp."""
    return 2 ** (sf_max - sf)


def lora_data_rate(sf: int, bw: float = DEFAULT_BW) -> float:
    return sf * bw / 2 ** sf


def morph_data_rate(sf_max: int, bw: float = DEFAULT_BW) -> float:
    return 2 * bw / 2 ** sf_max


def ostinato_data_rate(repeats: int, bw: float = DEFAULT_BW) -> float:
    return OSTINATO_SF * bw / (repeats * 2 ** OSTINATO_SF)


def ifo2_data_rate(sf: int, bw: float = DEFAULT_BW) -> float:
    return 2 * bw / 2 ** sf


def bits_to_symbols(bits: Bits) -> list[int]:
    """Group bits in pairs, first bit of each pair least significant."""
    seq = [int(b) for b in bits]
    if any(b not in (0, 1) for b in seq):
        raise ParameterError("bits must be 0 or 1")
    if len(seq) % 2:
        raise ParameterError(f"bit count must be even, got {len(seq)}")
    return [seq[i] | (seq[i + 1] << 1) for i in range(0, len(seq), 2)]


def symbols_to_bits(symbols: Sequence[int]) -> str:
    return "".join(f"{v & 1}{(v >> 1) & 1}" for v in symbols)


class _ChirpTrain:
    """Accumulates chirps, carrying oscillator phase across chirp boundaries."""

    def __init__(self, bw: float, fs: float, continuous: bool) -> None:
        self.bw = bw
        self.fs = fs
        self.continuous = continuous
        self.phase = 0.0
        self.parts: list[np.ndarray] = []

    def add(self, sf: int, *, upchirp: bool = True, value: int = 0, count: int = 1) -> None:
        cfg = ChirpConfig(sf=sf, bw=self.bw, fs=self.fs, symbol_value=value)
        advance = chirp_phase_advance(cfg, upchirp)
        for _ in range(count):
            start = self.phase if self.continuous else 0.0
            self.parts.append(gen_chirp(cfg, upchirp, phase0=start).samples)
            self.phase = float(np.angle(np.exp(1j * (start + advance))))

    def buffer(self) -> IqBuffer:
        if not self.parts:
            return IqBuffer(np.zeros(0, dtype=np.complex128), self.fs)
        return IqBuffer(np.concatenate(self.parts), self.fs)


def morph_symbol(bits2: int, spec: MorphFrameSpec) -> IqBuffer:
    """One payload symbol (starting at phase 0) for the 2-bit value ``bits2``."""
    sym = MorphSymbol.from_bits(bits2, spec)
    train = _ChirpTrain(spec.bw, spec.fs, spec.phase_continuous)
    train.add(sym.sf, count=sym.hop_period)
    return train.buffer()


def morph_encode(bits: Bits, spec: MorphFrameSpec) -> IqBuffer:
    """Preamble, SFD, then one SF-hopped symbol per bit pair."""
    symbols = bits_to_symbols(bits)
    if len(symbols) != spec.payload_symbols:
        raise ParameterError(
            f"{len(symbols)} symbols given, frame declares {spec.payload_symbols}"
        )
    train = _ChirpTrain(spec.bw, spec.fs, spec.phase_continuous)
    train.add(spec.sf_max, count=spec.preamble_len)
    train.add(spec.sf_max, upchirp=False, count=SFD_CHIRPS)
    for v in symbols:
        sym = MorphSymbol.from_bits(v, spec)
        train.add(sym.sf, count=sym.hop_period)
    return train.buffer()


def _window_phase_step(sf: int, bw: float, oversampling: int, continuous: bool) -> float:
    """Known phase rotation between consecutive chirps of a train."""
    if not continuous:
        return 0.0
    return chirp_phase_advance(ChirpConfig(sf=sf, bw=bw, fs=bw * oversampling))


def _combine_windows(
    samples: np.ndarray, sf: int, step: float, mode: CorMode
) -> np.ndarray:
    """Dechirp each 2^sf window and combine; returns a 2^sf magnitude-ready spectrum."""
    n = 2 ** sf
    windows = samples.reshape(-1, n) * base_downchirp(sf)
    if mode == "coherent":
        derotate = np.exp(-1j * step * np.arange(windows.shape[0]))
        return np.abs(np.fft.fft(derotate @ windows))
    return np.abs(np.fft.fft(windows, axis=1)).sum(axis=0)


def cor_scores(
    sym: IqBuffer, spec: MorphFrameSpec, mode: CorMode = "coherent"
) -> np.ndarray:
    """Bin-0 energy share for each candidate SF template, in sf_set order.

    A window starting one sample early or late moves the matched energy to
    bin -1 or +1, so the strongest of bins 0 and +-1 counts as bin 0. The
    denominator is the total spectral energy of the dechirped symbol at
    SF_max resolution, which is the same for every template; a clean
    matched symbol scores 1.
    """
    if mode not in ("coherent", "noncoherent"):
        raise ParameterError(f"unknown Cor mode {mode!r}")
    n = 2 ** spec.sf_max
    if len(sym) != n:
        raise ShapeError(f"Cor expects {n} chip-rate samples, got {len(sym)}")
    scores = np.zeros(len(spec.sf_set))
    energy = n * float(np.vdot(sym.samples, sym.samples).real)
    if energy == 0:
        return scores
    for i, sf in enumerate(spec.sf_set):
        step = _window_phase_step(sf, spec.bw, spec.oversampling, spec.phase_continuous)
        spectrum = _combine_windows(sym.samples, sf, step, mode)
        scores[i] = float(np.max(spectrum[list(PEAK_BINS)])) ** 2 / energy
    return scores


def cor_decode(sym: IqBuffer, spec: MorphFrameSpec, mode: CorMode = "coherent") -> int:
    return int(np.argmax(cor_scores(sym, spec, mode)))


def ostinato_encode(
    value: int,
    repeats: int,
    sf: int = OSTINATO_SF,
    *,
    bw: float = DEFAULT_BW,
    phase_continuous: bool = True,
) -> IqBuffer:
    """``repeats`` identical SF-12 chirps carrying ``value``."""
    if repeats not in OSTINATO_REPEATS:
        raise ParameterError(f"repeats must be one of {OSTINATO_REPEATS}, got {repeats}")
    if sf != OSTINATO_SF:
        raise ParameterError(f"Ostinato uses SF-{OSTINATO_SF} chirps, got SF-{sf}")
    train = _ChirpTrain(bw, bw, phase_continuous)
    train.add(sf, value=value, count=repeats)
    return train.buffer()


def ostinato_decode(
    sym: IqBuffer,
    repeats: int,
    sf: int = OSTINATO_SF,
    *,
    phase_continuous: bool = True,
) -> tuple[int, float]:
    """Coherently sum the repeats, then dechirp; returns (value, peak magnitude)."""
    n = 2 ** sf
    if len(sym) != repeats * n:
        raise ShapeError(f"Ostinato-{repeats} expects {repeats * n} samples, got {len(sym)}")
    step = _window_phase_step(sf, sym.fs, 1, phase_continuous)
    derotate = np.exp(-1j * step * np.arange(repeats))
    combined = derotate @ sym.samples.reshape(repeats, n)
    return dechirp_decode(IqBuffer(combined, sym.fs), sf)


def ifo2_code_bins(sf: int) -> np.ndarray:
    """Dechirp bins of the four IFO-2 codes: 0, N/4, N/2, 3N/4."""
    n = 2 ** sf
    return np.array([int(round((off + 0.5) * n)) for off in IFO2_OFFSETS])


def ifo2_encode(bits2: int, sf: int, *, bw: float = DEFAULT_BW) -> IqBuffer:
    if sf not in IFO2_SFS:
        raise ParameterError(f"IFO-2 uses SF in {IFO2_SFS}, got {sf}")
    if not 0 <= bits2 <= 3:
        raise ParameterError(f"bits2 must be in [0, 3], got {bits2}")
    value = int(ifo2_code_bins(sf)[bits2])
    return gen_chirp(ChirpConfig(sf=sf, bw=bw, symbol_value=value))


def ifo2_nearest_code(bin_index: int, sf: int) -> int:
    """Nearest code by circular bin distance; ties go to the lower code."""
    n = 2 ** sf
    diff = np.abs(ifo2_code_bins(sf) - bin_index) % n
    return int(np.argmin(np.minimum(diff, n - diff)))


def ifo2_decode(sym: IqBuffer, sf: int) -> int:
    value, _ = dechirp_decode(sym, sf)
    return ifo2_nearest_code(value, sf)

