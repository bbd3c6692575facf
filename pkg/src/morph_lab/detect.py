"""Preamble detection by N-segment superposition and chirp cross-correlation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from morph_lab.codec import SFD_CHIRPS, MorphFrameSpec
from morph_lab.errors import ParameterError, ShapeError, TruncationError
from morph_lab.phy import DEFAULT_BW, ChirpConfig, IqBuffer, chirp_phase_advance, gen_chirp

THRESHOLD_SIGMAS = 6.0
TRIM_FRACTION = 0.01


@dataclass(frozen=True)
class DetectionResult:
    found: bool
    start_index: int
    peak_corr: float
    threshold: float


def superposed_correlation(
    stream: IqBuffer,
    sf_max: int,
    n_segments: int,
    *,
    phase_continuous: bool = True,
    oversampling: int = 1,
) -> np.ndarray:
    """Complex correlation of the N-segment superposition over one symbol period.

    The frame must start within the first ``L = 2^sf_max`` samples of the
    stream. The superposition repeats every L samples, so only alignments
    ``p`` in ``[0, L)`` are searched; later payload or noise never competes
    with the preamble. Entry ``p`` correlates
    ``sum_i stream[p + i*L : p + (i+1)*L]`` with one base up-chirp, divided
    by the template energy, so an aligned clean preamble of N chirps yields
    magnitude N. Segments of a phase-continuous preamble are de-rotated by
    the known per-chirp phase advance before summing.
    """
    length = 2 ** sf_max
    if len(stream) < (n_segments + 1) * length:
        raise ShapeError(
            f"stream of {len(stream)} samples is shorter than "
            f"{n_segments + 1} symbols of {length}"
        )
    template = gen_chirp(ChirpConfig(sf=sf_max)).samples
    n_align = length
    head = stream.samples[:(n_segments + 1) * length - 1]
    # per-lag correlation, then a comb sum over the N segment offsets
    lagged = signal.fftconvolve(head, np.conj(template[::-1]), mode="valid")
    combined = np.zeros(n_align, dtype=np.complex128)
    step = 0.0
    if phase_continuous:
        step = chirp_phase_advance(ChirpConfig(sf=sf_max, fs=DEFAULT_BW * oversampling))
    for i in range(n_segments):
        combined += np.exp(-1j * step * i) * lagged[i * length:i * length + n_align]
    return combined / length


def detection_threshold(corr: np.ndarray) -> float:
    """Trimmed mean magnitude plus six trimmed complex standard deviations."""
    mag = np.abs(corr)
    keep = max(1, int(np.floor(len(mag) * (1.0 - TRIM_FRACTION))))
    idx = np.argsort(mag, kind="stable")[:keep]
    trimmed = corr[idx]
    spread = np.sqrt(np.mean(np.abs(trimmed - trimmed.mean()) ** 2))
    return float(mag[idx].mean() + THRESHOLD_SIGMAS * spread)


def detect_preamble(
    stream: IqBuffer,
    sf_max: int,
    n_preamble: int,
    *,
    phase_continuous: bool = True,
    oversampling: int = 1,
) -> DetectionResult:
    corr = superposed_correlation(
        stream,
        sf_max,
        n_preamble,
        phase_continuous=phase_continuous,
        oversampling=oversampling,
    )
    mag = np.abs(corr)
    peak = int(np.argmax(mag))
    threshold = detection_threshold(corr)
    return DetectionResult(
        found=bool(mag[peak] > threshold),
        start_index=peak,
        peak_corr=float(mag[peak]),
        threshold=threshold,
    )


def detect_frame(stream: IqBuffer, spec: MorphFrameSpec) -> DetectionResult:
    """``detect_preamble`` with the frame's SF_max, preamble length and phase mode."""
    if stream.fs != spec.bw:
        raise ParameterError(
            f"detection runs at chip rate ({spec.bw} Hz), stream is at {stream.fs} Hz"
        )
    return detect_preamble(
        stream,
        spec.sf_max,
        spec.preamble_len,
        phase_continuous=spec.phase_continuous,
        oversampling=spec.oversampling,
    )


def extract_symbols(
    stream: IqBuffer, det: DetectionResult, spec: MorphFrameSpec
) -> list[IqBuffer]:
    """Skip preamble and SFD, then slice ``payload_symbols`` chip-rate windows."""
    if not det.found:
        raise ShapeError("cannot extract symbols without a detected preamble")
    length = 2 ** spec.sf_max
    start = det.start_index + (spec.preamble_len + SFD_CHIRPS) * length
    end = start + spec.payload_symbols * length
    if start < 0 or end > len(stream):
        raise TruncationError(
            f"payload needs samples [{start}, {end}), stream has {len(stream)}"
        )
    return [stream.window(start + k * length, length) for k in range(spec.payload_symbols)]


def scan_stream(stream: IqBuffer, spec: MorphFrameSpec) -> DetectionResult:
    """Run ``detect_frame`` at every symbol-period hop of a long stream.

    A preamble straddling two hops is seen first with fewer segments, so
    after the first detection the scan keeps hopping while the peak grows.
    ``start_index`` is relative to the whole stream. When nothing crosses
    its threshold the strongest rejected candidate is returned.
    """
    length = 2 ** spec.sf_max
    span = (spec.preamble_len + 1) * length
    if len(stream) < span:
        raise ShapeError(f"stream of {len(stream)} samples is shorter than {span}")
    best: DetectionResult | None = None
    for hop in range(0, len(stream) - span + 1, length):
        det = detect_frame(stream.window(hop, span), spec)
        shifted = DetectionResult(det.found, hop + det.start_index, det.peak_corr, det.threshold)
        if best is not None and best.found:
            if not det.found or det.peak_corr <= best.peak_corr:
                break
            best = shifted
        elif best is None or det.found or det.peak_corr > best.peak_corr:
            best = shifted
    assert best is not None
    return best
