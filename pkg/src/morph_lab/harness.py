"""SER sweeps, SNR thresholds, comparison reports and detection trials.

Every sweep is split into (snr, block) work items whose seeds are derived
from (seed, snr, block) alone, and block results are merged in a fixed
order, so a curve is byte-identical for any worker count.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from morph_lab.channel import ChannelConfig, add_awgn, impair
from morph_lab.codec import (
    IFO2_SFS,
    OSTINATO_REPEATS,
    OSTINATO_SF,
    MorphFrameSpec,
    bits_to_symbols,
    cor_decode,
    ifo2_data_rate,
    ifo2_decode,
    ifo2_encode,
    lora_data_rate,
    morph_data_rate,
    morph_encode,
    morph_symbol,
    ostinato_data_rate,
    ostinato_decode,
    ostinato_encode,
)
from morph_lab.config import SweepConfig
from morph_lab.detect import detect_frame, extract_symbols, scan_stream
from morph_lab.errors import (
    ConfigurationError,
    NoCrossingError,
    ParameterError,
)
from morph_lab.features import stft_hop
from morph_lab.neural import MorphNet, NeuralDecoder
from morph_lab.output import log, log_point
from morph_lab.phy import (
    DEFAULT_BW,
    SF_RANGE,
    ChirpConfig,
    IqBuffer,
    decimate_to_chiprate,
    dechirp_decode,
    gen_chirp,
)
from morph_lab.tools import read_text, write_text

DECODERS: dict[str, tuple[str, ...]] = {
    "lora": ("dechirp",),
    "morph": ("cor", "cor-nc", "neural"),
    "ostinato": ("ostinato",),
    "ifo2": ("ifo2", "neural"),
}
CSV_HEADER = ("scheme", "config", "snr_db", "n_symbols", "n_errors", "ser", "ci_lo", "ci_hi")
NOISE_STREAM_FRAMES = 10


# ---------------------------------------------------------------------------
# Scheme setups
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SchemeSetup:
    """One (scheme, decoder) pair with everything needed to encode and decode.

    ``sf`` applies to ``lora`` and ``ifo2``; ``spec`` to ``morph``;
    ``repeats`` to ``ostinato``. Neural decoders need ``model``.
    """

    scheme: str
    decoder: str
    bw: float = DEFAULT_BW
    sf: int = 12
    spec: MorphFrameSpec = field(default_factory=MorphFrameSpec)
    repeats: int = 4
    model: Optional[MorphNet] = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.scheme not in DECODERS:
            raise ConfigurationError(
                f"unknown scheme {self.scheme!r}; choose from {sorted(DECODERS)}"
            )
        if self.decoder not in DECODERS[self.scheme]:
            raise ConfigurationError(
                f"scheme {self.scheme!r} has no decoder {self.decoder!r}; "
                f"choose from {DECODERS[self.scheme]}"
            )
        if self.scheme == "morph" and self.spec.bw != self.bw:
            object.__setattr__(self, "spec", replace(self.spec, bw=self.bw))
        if self.scheme == "lora" and self.sf not in SF_RANGE:
            raise ConfigurationError(f"LoRa SF must be in 7..12, got {self.sf}")
        if self.scheme == "ifo2" and self.sf not in IFO2_SFS:
            raise ConfigurationError(f"IFO-2 SF must be in {IFO2_SFS}, got {self.sf}")
        if self.scheme == "ostinato" and self.repeats not in OSTINATO_REPEATS:
            raise ConfigurationError(
                f"Ostinato repeats must be in {OSTINATO_REPEATS}, got {self.repeats}"
            )
        if self.decoder == "neural":
            self._check_model()

    def _check_model(self) -> None:
        if self.model is None:
            raise ConfigurationError("the neural decoder needs a trained model (--model)")
        ms = self.model.spec
        try:
            stft_hop(self.symbol_samples, ms.t_frames)
        except ParameterError as e:
            raise ConfigurationError(f"model does not fit {self.config_id}: {e}") from e
        if ms.f_bins > self.symbol_samples:
            raise ConfigurationError(
                f"model window {ms.f_bins} exceeds the {self.symbol_samples}-sample symbol"
            )

    @property
    def scheme_id(self) -> str:
        return f"{self.scheme}:{self.decoder}"

    @property
    def label(self) -> str:
        if self.scheme == "lora":
            return f"SF-{self.sf}"
        if self.scheme == "morph":
            return self.spec.label
        if self.scheme == "ostinato":
            return f"K-{self.repeats}"
        return f"IFO-2-{self.sf}"

    @property
    def config_id(self) -> str:
        return f"{self.label}@{self.bw:g}"

    @property
    def n_classes(self) -> int:
        if self.scheme == "lora":
            return 2 ** self.sf
        if self.scheme == "ostinato":
            return 2 ** OSTINATO_SF
        return 4

    @property
    def symbol_samples(self) -> int:
        """Chip-rate samples the decoder sees per symbol."""
        if self.scheme == "morph":
            return 2 ** self.spec.sf_max
        if self.scheme == "ostinato":
            return self.repeats * 2 ** OSTINATO_SF
        return 2 ** self.sf

    @property
    def data_rate(self) -> float:
        return data_rate_for(self.config_id)

    def encode(self, value: int) -> IqBuffer:
        if self.scheme in ("lora", "ostinato"):
            return _synthesize(self, value)
        return _cached_symbol(self, value)

    def decode(self, rx: Sequence[IqBuffer]) -> np.ndarray:
        """Decoded class of every received symbol (chip rate)."""
        if self.decoder == "neural":
            assert self.model is not None
            return NeuralDecoder(self.model).decode_batch(rx)
        if self.decoder == "dechirp":
            out = [dechirp_decode(s, self.sf)[0] for s in rx]
        elif self.decoder in ("cor", "cor-nc"):
            mode = "coherent" if self.decoder == "cor" else "noncoherent"
            out = [cor_decode(s, self.spec, mode) for s in rx]
        elif self.decoder == "ostinato":
            out = [
                ostinato_decode(s, self.repeats, phase_continuous=self.spec.phase_continuous)[0]
                for s in rx
            ]
        else:
            out = [ifo2_decode(s, self.sf) for s in rx]
        return np.asarray(out, dtype=np.int64)


def _synthesize(setup: SchemeSetup, value: int) -> IqBuffer:
    if setup.scheme == "lora":
        return gen_chirp(ChirpConfig(sf=setup.sf, bw=setup.bw, symbol_value=value))
    if setup.scheme == "morph":
        return decimate_to_chiprate(morph_symbol(value, setup.spec), setup.bw)
    if setup.scheme == "ostinato":
        return ostinato_encode(
            value, setup.repeats, bw=setup.bw, phase_continuous=setup.spec.phase_continuous
        )
    return ifo2_encode(value, setup.sf, bw=setup.bw)


# Morph and IFO-2 have four distinct symbols per setup.
_cached_symbol = lru_cache(maxsize=64)(_synthesize)


def make_setup(
    scheme: str,
    decoder: Optional[str] = None,
    *,
    bw: float = DEFAULT_BW,
    sf: int = 12,
    sf_set: Sequence[int] = (9, 10, 11, 12),
    repeats: int = 4,
    model: Optional[MorphNet] = None,
) -> SchemeSetup:
    """Build a setup; ``decoder`` defaults to the scheme's first decoder."""
    if scheme not in DECODERS:
        raise ConfigurationError(f"unknown scheme {scheme!r}; choose from {sorted(DECODERS)}")
    try:
        spec = MorphFrameSpec(sf_set=tuple(sf_set), bw=bw)
    except ParameterError as e:
        raise ConfigurationError(str(e)) from e
    return SchemeSetup(
        scheme=scheme,
        decoder=decoder or DECODERS[scheme][0],
        bw=bw,
        sf=sf,
        spec=spec,
        repeats=repeats,
        model=model,
    )


# ---------------------------------------------------------------------------
# Curves and statistics
# ---------------------------------------------------------------------------


def wilson_interval(n_errors: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    if n <= 0:
        return 0.0, 1.0
    z = float(stats.norm.ppf(0.5 + confidence / 2.0))
    p = n_errors / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass(frozen=True)
class SerPoint:
    snr_db: float
    n_symbols: int
    n_errors: int

    @property
    def ser(self) -> float:
        return self.n_errors / self.n_symbols if self.n_symbols else 0.0

    @property
    def ci(self) -> tuple[float, float]:
        return wilson_interval(self.n_errors, self.n_symbols)

    @property
    def std_error(self) -> float:
        p = self.ser
        return math.sqrt(p * (1 - p) / self.n_symbols) if self.n_symbols else 0.0


@dataclass(frozen=True)
class SerCurve:
    scheme: str
    config: str
    points: tuple[SerPoint, ...]

    def __post_init__(self) -> None:
        pts = sorted(self.points, key=lambda p: p.snr_db)
        snrs = [p.snr_db for p in pts]
        if len(set(snrs)) != len(snrs):
            raise ParameterError(f"duplicate SNR points in curve {self.scheme} {self.config}")
        object.__setattr__(self, "points", tuple(pts))

    @property
    def bw(self) -> float:
        return parse_config_id(self.config)[1]

    @property
    def grid_step_db(self) -> float:
        if len(self.points) < 2:
            return 0.0
        return float(np.min(np.diff([p.snr_db for p in self.points])))

    def merged(self, other: SerCurve) -> SerCurve:
        """Union of both point sets; ``other`` wins at shared SNRs."""
        by_snr = {p.snr_db: p for p in self.points}
        by_snr.update({p.snr_db: p for p in other.points})
        return SerCurve(self.scheme, self.config, tuple(by_snr.values()))


@dataclass(frozen=True)
class ThresholdReport:
    scheme: str
    config: str
    threshold_db: float
    target_ser: float = 0.01
    grid_step_db: float = 1.0


def snr_threshold(curve: SerCurve, target: float = 0.01) -> ThresholdReport:
    """Lowest grid SNR at and above which every point has SER <= target."""
    pts = curve.points
    if not pts:
        raise NoCrossingError(f"{curve.scheme} {curve.config}: curve has no points")
    if pts[-1].ser > target:
        raise NoCrossingError(
            f"{curve.scheme} {curve.config}: SER {pts[-1].ser:.4g} > {target} at the top "
            f"of the grid ({pts[-1].snr_db:g} dB); widen the grid upward"
        )
    i = len(pts) - 1
    while i > 0 and pts[i - 1].ser <= target:
        i -= 1
    if i == 0:
        raise NoCrossingError(
            f"{curve.scheme} {curve.config}: SER <= {target} over the whole grid; "
            f"widen the grid downward below {pts[0].snr_db:g} dB"
        )
    return ThresholdReport(curve.scheme, curve.config, pts[i].snr_db, target, curve.grid_step_db)


def check_monotonic(
    curve: SerCurve, gap_db: float = 2.0, sigmas: float = 3.0
) -> list[tuple[float, float]]:
    """(lo, hi) SNR pairs, hi >= lo + gap_db, where SER at hi exceeds SER at lo
    by more than ``sigmas`` combined binomial standard errors."""
    bad: list[tuple[float, float]] = []
    for i, lo in enumerate(curve.points):
        for hi in curve.points[i + 1:]:
            if hi.snr_db < lo.snr_db + gap_db - 1e-9:
                continue
            se = math.hypot(lo.std_error, hi.std_error)
            if hi.ser > lo.ser + sigmas * se:
                bad.append((lo.snr_db, hi.snr_db))
    return bad


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------


def block_seed(seed: int, snr_db: float, block: int) -> int:
    h = hashlib.blake2b(f"{seed}|{snr_db:.6f}|{block}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


def _fit_length(sig: IqBuffer, n: int) -> IqBuffer:
    """Trim or zero-extend to ``n`` samples (SFO changes the length slightly)."""
    if len(sig) == n:
        return sig
    out = np.zeros(n, dtype=np.complex128)
    m = min(n, len(sig))
    out[:m] = sig.samples[:m]
    return IqBuffer(out, sig.fs)


def run_block(
    setup: SchemeSetup,
    snr_db: float,
    n_trials: int,
    seed: int,
    *,
    cfo_hz: float = 0.0,
    sfo_ppm: float = 0.0,
) -> int:
    """Symbol errors over ``n_trials`` random symbols at one SNR."""
    rng = np.random.default_rng(seed)
    values = rng.integers(0, setup.n_classes, size=n_trials)
    rx: list[IqBuffer] = []
    for v in values:
        cfg = ChannelConfig(
            snr_db=snr_db,
            cfo_hz=cfo_hz,
            sfo_ppm=sfo_ppm,
            phase0_rad=float(rng.uniform(0.0, 2 * np.pi)),
            seed=int(rng.integers(0, 2 ** 63 - 1)),
        )
        rx.append(_fit_length(impair(setup.encode(int(v)), cfg), setup.symbol_samples))
    return int(np.count_nonzero(setup.decode(rx) != values))


def run_ser_sweep(setup: SchemeSetup, cfg: SweepConfig) -> SerCurve:
    """Monte-Carlo SER at every grid SNR, parallel over (snr, block)."""
    jobs: list[tuple[float, int, int]] = []
    for snr in cfg.snr_grid:
        for b in range(cfg.n_blocks):
            n = min(cfg.block_size, cfg.trials - b * cfg.block_size)
            jobs.append((snr, n, block_seed(cfg.seed, snr, b)))

    def work(job: tuple[float, int, int]) -> int:
        snr, n, s = job
        return run_block(setup, snr, n, s, cfo_hz=cfg.cfo_hz, sfo_ppm=cfg.sfo_ppm)

    if cfg.workers == 1:
        errors = [work(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            errors = list(pool.map(work, jobs))

    points: list[SerPoint] = []
    for k, snr in enumerate(cfg.snr_grid):
        chunk = errors[k * cfg.n_blocks:(k + 1) * cfg.n_blocks]
        point = SerPoint(snr, cfg.trials, int(sum(chunk)))
        log_point(f"{setup.scheme_id} {setup.config_id}", point)
        points.append(point)
    return SerCurve(setup.scheme_id, setup.config_id, tuple(points))


def refine_threshold(
    setup: SchemeSetup, cfg: SweepConfig, curve: SerCurve
) -> tuple[ThresholdReport, SerCurve]:
    """Re-measure between the grid threshold and the grid point below it.

    New points are spaced ``cfg.refine_step`` apart; the returned report
    carries that step as its resolution.
    """
    coarse = snr_threshold(curve, cfg.target_ser)
    step = curve.grid_step_db
    if step <= cfg.refine_step:
        return coarse, curve
    below = max(p.snr_db for p in curve.points if p.snr_db < coarse.threshold_db)
    extra = np.arange(coarse.threshold_db - cfg.refine_step, below + 1e-9, -cfg.refine_step)
    extra = [round(float(s), 6) for s in extra if s > below + 1e-9]
    if not extra:
        return coarse, curve
    fine = run_ser_sweep(setup, replace(cfg, snr_grid=tuple(sorted(extra))))
    merged = curve.merged(fine)
    report = snr_threshold(merged, cfg.target_ser)
    return replace(report, grid_step_db=cfg.refine_step), merged


# ---------------------------------------------------------------------------
# CSV and comparison
# ---------------------------------------------------------------------------


def format_csv(curves: Sequence[SerCurve]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for c in curves:
        for p in c.points:
            lo, hi = p.ci
            w.writerow(
                [c.scheme, c.config, f"{p.snr_db:.2f}", p.n_symbols, p.n_errors,
                 f"{p.ser:.6g}", f"{lo:.6g}", f"{hi:.6g}"]
            )
    return buf.getvalue()


def write_csv(curves: Sequence[SerCurve], path: Path) -> Path:
    write_text(path, format_csv(curves))
    return path


def parse_csv(text: str) -> list[SerCurve]:
    """Curves in order of first appearance; counts are taken, SER recomputed."""
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != CSV_HEADER:
        raise ConfigurationError(f"unexpected CSV header {reader.fieldnames}")
    grouped: dict[tuple[str, str], list[SerPoint]] = {}
    for row in reader:
        key = (row["scheme"], row["config"])
        grouped.setdefault(key, []).append(
            SerPoint(float(row["snr_db"]), int(row["n_symbols"]), int(row["n_errors"]))
        )
    return [SerCurve(s, c, tuple(pts)) for (s, c), pts in grouped.items()]


def read_csv(path: Path) -> list[SerCurve]:
    return parse_csv(read_text(path))


_CONFIG_ID = re.compile(
    r"^(?:SH-\[(?P<lo>\d+),(?P<hi>\d+)\]|SF-(?P<sf>\d+)|K-(?P<k>\d+)|IFO-2-(?P<ifo>\d+))"
    r"@(?P<bw>[0-9.eE+]+)$"
)


def parse_config_id(config: str) -> tuple[str, float]:
    """(label, bw) of a config id such as ``SH-[9,12]@125000``."""
    m = _CONFIG_ID.match(config)
    if not m:
        raise ConfigurationError(f"unrecognised config id {config!r}")
    return config.split("@")[0], float(m["bw"])


def data_rate_for(config: str) -> float:
    """Payload bits/s implied by a config id."""
    m = _CONFIG_ID.match(config)
    if not m:
        raise ConfigurationError(f"unrecognised config id {config!r}")
    bw = float(m["bw"])
    if m["hi"]:
        return morph_data_rate(int(m["hi"]), bw)
    if m["sf"]:
        return lora_data_rate(int(m["sf"]), bw)
    if m["k"]:
        return ostinato_data_rate(int(m["k"]), bw)
    return ifo2_data_rate(int(m["ifo"]), bw)


@dataclass(frozen=True)
class SummaryRow:
    scheme: str
    config: str
    threshold_db: Optional[float]
    data_rate: float
    note: str = ""


@dataclass(frozen=True)
class CompareReport:
    rows: tuple[SummaryRow, ...]
    mixed_bw: bool
    target_ser: float

    def format_table(self) -> str:
        lines = [
            f"{'scheme':<16} {'config':<20} {'threshold_dB':>12} {'rate_bps':>10}  note",
            "-" * 72,
        ]
        for r in self.rows:
            thr = f"{r.threshold_db:.2f}" if r.threshold_db is not None else "n/a"
            lines.append(
                f"{r.scheme:<16} {r.config:<20} {thr:>12} {r.data_rate:>10.2f}  {r.note}"
            )
        if self.mixed_bw:
            lines.append("WARNING: curves use different bandwidths; thresholds are not comparable")
        return "\n".join(lines)


def compare_report(curves: Sequence[SerCurve], target: float = 0.01) -> CompareReport:
    """Thresholds and data rates of every curve, best threshold first."""
    if len(curves) < 2:
        raise ConfigurationError(f"compare needs at least 2 curves, got {len(curves)}")
    rows: list[SummaryRow] = []
    for c in curves:
        try:
            thr: Optional[float] = snr_threshold(c, target).threshold_db
            note = ""
        except NoCrossingError:
            thr, note = None, "no crossing in grid"
        rows.append(SummaryRow(c.scheme, c.config, thr, data_rate_for(c.config), note))
    rows.sort(key=lambda r: (r.threshold_db is None, r.threshold_db or 0.0))
    mixed = len({c.bw for c in curves}) > 1
    if mixed:
        log("[compare] WARNING: mixed bandwidth configurations")
    return CompareReport(tuple(rows), mixed, target)


# ---------------------------------------------------------------------------
# Detection trials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DetectionStats:
    trials: int
    detections: int
    false_alarms: int
    payload_errors: int
    payload_symbols: int

    @property
    def detection_rate(self) -> float:
        return self.detections / self.trials if self.trials else 0.0

    @property
    def false_alarm_rate(self) -> float:
        return self.false_alarms / self.trials if self.trials else 0.0

    @property
    def payload_ser(self) -> float:
        return self.payload_errors / self.payload_symbols if self.payload_symbols else 0.0


def run_detection_trials(
    spec: MorphFrameSpec,
    snr_db: float,
    trials: int,
    seed: int = 0,
    *,
    tolerance: int = 2,
) -> DetectionStats:
    """Frames at a random offset in noise, plus an equal number of noise-only streams.

    A detection counts when the start index is within ``tolerance`` samples
    of the true offset; detected payloads are Cor-decoded for the payload SER.
    Each noise-only stream spans ``NOISE_STREAM_FRAMES`` frame lengths and is
    scanned one symbol period at a time; any detection is one false alarm.
    """
    if spec.oversampling != 1:
        raise ConfigurationError("detection trials run at chip rate (oversampling 1)")
    length = 2 ** spec.sf_max
    rng = np.random.default_rng(seed)
    hits = alarms = errors = decoded = 0
    for t in range(trials):
        bits = rng.integers(0, 2, size=2 * spec.payload_symbols)
        frame = morph_encode(bits.tolist(), spec)
        offset = int(rng.integers(0, length))
        stream = np.zeros(offset + spec.frame_samples + length, dtype=np.complex128)
        phase = rng.uniform(0.0, 2 * np.pi)
        stream[offset:offset + len(frame)] = frame.samples * np.exp(1j * phase)
        rx = add_awgn(IqBuffer(stream, spec.bw), snr_db, int(rng.integers(0, 2 ** 63 - 1)),
                      reference_power=1.0)
        det = detect_frame(rx, spec)
        if det.found and abs(det.start_index - offset) <= tolerance:
            hits += 1
            syms = extract_symbols(rx, det, spec)
            got = [cor_decode(s, spec) for s in syms]
            sent = bits_to_symbols(bits.tolist())
            errors += sum(g != s for g, s in zip(got, sent))
            decoded += len(sent)
        noise = add_awgn(IqBuffer(np.zeros(NOISE_STREAM_FRAMES * spec.frame_samples), spec.bw),
                         snr_db, int(rng.integers(0, 2 ** 63 - 1)), reference_power=1.0)
        if scan_stream(noise, spec).found:
            alarms += 1
        if (t + 1) % 10 == 0:
            log(f"[detect] {t + 1}/{trials} trials, {hits} detections, {alarms} false alarms")
    return DetectionStats(trials, hits, alarms, errors, decoded)

