"""Labeled IQ symbol datasets and their MORPHIQ1 file format.

File layout: magic ``MORPHIQ1``, u32 LE record count, then per record
``label:u8 sf:u8 reserved:u16 n:u32`` followed by n interleaved float32 I/Q
pairs, then a u32-length-prefixed JSON footer (bw, fs, sf_set, scheme, seed).
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional

import numpy as np

from morph_lab.channel import add_awgn
from morph_lab.codec import IFO2_SFS, MorphFrameSpec, ifo2_encode, morph_symbol
from morph_lab.errors import ConfigurationError, DatasetError, DatasetIOError, ParameterError
from morph_lab.neural import LabeledSymbols
from morph_lab.output import log
from morph_lab.phy import IqBuffer, decimate_to_chiprate

MAGIC = b"MORPHIQ1"
_HEADER = struct.Struct("<8sI")
_RECORD = struct.Struct("<BBHI")
_U32 = struct.Struct("<I")

DatasetScheme = Literal["morph", "ifo2"]
PolicyKind = Literal["clean", "fixed", "uniform"]


@dataclass(frozen=True)
class SnrPolicy:
    """How stored symbols are impaired: not at all, at one SNR, or a uniform range.

    Noisy policies also rotate each record by a uniform random phase.
    """

    kind: PolicyKind = "clean"
    snr_db: float = 0.0
    snr_range: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if self.kind not in ("clean", "fixed", "uniform"):
            raise ParameterError(f"unknown SNR policy {self.kind!r}")
        if self.kind == "uniform" and self.snr_range[0] > self.snr_range[1]:
            raise ParameterError(f"inverted SNR range {self.snr_range}")

    @classmethod
    def parse(cls, text: str) -> SnrPolicy:
        """``clean``, a single SNR such as ``-20``, or a range ``lo:hi``."""
        text = text.strip()
        if text == "clean":
            return cls()
        try:
            if ":" in text:
                lo, hi = (float(v) for v in text.split(":"))
                return cls("uniform", snr_range=(lo, hi))
            return cls("fixed", snr_db=float(text))
        except ValueError as e:
            raise ParameterError(f"bad SNR policy {text!r}: {e}") from e

    def draw(self, rng: np.random.Generator) -> Optional[float]:
        if self.kind == "clean":
            return None
        if self.kind == "fixed":
            return self.snr_db
        return float(rng.uniform(*self.snr_range))

    def describe(self) -> str:
        if self.kind == "clean":
            return "clean"
        if self.kind == "fixed":
            return f"{self.snr_db:g}"
        return f"{self.snr_range[0]:g}:{self.snr_range[1]:g}"


@dataclass(frozen=True)
class DatasetRecord:
    label: int
    sf: int
    samples: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.samples, dtype=np.complex64)
        object.__setattr__(self, "samples", arr)
        if not 0 <= self.label <= 255 or not 0 <= self.sf <= 255:
            raise ParameterError(f"label/sf must fit in a byte, got {self.label}/{self.sf}")


@dataclass
class IqDataset:
    records: list[DatasetRecord]
    footer: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def fs(self) -> float:
        return float(self.footer.get("fs", self.footer.get("bw", 0.0)))

    def class_counts(self, n_classes: int = 4) -> np.ndarray:
        return np.bincount([r.label for r in self.records], minlength=n_classes)

    def to_labeled(self) -> LabeledSymbols:
        if not self.records:
            raise DatasetError("dataset has no records")
        symbols = [IqBuffer(r.samples, self.fs) for r in self.records]
        labels = np.array([r.label for r in self.records], dtype=np.int64)
        meta = {k: self.footer[k] for k in ("scheme", "sf_set", "bw") if k in self.footer}
        return LabeledSymbols(symbols, labels, meta)


def encode_dataset(ds: IqDataset) -> bytes:
    parts = [_HEADER.pack(MAGIC, len(ds.records))]
    for rec in ds.records:
        iq = np.empty(2 * len(rec.samples), dtype="<f4")
        iq[0::2] = rec.samples.real
        iq[1::2] = rec.samples.imag
        parts.append(_RECORD.pack(rec.label, rec.sf, 0, len(rec.samples)))
        parts.append(iq.tobytes())
    footer = json.dumps(ds.footer, sort_keys=True).encode("utf-8")
    parts.append(_U32.pack(len(footer)) + footer)
    return b"".join(parts)


def decode_dataset(raw: bytes) -> IqDataset:
    if len(raw) < _HEADER.size:
        raise DatasetError("dataset file is shorter than its header")
    magic, count = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise DatasetError(f"bad magic {magic!r}, expected {MAGIC!r}")
    offset = _HEADER.size
    records: list[DatasetRecord] = []
    try:
        for _ in range(count):
            label, sf, _reserved, n = _RECORD.unpack_from(raw, offset)
            offset += _RECORD.size
            if offset + 8 * n > len(raw):
                raise DatasetError(f"record {len(records)} is truncated")
            iq = np.frombuffer(raw, dtype="<f4", count=2 * n, offset=offset)
            offset += 8 * n
            samples = iq[0::2].astype(np.complex64)
            samples.imag = iq[1::2]
            records.append(DatasetRecord(label, sf, samples))
        (n_footer,) = _U32.unpack_from(raw, offset)
        footer = json.loads(raw[offset + 4:offset + 4 + n_footer].decode("utf-8"))
    except struct.error as e:
        raise DatasetError(f"dataset file is truncated: {e}") from e
    except ValueError as e:
        raise DatasetError(f"dataset footer is not valid JSON: {e}") from e
    return IqDataset(records, footer)


def write_dataset(ds: IqDataset, path: Path) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_dataset(ds))
    except OSError as e:
        raise DatasetIOError(path, e) from e
    return path


def read_dataset(path: Path) -> IqDataset:
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise DatasetIOError(path, e) from e
    return decode_dataset(raw)


def clean_symbol(
    scheme: DatasetScheme, label: int, spec: MorphFrameSpec, ifo2_sf: int = 12
) -> tuple[int, IqBuffer]:
    """(sf, chip-rate symbol) for one class of a Morph or IFO-2 dataset."""
    if scheme == "morph":
        return spec.sf_set[label], decimate_to_chiprate(morph_symbol(label, spec), spec.bw)
    if scheme == "ifo2":
        if ifo2_sf not in IFO2_SFS:
            raise ParameterError(f"IFO-2 uses SF in {IFO2_SFS}, got {ifo2_sf}")
        return ifo2_sf, ifo2_encode(label, ifo2_sf, bw=spec.bw)
    raise ConfigurationError(f"datasets exist for 'morph' and 'ifo2', not {scheme!r}")


def gen_dataset(
    scheme: DatasetScheme,
    spec: MorphFrameSpec,
    count_per_class: int,
    policy: SnrPolicy,
    out_path: Optional[Path],
    seed: int = 0,
    *,
    ifo2_sf: int = 12,
) -> IqDataset:
    """Balanced, class-interleaved records; written to ``out_path`` when given."""
    if count_per_class < 0:
        raise ParameterError(f"count_per_class must be >= 0, got {count_per_class}")
    templates = [clean_symbol(scheme, label, spec, ifo2_sf) for label in range(4)]
    rng = np.random.default_rng(seed)
    records: list[DatasetRecord] = []
    for _ in range(count_per_class):
        for label, (sf, sym) in enumerate(templates):
            snr = policy.draw(rng)
            if snr is not None:
                phase = rng.uniform(0.0, 2 * np.pi)
                noise_seed = int(rng.integers(0, 2 ** 63 - 1))
                rotated = IqBuffer(sym.samples * np.exp(1j * phase), sym.fs)
                sym = add_awgn(rotated, snr, noise_seed)
            records.append(DatasetRecord(label, sf, sym.samples))
    footer = {
        "bw": spec.bw,
        "fs": spec.bw,
        "sf_set": list(spec.sf_set) if scheme == "morph" else [ifo2_sf],
        "scheme": scheme,
        "seed": seed,
        "policy": policy.describe(),
    }
    ds = IqDataset(records, footer)
    if out_path is not None:
        write_dataset(ds, out_path)
        log(f"[data] wrote {len(records)} records ({policy.describe()}) to {out_path}")
    return ds

