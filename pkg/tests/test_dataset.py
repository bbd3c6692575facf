"""Tests for dataset generation and the MORPHIQ1 file format."""

import json
import struct

import numpy as np
import pytest

from morph_lab.codec import MorphFrameSpec, ifo2_code_bins, morph_symbol
from morph_lab.dataset import (
    MAGIC,
    DatasetRecord,
    IqDataset,
    SnrPolicy,
    decode_dataset,
    encode_dataset,
    gen_dataset,
    read_dataset,
)
from morph_lab.errors import ConfigurationError, DatasetError, DatasetIOError, ParameterError
from morph_lab.output import set_quiet
from morph_lab.phy import dechirp_decode


@pytest.fixture(autouse=True)
def _quiet():
    previous = set_quiet(True)
    yield
    set_quiet(previous)


class TestSnrPolicy:
    def test_parse(self):
        assert SnrPolicy.parse("clean").kind == "clean"
        assert SnrPolicy.parse("-20") == SnrPolicy("fixed", snr_db=-20.0)
        assert SnrPolicy.parse("-50:20") == SnrPolicy("uniform", snr_range=(-50.0, 20.0))

    def test_parse_garbage(self):
        with pytest.raises(ParameterError):
            SnrPolicy.parse("loud")

    def test_inverted_range(self):
        with pytest.raises(ParameterError):
            SnrPolicy("uniform", snr_range=(5.0, -5.0))

    def test_describe(self):
        assert SnrPolicy.parse("-50:20").describe() == "-50:20"


class TestGenDataset:
    def test_balanced_interleaved(self, tmp_path):
        ds = gen_dataset("morph", MorphFrameSpec(), 20, SnrPolicy(), tmp_path / "d.miq", seed=1)
        assert len(ds) == 80
        assert ds.class_counts().tolist() == [20, 20, 20, 20]
        assert [r.label for r in ds.records[:8]] == [0, 1, 2, 3, 0, 1, 2, 3]
        assert [r.sf for r in ds.records[:4]] == [9, 10, 11, 12]

    def test_clean_records_are_symbols(self, tmp_path):
        spec = MorphFrameSpec(sf_set=(7, 8, 9, 10))
        ds = gen_dataset("morph", spec, 1, SnrPolicy(), None)
        for rec in ds.records:
            expected = morph_symbol(rec.label, spec).samples.astype(np.complex64)
            assert np.array_equal(rec.samples, expected)

    def test_ifo2(self):
        ds = gen_dataset("ifo2", MorphFrameSpec(), 2, SnrPolicy(), None, ifo2_sf=10)
        assert ds.footer["sf_set"] == [10]
        for rec in ds.records:
            assert rec.sf == 10
            value, _ = dechirp_decode_rec(rec)
            assert value == ifo2_code_bins(10)[rec.label]

    def test_noisy_policy_changes_samples(self):
        spec = MorphFrameSpec(sf_set=(7, 8, 9, 10))
        clean = gen_dataset("morph", spec, 2, SnrPolicy(), None, seed=4)
        noisy = gen_dataset("morph", spec, 2, SnrPolicy.parse("-10"), None, seed=4)
        again = gen_dataset("morph", spec, 2, SnrPolicy.parse("-10"), None, seed=4)
        assert not np.array_equal(clean.records[0].samples, noisy.records[0].samples)
        assert all(np.array_equal(a.samples, b.samples) for a, b in zip(noisy.records, again.records))

    def test_zero_count_writes_valid_file(self, tmp_path):
        path = tmp_path / "empty.miq"
        gen_dataset("morph", MorphFrameSpec(), 0, SnrPolicy(), path)
        raw = path.read_bytes()
        assert raw[:8] == MAGIC
        assert struct.unpack_from("<I", raw, 8)[0] == 0
        ds = read_dataset(path)
        assert len(ds) == 0
        assert ds.footer["scheme"] == "morph"

    def test_unknown_scheme(self):
        with pytest.raises(ConfigurationError):
            gen_dataset("lora", MorphFrameSpec(), 1, SnrPolicy(), None)  # type: ignore[arg-type]

    def test_unwritable_path(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(DatasetIOError, match="file"):
            gen_dataset("morph", MorphFrameSpec(), 1, SnrPolicy(), blocker / "d.miq")


def dechirp_decode_rec(rec: DatasetRecord):
    from morph_lab.phy import IqBuffer

    return dechirp_decode(IqBuffer(rec.samples, 125e3), rec.sf)


class TestFileFormat:
    def test_round_trip_bit_exact(self, tmp_path):
        path = tmp_path / "d.miq"
        ds = gen_dataset("morph", MorphFrameSpec(sf_set=(7, 8, 9, 10)), 3,
                         SnrPolicy.parse("-30:0"), path, seed=9)
        back = read_dataset(path)
        assert back.footer == ds.footer
        for a, b in zip(ds.records, back.records):
            assert (a.label, a.sf) == (b.label, b.sf)
            assert a.samples.tobytes() == b.samples.tobytes()

    def test_record_layout(self):
        rec = DatasetRecord(2, 11, np.array([1 + 2j, -3 - 4j], dtype=np.complex64))
        raw = encode_dataset(IqDataset([rec], {"bw": 125000.0}))
        label, sf, reserved, n = struct.unpack_from("<BBHI", raw, 12)
        assert (label, sf, reserved, n) == (2, 11, 0, 2)
        assert struct.unpack_from("<4f", raw, 20) == (1.0, 2.0, -3.0, -4.0)
        (n_footer,) = struct.unpack_from("<I", raw, 36)
        assert json.loads(raw[40:40 + n_footer]) == {"bw": 125000.0}

    def test_bad_magic(self):
        with pytest.raises(DatasetError, match="magic"):
            decode_dataset(b"XXXXXXXX" + bytes(8))

    def test_truncated_record(self):
        rec = DatasetRecord(0, 9, np.ones(16, dtype=np.complex64))
        raw = encode_dataset(IqDataset([rec], {}))
        with pytest.raises(DatasetError, match="truncated"):
            decode_dataset(raw[:40])

    def test_footer_not_json(self):
        rec = DatasetRecord(0, 9, np.ones(4, dtype=np.complex64))
        records = encode_dataset(IqDataset([rec], {}))[:52]
        body = b"{oops"
        with pytest.raises(DatasetError, match="JSON"):
            decode_dataset(records + struct.pack("<I", len(body)) + body)

    def test_to_labeled(self):
        ds = gen_dataset("morph", MorphFrameSpec(), 2, SnrPolicy(), None)
        data = ds.to_labeled()
        assert data.labels.tolist() == [0, 1, 2, 3, 0, 1, 2, 3]
        assert data.meta["sf_set"] == [9, 10, 11, 12]
        assert data.symbols[0].fs == 125000.0

    def test_to_labeled_empty(self):
        with pytest.raises(DatasetError):
            IqDataset([], {}).to_labeled()
