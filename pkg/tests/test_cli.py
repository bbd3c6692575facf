"""Tests for CLI argument parsing and exit codes."""

from pathlib import Path

import pytest

from morph_lab.cli import (
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_NO_CROSSING,
    EXIT_OK,
    build_setups,
    main,
    parse_args,
)
from morph_lab.dataset import read_dataset
from morph_lab.harness import read_csv
from morph_lab.output import set_quiet


@pytest.fixture(autouse=True)
def _restore_quiet():
    previous = set_quiet(True)
    yield
    set_quiet(previous)


class TestParseArgs:
    def test_gen_dataset_defaults(self):
        args = parse_args(["gen-dataset", "-o", "d.miq"])
        assert args.command == "gen-dataset"
        assert args.scheme == "morph"
        assert args.sf_set == "9,12"
        assert args.count == 20
        assert args.snr == "clean"
        assert args.out == Path("d.miq")
        assert args.seed == 0
        assert args.bw == 125_000.0

    def test_train_overrides(self):
        args = parse_args([
            "train", "d.miq", "-o", "m.mnn",
            "--epochs", "5", "--batch-size", "16", "--lr", "0.01",
            "--aug-snr=-30:5", "--seed", "7",
        ])
        assert args.dataset == Path("d.miq")
        assert (args.epochs, args.batch_size, args.lr) == (5, 16, 0.01)
        assert args.aug_snr == (-30.0, 5.0)
        assert args.seed == 7

    def test_eval_ser_negative_grid(self):
        args = parse_args(["eval-ser", "--snr-grid=-30:-16:1", "--scheme", "lora", "--sf", "7,8"])
        assert args.snr_grid == "-30:-16:1"
        assert args.decoder is None
        assert args.workers is None
        assert args.target == 0.01

    def test_detect_requires_snr(self):
        with pytest.raises(SystemExit):
            parse_args(["detect"])

    def test_compare_inputs(self):
        args = parse_args(["compare", "a.csv", "b.csv", "--summary", "s.txt"])
        assert args.inputs == [Path("a.csv"), Path("b.csv")]
        assert args.summary == Path("s.txt")

    def test_unknown_scheme_rejected(self):
        with pytest.raises(SystemExit):
            parse_args(["eval-ser", "--snr-grid", "0:1:1", "--scheme", "fsk"])


class TestBuildSetups:
    def test_one_setup_per_sf(self):
        args = parse_args(["eval-ser", "--snr-grid", "0:1:1", "--scheme", "lora", "--sf", "7,9"])
        assert [s.config_id for s in build_setups(args)] == ["SF-7@125000", "SF-9@125000"]

    def test_ostinato_repeats(self):
        args = parse_args(["eval-ser", "--snr-grid", "0:1:1", "--scheme", "ostinato",
                           "--repeats", "2,8"])
        assert [s.label for s in build_setups(args)] == ["K-2", "K-8"]

    def test_morph_range(self):
        args = parse_args(["eval-ser", "--snr-grid", "0:1:1", "--sf-set", "7,10"])
        (setup,) = build_setups(args)
        assert setup.config_id == "SH-[7,10]@125000"


class TestMain:
    def test_gen_dataset(self, tmp_path):
        out = tmp_path / "d.miq"
        code = main(["gen-dataset", "--sf-set", "7,10", "--count", "2", "-o", str(out), "--quiet"])
        assert code == EXIT_OK
        assert len(read_dataset(out)) == 8

    def test_eval_then_threshold(self, tmp_path):
        csv_path = tmp_path / "ser.csv"
        code = main([
            "eval-ser", "--scheme", "lora", "--sf", "7,8", "--snr-grid=-20,20",
            "--trials", "20", "--workers", "1", "--csv", str(csv_path), "--quiet",
        ])
        assert code == EXIT_OK
        assert [c.config for c in read_csv(csv_path)] == ["SF-7@125000", "SF-8@125000"]
        assert main(["snr-threshold", str(csv_path), "--quiet"]) == EXIT_OK

        summary = tmp_path / "summary.txt"
        assert main(["compare", str(csv_path), "--summary", str(summary), "--quiet"]) == EXIT_OK
        assert "SF-7@125000" in summary.read_text()

    def test_no_crossing_exit_code(self, tmp_path):
        csv_path = tmp_path / "ser.csv"
        assert main([
            "eval-ser", "--scheme", "lora", "--sf", "7", "--snr-grid", "10:20:10",
            "--trials", "10", "--workers", "1", "--csv", str(csv_path), "--quiet",
        ]) == EXIT_OK
        assert main(["snr-threshold", str(csv_path), "--quiet"]) == EXIT_NO_CROSSING

    def test_config_error_exit_code(self):
        code = main(["eval-ser", "--snr-grid", "0:1:1", "--sf-set", "8,12", "--quiet"])
        assert code == EXIT_CONFIG

    def test_neural_without_model(self):
        code = main(["eval-ser", "--snr-grid", "0:1:1", "--decoder", "neural", "--quiet"])
        assert code == EXIT_CONFIG

    def test_missing_file_exit_code(self, tmp_path):
        assert main(["snr-threshold", str(tmp_path / "missing.csv"), "--quiet"]) == EXIT_IO

    def test_corrupt_dataset_exit_code(self, tmp_path):
        bad = tmp_path / "bad.miq"
        bad.write_bytes(b"MORPHIQ1")
        assert main(["train", str(bad), "-o", str(tmp_path / "m.mnn"), "--quiet"]) == EXIT_IO

    def test_corrupt_model_exit_code(self, tmp_path):
        bad = tmp_path / "bad.mnn"
        bad.write_bytes(b"MORPHNN1\x05\x00\x00\x00{oops")
        code = main(["eval-ser", "--snr-grid", "0:1:1", "--decoder", "neural",
                     "--model", str(bad), "--quiet"])
        assert code == EXIT_IO
