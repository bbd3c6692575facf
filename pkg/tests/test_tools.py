"""Tests for argument parsing helpers and text file I/O."""

import pytest

from morph_lab.errors import ConfigurationError, DatasetIOError
from morph_lab.tools import parse_int_list, parse_sf_set, parse_snr_grid, read_text, write_text


class TestParseSfSet:
    def test_range_endpoints(self):
        assert parse_sf_set("9,12") == (9, 10, 11, 12)

    def test_explicit(self):
        assert parse_sf_set("7,8,9,10") == (7, 8, 9, 10)

    @pytest.mark.parametrize("text", ["9,11", "7,9,10,11", "12", "a,b"])
    def test_rejects(self, text):
        with pytest.raises(ConfigurationError):
            parse_sf_set(text)


class TestParseIntList:
    def test_ignores_blanks(self):
        assert parse_int_list("2, 4,,8") == [2, 4, 8]


class TestParseSnrGrid:
    def test_inclusive_range(self):
        grid = parse_snr_grid("-30:-16:1")
        assert grid[0] == -30.0 and grid[-1] == -16.0
        assert len(grid) == 15

    def test_fractional_step_is_rounded(self):
        assert parse_snr_grid("-1:0:0.1")[3] == -0.7
        assert len(parse_snr_grid("-1:0:0.1")) == 11

    def test_list(self):
        assert parse_snr_grid("-20,-10,0") == (-20.0, -10.0, 0.0)

    @pytest.mark.parametrize("text", ["0:-5:1", "0:5:0", "a:b:c", "1:2"])
    def test_rejects(self, text):
        with pytest.raises(ConfigurationError):
            parse_snr_grid(text)


class TestTextIo:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "a" / "b.txt"
        write_text(path, "héllo\n")
        assert read_text(path) == "héllo\n"

    def test_missing(self, tmp_path):
        with pytest.raises(DatasetIOError, match="nope"):
            read_text(tmp_path / "nope.txt")
