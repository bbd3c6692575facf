"""Tests for STFT spectrogram features and augmentation."""

import numpy as np
import pytest
from scipy import stats

from morph_lab.codec import MorphFrameSpec, morph_symbol
from morph_lab.errors import ParameterError, ShapeError
from morph_lab.features import (
    Spectrogram,
    augment,
    draw_augmentation,
    stft_features,
    stft_hop,
)
from morph_lab.phy import IqBuffer


class TestStftFeatures:
    def test_default_shape(self):
        spec = stft_features(morph_symbol(0, MorphFrameSpec()))
        assert spec.data.shape == (2, 64, 129)
        assert spec.data.dtype == np.float32

    def test_small_symbol_shape(self):
        sym = morph_symbol(3, MorphFrameSpec(sf_set=(7, 8, 9, 10)))
        assert stft_features(sym).data.shape == (2, 64, 129)

    def test_rms_normalised(self):
        spec = stft_features(morph_symbol(1, MorphFrameSpec()))
        assert np.sqrt(np.mean(spec.data.astype(np.float64) ** 2)) == pytest.approx(1.0, rel=1e-5)

    def test_energy_preserved_without_normalisation(self):
        sym = IqBuffer(np.exp(1j * np.linspace(0, 40, 256)), 125e3)
        spec = stft_features(sym, f_bins=8, t_frames=33, normalize=False)
        hop = stft_hop(256, 33)
        padded = np.concatenate((np.zeros(4), sym.samples, np.zeros(4)))
        frame_energy = sum(np.sum(np.abs(padded[k * hop:k * hop + 8]) ** 2) for k in range(33))
        assert np.sum(spec.data.astype(np.float64) ** 2) == pytest.approx(frame_energy, rel=1e-5)

    def test_zero_input_stays_zero(self):
        spec = stft_features(IqBuffer(np.zeros(4096), 125e3))
        assert not spec.data.any()

    def test_tone_lands_in_one_bin(self):
        n = np.arange(4096)
        tone = IqBuffer(np.exp(2j * np.pi * 8 * n / 64), 125e3)
        mag = stft_features(tone).magnitude
        # fftshift puts DC at row 32, so +8 cycles/frame sits at row 40
        assert np.argmax(mag[:, 64]) == 40

    def test_non_integral_hop(self):
        with pytest.raises(ParameterError, match="integral hop"):
            stft_features(IqBuffer(np.ones(1000), 125e3))

    def test_bad_window(self):
        with pytest.raises(ParameterError):
            stft_features(IqBuffer(np.ones(4096), 125e3), f_bins=63)


class TestSpectrogram:
    def test_shape_check(self):
        with pytest.raises(ShapeError):
            Spectrogram(np.zeros((3, 4, 5), dtype=np.float32))

    def test_non_finite(self):
        data = np.zeros((2, 4, 5), dtype=np.float32)
        data[0, 0, 0] = np.nan
        with pytest.raises(ParameterError):
            Spectrogram(data)


class TestAugment:
    def test_deterministic(self):
        sym = morph_symbol(2, MorphFrameSpec())
        a = augment(sym, (-20.0, 0.0), 7)
        b = augment(sym, (-20.0, 0.0), 7)
        assert np.array_equal(a.samples, b.samples)

    def test_high_snr_is_phase_rotation(self):
        sym = morph_symbol(1, MorphFrameSpec())
        out = augment(sym, (80.0, 80.0), 3)
        ratio = out.samples / sym.samples
        assert np.allclose(np.abs(ratio), 1.0, atol=1e-3)
        assert np.allclose(ratio, ratio[0], atol=1e-3)

    def test_snr_draws_uniform(self):
        rng = np.random.default_rng(0)
        draws = np.array([draw_augmentation(rng, (-50.0, 20.0)).snr_db for _ in range(10_000)])
        assert draws.min() >= -50.0 and draws.max() <= 20.0
        hist, _ = np.histogram(draws, bins=7, range=(-50.0, 20.0))
        assert np.all(np.abs(hist - 10_000 / 7) < 5 * np.sqrt(10_000 / 7))

    def test_phase_draws_cover_circle(self):
        rng = np.random.default_rng(1)
        phases = np.array([draw_augmentation(rng, (0.0, 0.0)).phase_rad for _ in range(2000)])
        assert phases.min() >= 0.0 and phases.max() < 2 * np.pi
        assert abs(np.mean(np.exp(1j * phases))) < 0.1

    def test_phase_draws_pass_chi_square(self):
        rng = np.random.default_rng(5)
        phases = np.array([draw_augmentation(rng, (-40.0, 0.0)).phase_rad for _ in range(8000)])
        hist, _ = np.histogram(phases, bins=16, range=(0.0, 2 * np.pi))
        assert stats.chisquare(hist).pvalue > 1e-3

    def test_fixed_snr(self):
        p = draw_augmentation(np.random.default_rng(2), (-10.0, -10.0))
        assert p.snr_db == -10.0

    def test_inverted_range(self):
        with pytest.raises(ParameterError):
            draw_augmentation(np.random.default_rng(0), (0.0, -10.0))
