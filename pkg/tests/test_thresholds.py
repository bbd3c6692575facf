"""Long-run SNR threshold comparisons across decoders and baselines.

Every test here is marked slow: the sweeps use 2000 symbols per SNR point
and the neural decoders are trained at full size (20 clean symbols per
class, 200 augmentations, 30 epochs).
"""

import numpy as np
import pytest

from morph_lab.codec import SF_SET_CHOICES, MorphFrameSpec
from morph_lab.config import SweepConfig, TrainConfig
from morph_lab.dataset import SnrPolicy, gen_dataset
from morph_lab.harness import SchemeSetup, make_setup, run_block, run_ser_sweep, snr_threshold
from morph_lab.neural import MorphNet, NeuralDecoder, prune_dense, train
from morph_lab.output import log, set_quiet
from morph_lab.phy import IqBuffer

pytestmark = pytest.mark.slow

TRIALS = 2000
STEP_DB = 0.5


@pytest.fixture(scope="module", autouse=True)
def _quiet():
    previous = set_quiet(True)
    yield
    set_quiet(previous)


def _train(scheme: str):
    data = gen_dataset(scheme, MorphFrameSpec(), 20, SnrPolicy(), None, seed=0).to_labeled()
    return train(data, TrainConfig())


@pytest.fixture(scope="module")
def morph_ckpt():
    return _train("morph")


@pytest.fixture(scope="module")
def morph_model(morph_ckpt) -> MorphNet:
    return morph_ckpt.build()


@pytest.fixture(scope="module")
def ifo2_model() -> MorphNet:
    return _train("ifo2").build()


_THRESHOLDS: dict[tuple[str, str], float] = {}


def _threshold(setup: SchemeSetup, lo: float, hi: float) -> float:
    key = (setup.scheme_id, setup.config_id)
    if key not in _THRESHOLDS:
        grid = tuple(round(float(s), 2) for s in np.arange(lo, hi + 1e-9, STEP_DB))
        cfg = SweepConfig(snr_grid=grid, trials=TRIALS, seed=1)
        _THRESHOLDS[key] = snr_threshold(run_ser_sweep(setup, cfg)).threshold_db
    return _THRESHOLDS[key]


def _lora(sf: int) -> float:
    centre = -22.4 + 2.5 * (12 - sf)
    return _threshold(make_setup("lora", sf=sf), centre - 6.0, centre + 6.0)


def _cor() -> float:
    return _threshold(make_setup("morph", "cor"), -32.0, -14.0)


def _morph_neural(model: MorphNet) -> float:
    return _threshold(make_setup("morph", "neural", model=model), -36.0, -16.0)


class TestDechirpLadder:
    def test_sf12_threshold(self):
        assert abs(_lora(12) - (-22.4)) <= 1.5

    def test_each_sf_step(self):
        ladder = [_lora(sf) for sf in range(7, 13)]
        gaps = np.diff(ladder)
        assert np.all((-gaps >= 2.0) & (-gaps <= 5.0)), ladder


class TestCor:
    @pytest.mark.parametrize("sf_set", SF_SET_CHOICES)
    def test_clean_symbols_decode(self, sf_set):
        setup = make_setup("morph", "cor", sf_set=sf_set)
        assert run_block(setup, 300.0, 10_000, seed=3) == 0

    def test_not_worse_than_dechirp(self):
        assert _cor() <= _lora(12) + 1.0


class TestNeuralDecoder:
    def test_training_loss(self, morph_ckpt):
        history = morph_ckpt.metadata["loss_history"]
        assert np.all(np.isfinite(history))
        assert history[4] < history[0]

    def test_held_out_clean_accuracy(self, morph_ckpt):
        assert morph_ckpt.metadata["val_accuracy"] >= 0.99

    def test_phase_rotation_invariant(self, morph_model):
        setup = make_setup("morph")
        clean = [setup.encode(v) for v in range(4)]
        decoder = NeuralDecoder(morph_model)
        base = np.mean(decoder.decode_batch(clean) == np.arange(4))
        rng = np.random.default_rng(6)
        rotated, labels = [], []
        for _ in range(100):
            for v, sym in enumerate(clean):
                turn = np.exp(1j * rng.uniform(0.0, 2 * np.pi))
                rotated.append(IqBuffer(sym.samples * turn, sym.fs))
                labels.append(v)
        spun = np.mean(decoder.decode_batch(rotated) == np.array(labels))
        assert abs(spun - base) <= 0.01

    def test_beats_cor_and_dechirp(self, morph_model):
        neural = _morph_neural(morph_model)
        log(f"[thresholds] neural {neural:.1f} dB, Cor gap {_cor() - neural:.1f} dB")
        assert neural < _cor()
        assert neural < _lora(12)

    def test_dense_pruning_keeps_accuracy(self, morph_model):
        full = make_setup("morph", "neural", model=morph_model)
        pruned = make_setup("morph", "neural", model=prune_dense(morph_model, 0.5))
        n = 2000
        delta = run_block(pruned, -20.0, n, seed=9) - run_block(full, -20.0, n, seed=9)
        assert abs(delta) / n <= 0.01


class TestBaselines:
    def test_ostinato_repeats_order(self):
        k = {r: _threshold(make_setup("ostinato", repeats=r), -38.0, -16.0) for r in (2, 4, 8)}
        assert k[8] < k[4] < k[2]

    def test_morph_matches_ostinato4(self, morph_model):
        ostinato4 = _threshold(make_setup("ostinato", repeats=4), -38.0, -16.0)
        assert _morph_neural(morph_model) <= ostinato4 + 0.5

    def test_morph_matches_ifo2_neural(self, morph_model, ifo2_model):
        ifo2 = _threshold(make_setup("ifo2", "neural", sf=12, model=ifo2_model), -36.0, -14.0)
        assert _morph_neural(morph_model) <= ifo2 + 0.5
