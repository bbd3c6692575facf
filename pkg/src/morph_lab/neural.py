"""Mask-then-classify neural decoder: model, training, pruning, gradient check.

Four convolutional modules produce a [0, 1] mask over the input spectrogram;
the masked spectrogram goes through a strided convolution, a bidirectional
GRU over time, and a dense layer emitting one logit per 2-bit class.
"""

from __future__ import annotations

import copy
import hashlib
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.utils.data import DataLoader, Dataset

from morph_lab.config import TrainConfig
from morph_lab.errors import DatasetError, ParameterError, ShapeError
from morph_lab.features import Spectrogram, augment, stft_features
from morph_lab.output import log
from morph_lab.phy import IqBuffer

PARAM_BUDGET = 2_300_000
N_CLASSES = 4


@dataclass(frozen=True)
class ModelSpec:
    """Layer sizes of the decoder; the defaults stay under the 2.3M budget."""

    f_bins: int = 64
    t_frames: int = 129
    mask_channels: tuple[int, ...] = (8, 16, 16)
    kernel: int = 3
    classifier_channels: int = 32
    classifier_stride: int = 2
    hidden: int = 128
    n_classes: int = N_CLASSES
    activation: str = "relu"
    param_budget: int = PARAM_BUDGET

    def __post_init__(self) -> None:
        object.__setattr__(self, "mask_channels", tuple(self.mask_channels))
        if self.activation not in _ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")
        if self.kernel % 2 == 0:
            raise ParameterError(f"kernel must be odd, got {self.kernel}")

    @classmethod
    def reduced(cls) -> ModelSpec:
        """A few-thousand-parameter variant with smooth activations for gradient checks."""
        return cls(
            f_bins=8,
            t_frames=9,
            mask_channels=(4, 4, 4),
            classifier_channels=4,
            hidden=8,
            activation="silu",
        )

    @property
    def mask_convs(self) -> list[tuple[int, int, int]]:
        chans = (2, *self.mask_channels, 2)
        return [(chans[i], chans[i + 1], self.kernel) for i in range(len(chans) - 1)]

    @property
    def sequence_shape(self) -> tuple[int, int]:
        """(time steps, features per step) entering the recurrent stage."""

        def out(n: int) -> int:
            pad = self.kernel // 2
            return (n + 2 * pad - self.kernel) // self.classifier_stride + 1

        return out(self.t_frames), self.classifier_channels * out(self.f_bins)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mask_channels"] = list(self.mask_channels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ModelSpec:
        d = dict(d)
        d["mask_channels"] = tuple(d["mask_channels"])
        return cls(**d)


_ACTIVATIONS = {"relu": nn.ReLU, "silu": nn.SiLU}


def _conv_block(c_in: int, c_out: int, kernel: int, stride: int, act: str) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(c_in, c_out, kernel, stride=stride, padding=kernel // 2),
        nn.BatchNorm2d(c_out),
        _ACTIVATIONS[act](),
    )


class MorphNet(nn.Module):
    def __init__(self, spec: ModelSpec) -> None:
        super().__init__()
        self.spec = spec
        convs = spec.mask_convs
        self.mask_net = nn.Sequential(
            *[_conv_block(i, o, k, 1, spec.activation) for i, o, k in convs[:-1]],
            nn.Conv2d(*convs[-1][:2], convs[-1][2], padding=spec.kernel // 2),
            nn.Sigmoid(),
        )
        self.classifier_conv = _conv_block(
            2, spec.classifier_channels, spec.kernel, spec.classifier_stride, spec.activation
        )
        _, features = spec.sequence_shape
        self.gru = nn.GRU(features, spec.hidden, batch_first=True, bidirectional=True)
        self.dense = nn.Linear(2 * spec.hidden, spec.n_classes)

        n_params = count_parameters(self)
        if n_params > spec.param_budget:
            raise ParameterError(
                f"model has {n_params} parameters, budget is {spec.param_budget}"
            )

    def mask(self, x: torch.Tensor) -> torch.Tensor:
        return self.mask_net(x)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = self.classifier_conv(x * self.mask(x))
        b, c, f, t = h.shape
        seq = h.permute(0, 3, 1, 2).reshape(b, t, c * f)
        _, h_n = self.gru(seq)
        return self.dense(torch.cat((h_n[0], h_n[1]), dim=1))


@dataclass
class Checkpoint:
    """Model spec, float32 parameters in state-dict order, and training metadata."""

    model_spec: ModelSpec
    state: dict[str, np.ndarray]
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_model(cls, model: MorphNet, metadata: Optional[dict] = None) -> Checkpoint:
        state = {
            name: t.detach().cpu().numpy().astype(np.float32)
            for name, t in model.state_dict().items()
            if t.is_floating_point()
        }
        return cls(model.spec, state, dict(metadata or {}))

    def build(self) -> MorphNet:
        """Instantiate the model in eval mode with the stored parameters."""
        model = MorphNet(self.model_spec)
        tensors = {k: torch.from_numpy(np.array(v)) for k, v in self.state.items()}
        result = model.load_state_dict(tensors, strict=False)
        missing = [k for k in result.missing_keys if not k.endswith("num_batches_tracked")]
        if missing or result.unexpected_keys:
            raise ShapeError(
                f"checkpoint does not match its model spec "
                f"(missing={missing}, unexpected={result.unexpected_keys})"
            )
        return model.eval()


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters() if p.requires_grad)


def parameter_breakdown(model: MorphNet) -> dict[str, int]:
    """Trainable parameters per stage, plus their total."""
    parts = {
        "mask_net": model.mask_net,
        "classifier_conv": model.classifier_conv,
        "gru": model.gru,
        "dense": model.dense,
    }
    counts = {name: count_parameters(m) for name, m in parts.items()}
    counts["total"] = sum(counts.values())
    return counts


def parameter_summary(model: MorphNet) -> str:
    counts = parameter_breakdown(model)
    stages = " ".join(f"{k}={v}" for k, v in counts.items() if k != "total")
    return f"{counts['total']} parameters ({stages}), budget {model.spec.param_budget}"


def build_model(spec: Optional[ModelSpec] = None, seed: int = 0) -> MorphNet:
    torch.manual_seed(seed)
    return MorphNet(spec or ModelSpec())


def _check_input(model: MorphNet, x: torch.Tensor) -> None:
    want = (2, model.spec.f_bins, model.spec.t_frames)
    if tuple(x.shape[1:]) != want:
        raise ShapeError(f"model expects inputs of shape {want}, got {tuple(x.shape[1:])}")


def forward(model: MorphNet, spec: Spectrogram) -> np.ndarray:
    """Logits for one spectrogram (inference mode)."""
    dtype = next(model.parameters()).dtype
    x = torch.from_numpy(spec.data).to(dtype).unsqueeze(0)
    _check_input(model, x)
    model.eval()
    with torch.no_grad():
        return model(x)[0].cpu().numpy()


class NeuralDecoder:
    """Classifies chip-rate symbol windows through ``stft_features`` and a model."""

    def __init__(self, model: MorphNet, batch_size: int = 256) -> None:
        self.model = model.eval()
        self.batch_size = batch_size

    def features(self, symbols: Sequence[IqBuffer]) -> torch.Tensor:
        spec = self.model.spec
        arr = np.stack([stft_features(s, spec.f_bins, spec.t_frames).data for s in symbols])
        return torch.from_numpy(arr).to(next(self.model.parameters()).dtype)

    def decode_batch(self, symbols: Sequence[IqBuffer]) -> np.ndarray:
        labels: list[np.ndarray] = []
        with torch.no_grad():
            for i in range(0, len(symbols), self.batch_size):
                x = self.features(symbols[i:i + self.batch_size])
                _check_input(self.model, x)
                labels.append(self.model(x).argmax(dim=1).cpu().numpy())
        if not labels:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(labels)


@dataclass
class LabeledSymbols:
    """Clean training symbols with their 2-bit labels."""

    symbols: list[IqBuffer]
    labels: np.ndarray
    meta: dict = field(default_factory=dict)

    def digest(self) -> str:
        h = hashlib.sha256()
        for sym, label in zip(self.symbols, self.labels):
            h.update(int(label).to_bytes(1, "little"))
            h.update(sym.samples.astype(np.complex64).tobytes())
        return h.hexdigest()

    def split(self, val_fraction: float, seed: int) -> tuple[LabeledSymbols, LabeledSymbols]:
        """Stratified split made before any augmentation."""
        rng = np.random.default_rng(seed)
        train_idx: list[int] = []
        val_idx: list[int] = []
        for c in np.unique(self.labels):
            idx = np.flatnonzero(self.labels == c)
            rng.shuffle(idx)
            n_val = int(round(len(idx) * val_fraction))
            if len(idx) > 1:
                n_val = min(max(n_val, 1 if val_fraction > 0 else 0), len(idx) - 1)
            val_idx.extend(idx[:n_val].tolist())
            train_idx.extend(idx[n_val:].tolist())

        def take(ids: list[int]) -> LabeledSymbols:
            ids = sorted(ids)
            return LabeledSymbols([self.symbols[i] for i in ids], self.labels[ids], self.meta)

        return take(train_idx), take(val_idx)


class AugmentedSpectrograms(Dataset):
    """``augmentations`` phase/SNR-augmented copies of each clean symbol.

    Item seeds derive from (seed, epoch, index), so every epoch draws fresh
    augmentations while staying reproducible.
    """

    def __init__(
        self,
        data: LabeledSymbols,
        augmentations: int,
        snr_range: tuple[float, float],
        seed: int,
        model_spec: ModelSpec,
    ) -> None:
        self.data = data
        self.augmentations = augmentations
        self.snr_range = snr_range
        self.seed = seed
        self.model_spec = model_spec
        self.epoch = 0

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def __len__(self) -> int:
        return len(self.data.symbols) * self.augmentations

    def __getitem__(self, i: int) -> tuple[torch.Tensor, int]:
        sym_idx = i // self.augmentations
        seed = int(np.random.SeedSequence([self.seed, self.epoch, i]).generate_state(1)[0])
        noisy = augment(self.data.symbols[sym_idx], self.snr_range, seed)
        feats = stft_features(noisy, self.model_spec.f_bins, self.model_spec.t_frames)
        return torch.from_numpy(feats.data), int(self.data.labels[sym_idx])


def accuracy(model: MorphNet, data: LabeledSymbols) -> float:
    if len(data.symbols) == 0:
        return float("nan")
    pred = NeuralDecoder(model).decode_batch(data.symbols)
    return float(np.mean(pred == data.labels))


def train(
    data: LabeledSymbols, cfg: TrainConfig, model_spec: Optional[ModelSpec] = None
) -> Checkpoint:
    """Train from scratch with Adam and cross-entropy."""
    model_spec = model_spec or ModelSpec()
    n_classes = model_spec.n_classes
    counts = np.bincount(np.asarray(data.labels, dtype=np.int64), minlength=n_classes)
    empty = [c for c in range(n_classes) if counts[c] == 0]
    if empty:
        raise DatasetError(f"no symbols for class(es) {empty}")
    if counts.min() < 20:
        log(f"[train] WARNING: only {counts.min()} clean symbols in the smallest class")

    torch.use_deterministic_algorithms(True, warn_only=True)
    train_set, val_set = data.split(cfg.val_fraction, cfg.seed)
    model = build_model(model_spec, cfg.seed)
    log(f"[train] model: {parameter_summary(model)}")
    ds = AugmentedSpectrograms(train_set, cfg.augmentations, cfg.snr_range, cfg.seed, model_spec)
    gen = torch.Generator().manual_seed(cfg.seed)
    loader = DataLoader(
        ds, batch_size=cfg.batch_size, shuffle=True, generator=gen, num_workers=cfg.workers
    )
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)

    history: list[float] = []
    train_acc = 0.0
    for epoch in range(cfg.epochs):
        ds.set_epoch(epoch)
        model.train()
        total_loss, correct, seen = 0.0, 0, 0
        for x, y in loader:
            opt.zero_grad()
            logits = model(x)
            loss = F.cross_entropy(logits, y)
            loss.backward()
            opt.step()
            total_loss += loss.item() * len(y)
            correct += int((logits.argmax(dim=1) == y).sum())
            seen += len(y)
        history.append(total_loss / max(seen, 1))
        train_acc = correct / max(seen, 1)
        val_acc = accuracy(model, val_set)
        log(
            f"[train] epoch {epoch + 1:>3}/{cfg.epochs} loss={history[-1]:.4f} "
            f"train_acc={train_acc:.4f} val_acc={val_acc:.4f}"
        )

    meta = {
        "seed": cfg.seed,
        "epochs": cfg.epochs,
        "batch_size": cfg.batch_size,
        "lr": cfg.lr,
        "augmentations": cfg.augmentations,
        "snr_range": list(cfg.snr_range),
        "dataset_digest": data.digest(),
        "loss_history": history,
        "train_accuracy": train_acc,
        "val_accuracy": accuracy(model, val_set),
        **{k: v for k, v in data.meta.items() if k in ("scheme", "sf_set", "bw")},
    }
    return Checkpoint.from_model(model.eval(), meta)


def prune_dense(model: MorphNet, keep_fraction: float) -> MorphNet:
    """Copy of ``model`` keeping the ceil(keep_fraction * n) largest |w| per dense layer."""
    if not 0.0 < keep_fraction <= 1.0:
        raise ParameterError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    pruned = copy.deepcopy(model)
    with torch.no_grad():
        for layer in pruned.modules():
            if not isinstance(layer, nn.Linear):
                continue
            w = layer.weight.view(-1)
            keep = math.ceil(keep_fraction * w.numel())
            order = torch.argsort(w.abs(), descending=True, stable=True)
            mask = torch.zeros_like(w, dtype=torch.bool)
            mask[order[:keep]] = True
            w[~mask] = 0.0
    return pruned


def dense_nonzeros(model: nn.Module) -> list[int]:
    return [
        int(torch.count_nonzero(m.weight))
        for m in model.modules()
        if isinstance(m, nn.Linear)
    ]


def loss_gradient(model: MorphNet, x: torch.Tensor, y: torch.Tensor) -> np.ndarray:
    """Flat gradient of the summed batch cross-entropy (eval-mode normalisation)."""
    model.eval()
    model.zero_grad()
    F.cross_entropy(model(x), y, reduction="sum").backward()
    return torch.cat([p.grad.reshape(-1) for p in model.parameters()]).detach().cpu().numpy()


def grad_check(
    model: MorphNet,
    x: torch.Tensor,
    y: torch.Tensor,
    *,
    h: float = 1e-5,
    num_checks: int = 20,
    seed: int = 0,
    floor: float = 1e-6,
) -> float:
    """Max relative error between backprop and central differences.

    Up to ``num_checks`` random entries of every parameter tensor are
    perturbed by +-h on a double-precision copy; ``model`` is left untouched.
    """
    model = copy.deepcopy(model).double().eval()
    x = x.double()
    _check_input(model, x)
    analytic = loss_gradient(model, x, y)
    rng = np.random.default_rng(seed)

    def loss() -> float:
        with torch.no_grad():
            return float(F.cross_entropy(model(x), y, reduction="sum"))

    worst, offset = 0.0, 0
    for p in model.parameters():
        flat = p.data.view(-1)
        n = flat.numel()
        picks = rng.choice(n, size=min(num_checks, n), replace=False)
        for j in picks:
            old = float(flat[j])
            flat[j] = old + h
            plus = loss()
            flat[j] = old - h
            minus = loss()
            flat[j] = old
            numeric = (plus - minus) / (2 * h)
            a = float(analytic[offset + j])
            worst = max(worst, abs(numeric - a) / max(floor, abs(numeric) + abs(a)))
        offset += n
    return worst
