"""Cross-entropy, Adam and the epoch loop."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .archspec import AccessibilityReport, analyze_accessibility, parse_wiring
from .data import Dataset
from .diffengine import CE_CLAMP
from .errors import BadDistribution, ConfigMismatch
from .network import ResQuNN

CSV_HEADER = "epoch,train_loss,train_acc,val_loss,val_acc"


@dataclass
class TrainConfig:
    wiring: str = "none"
    n_layers: int = 2
    depths: Optional[tuple] = None
    postprocessing: str = "classical"
    classes: tuple = tuple(range(10))
    samples_per_class: int = 200
    split: float = 0.8
    epochs: int = 30
    batch_size: int = 16
    learning_rate: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    trainable_quanv: bool = True
    channel_mode: str = "single"
    angle_scale: float = math.pi

    def __post_init__(self):
        self.classes = tuple(int(c) for c in self.classes)
        if self.depths is not None:
            self.depths = tuple(int(d) for d in self.depths)
        if self.learning_rate <= 0:
            raise ConfigMismatch("learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigMismatch("batch_size must be at least 1")
        if self.postprocessing == "quantum" and len(self.classes) != 4:
            raise ConfigMismatch("quantum postprocessing needs exactly 4 classes")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["classes"] = list(self.classes)
        d["depths"] = list(self.depths) if self.depths is not None else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class AdamMoments:
    m: np.ndarray
    v: np.ndarray
    t: int = 0


@dataclass
class TrainState:
    moments: dict = field(default_factory=dict)
    history: list = field(default_factory=list)
    epoch: int = 0
    step: int = 0


def cross_entropy(pred, label: int) -> float:
    """-log pred[label] for a one-hot target; ``pred`` must be a distribution."""
    pred = np.asarray(pred, dtype=float)
    if np.any(pred < 0) or abs(pred.sum() - 1.0) > 1e-6:
        raise BadDistribution("prediction is not a probability vector")
    return float(-np.log(max(pred[label], CE_CLAMP)))


def adam_step(state: TrainState, params: Sequence, lr: float,
              betas=(0.9, 0.999), eps: float = 1e-8) -> None:
    """Bias-corrected Adam on every trainable ParamSet that holds a gradient."""
    b1, b2 = betas
    for p in params:
        if p.grad is None or not p.trainable:
            continue
        mom = state.moments.get(p.name)
        if mom is None:
            mom = state.moments[p.name] = AdamMoments(np.zeros_like(p.values), np.zeros_like(p.values))
        g = p.grad
        mom.t += 1
        mom.m = b1 * mom.m + (1 - b1) * g
        mom.v = b2 * mom.v + (1 - b2) * g * g
        m_hat = mom.m / (1 - b1**mom.t)
        v_hat = mom.v / (1 - b2**mom.t)
        p.values = p.values - lr * m_hat / (np.sqrt(v_hat) + eps)
    state.step += 1


def build_model(config: TrainConfig, input_shape=(28, 28, 1)) -> ResQuNN:
    model = ResQuNN(
        parse_wiring(config.wiring, config.n_layers),
        depths=config.depths,
        postprocessing=config.postprocessing,
        n_classes=len(config.classes),
        input_shape=input_shape,
        channel_mode=config.channel_mode,
        input_angle_scale=config.angle_scale,
        seed=config.seed,
    )
    for p in model.quanv_params():
        p.trainable = config.trainable_quanv
    return model


def evaluate(model: ResQuNN, data: Dataset, chunk: int = 64) -> tuple:
    """Mean cross-entropy and accuracy (argmax, lowest index on ties)."""
    if len(data) == 0:
        return float("nan"), float("nan")
    targets = data.targets
    total, correct = 0.0, 0
    for start in range(0, len(data), chunk):
        sl = slice(start, start + chunk)
        tape = model.loss_tape(data.images[sl], targets[sl])
        n = len(targets[sl])
        total += float(tape.values["loss"]) * n
        correct += int(np.sum(np.argmax(tape.values["scores"], axis=-1) == targets[sl]))
    return total / len(data), correct / len(data)


@dataclass
class TrainResult:
    history: list
    params: dict
    report: AccessibilityReport
    config: TrainConfig
    state: TrainState
    model: ResQuNN = field(repr=False)


def run_training(config: TrainConfig, train: Dataset, val: Dataset,
                 progress: Optional[Callable[[dict], None]] = None) -> TrainResult:
    """Train for ``config.epochs`` epochs.

    ``history[0]`` (epoch 0) evaluates the untrained model; each later row has
    the running train loss/accuracy over that epoch's batches and the
    validation metrics after it.
    """
    if config.postprocessing == "quantum" and len(config.classes) != 4:
        raise ConfigMismatch("quantum postprocessing needs exactly 4 classes")
    for d in (train, val):
        if tuple(d.class_list) != tuple(config.classes):
            raise ConfigMismatch(f"dataset classes {d.class_list} differ from config {config.classes}")
    model = build_model(config, train.images.shape[1:])
    report = analyze_accessibility(model.wiring)
    state = TrainState()

    tl, ta = evaluate(model, train)
    vl, va = evaluate(model, val)
    state.history.append(dict(epoch=0, train_loss=tl, train_acc=ta, val_loss=vl, val_acc=va))
    if progress:
        progress(state.history[-1])

    targets = train.targets
    n = len(train)
    params = model.parameters()
    for epoch in range(1, config.epochs + 1):
        order = np.random.default_rng([config.seed, epoch]).permutation(n)
        loss_sum, correct = 0.0, 0
        for start in range(0, n, config.batch_size):
            idx = order[start: start + config.batch_size]
            loss, _, tape = model.loss_and_grads(train.images[idx], targets[idx])
            loss_sum += loss * len(idx)
            correct += int(np.sum(np.argmax(tape.values["scores"], axis=-1) == targets[idx]))
            adam_step(state, params, config.learning_rate, (config.beta1, config.beta2), config.eps)
        vl, va = evaluate(model, val)
        state.epoch = epoch
        state.history.append(
            dict(epoch=epoch, train_loss=loss_sum / n, train_acc=correct / n, val_loss=vl, val_acc=va)
        )
        if progress:
            progress(state.history[-1])
    return TrainResult(state.history, model.get_state(), report, config, state, model)


def metrics_csv(history: list) -> str:
    lines = [CSV_HEADER]
    for row in history:
        lines.append(
            f"{row['epoch']},{row['train_loss']:.6f},{row['train_acc']:.6f},"
            f"{row['val_loss']:.6f},{row['val_acc']:.6f}"
        )
    return "\n".join(lines) + "\n"


def write_metrics_csv(history: list, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(metrics_csv(history))
