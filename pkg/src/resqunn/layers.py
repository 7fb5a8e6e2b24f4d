"""Forward passes: quanvolution, zero-padded residual sums, dense softmax and
the 10-qubit quantum postprocessor.

Feature maps are plain arrays laid out ``(..., height, width, channels)``;
leading axes are a batch. Flattening for the heads is row-major over
``(h, w, c)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import qsim
from ._patchsim import patch_expvals
from .diffengine import ParamSet
from .errors import ChannelMismatch, DimensionNotDivisible, LengthMismatch

ChannelMode = Literal["single", "multi"]


@dataclass
class QuanvLayer:
    """2x2 / stride-2 quanvolution on 4 qubits with ``depth`` re-uploading repetitions."""

    depth: int
    theta: ParamSet
    angle_scale: float = 1.0
    kernel: int = field(default=2, init=False)
    stride: int = field(default=2, init=False)
    n_qubits: int = field(default=4, init=False)

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth must be positive")
        if self.theta.values.size != self.depth * self.n_qubits:
            raise LengthMismatch(
                f"theta needs {self.depth * self.n_qubits} angles, got {self.theta.values.size}"
            )

    @classmethod
    def create(cls, name: str, depth: int, rng: np.random.Generator, angle_scale: float = 1.0):
        values = rng.uniform(0.0, 2 * np.pi, size=depth * 4)
        return cls(depth, ParamSet(name, values, owner=name), angle_scale)

    @property
    def theta_matrix(self) -> np.ndarray:
        return self.theta.values.reshape(self.depth, self.n_qubits)


@dataclass
class DenseSoftmax:
    in_features: int
    out_classes: int
    weight: ParamSet
    bias: ParamSet

    @classmethod
    def create(cls, in_features: int, out_classes: int, rng: np.random.Generator, name="dense"):
        bound = 1.0 / math.sqrt(in_features)
        w = rng.uniform(-bound, bound, size=out_classes * in_features)
        b = rng.uniform(-bound, bound, size=out_classes)
        return cls(
            in_features,
            out_classes,
            ParamSet(f"{name}.weight", w, owner=name),
            ParamSet(f"{name}.bias", b, owner=name),
        )

    @property
    def W(self) -> np.ndarray:
        return self.weight.values.reshape(self.out_classes, self.in_features)


@dataclass
class QuantumPostprocessor:
    theta: ParamSet
    n_qubits: int = 10
    measured_qubits: tuple = (0, 1, 2, 3)

    @classmethod
    def create(cls, rng: np.random.Generator, n_qubits: int = 10, n_measured: int = 4, name="qpost"):
        values = rng.uniform(0.0, 2 * np.pi, size=n_qubits)
        return cls(ParamSet(name, values, owner=name), n_qubits, tuple(range(n_measured)))


# ---------------------------------------------------------------------------
# quanvolution


def quanv_patch(patch, layer: QuanvLayer) -> np.ndarray:
    """Reference gate-by-gate simulation of one patch (angles already scaled)."""
    patch = np.asarray(patch, dtype=float)
    theta = layer.theta_matrix
    state = qsim.new_zero_state(layer.n_qubits)
    for rep in range(layer.depth):
        for q in range(layer.n_qubits):
            state = qsim.apply_ry(state, q, patch[q])
        for q in range(layer.n_qubits):
            state = qsim.apply_rx(state, q, theta[rep, q])
        for q in range(layer.n_qubits - 1):
            state = qsim.apply_cnot(state, q, q + 1)
    return np.array([qsim.expectation_z(state, q) for q in range(layer.n_qubits)])


def extract_patches(fmap: np.ndarray, kernel: int = 2, stride: int = 2) -> np.ndarray:
    """``(..., H, W, 1)`` -> ``(..., H/2, W/2, 4)``; window pixels in row-major order."""
    *lead, h, w, c = fmap.shape
    if c != 1:
        raise ChannelMismatch(f"quanvolution expects a single input channel, got {c}")
    if h % stride or w % stride:
        raise DimensionNotDivisible(f"{h}x{w} input is not divisible by stride {stride}")
    x = fmap.reshape(*lead, h // kernel, kernel, w // kernel, kernel)
    x = np.moveaxis(x, -3, -2)
    return x.reshape(*lead, h // kernel, w // kernel, kernel * kernel)


def quanv_angles(fmap: np.ndarray, layer: QuanvLayer) -> np.ndarray:
    return extract_patches(fmap, layer.kernel, layer.stride) * layer.angle_scale


def reduce_channels(expvals: np.ndarray, channel_mode: ChannelMode) -> np.ndarray:
    if channel_mode == "single":
        return expvals.mean(axis=-1, keepdims=True)
    if channel_mode == "multi":
        return expvals
    raise ValueError(f"unknown channel mode {channel_mode!r}")


def quanv_forward(fmap: np.ndarray, layer: QuanvLayer, channel_mode: ChannelMode = "single") -> np.ndarray:
    angles = quanv_angles(np.asarray(fmap, dtype=float), layer)
    flat = np.ascontiguousarray(angles.reshape(-1, layer.n_qubits))
    expvals = patch_expvals(flat, np.ascontiguousarray(layer.theta_matrix))
    return reduce_channels(expvals.reshape(angles.shape), channel_mode)


# ---------------------------------------------------------------------------
# residual sums


def residual_add(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Elementwise sum after zero-padding the smaller map at its bottom and right."""
    if a.shape[-1] != b.shape[-1]:
        raise ChannelMismatch(f"cannot add maps with {a.shape[-1]} and {b.shape[-1]} channels")
    h = max(a.shape[-3], b.shape[-3])
    w = max(a.shape[-2], b.shape[-2])
    lead = np.broadcast_shapes(a.shape[:-3], b.shape[:-3])
    out = np.zeros(lead + (h, w, a.shape[-1]))
    out[..., : a.shape[-3], : a.shape[-2], :] += a
    out[..., : b.shape[-3], : b.shape[-2], :] += b
    return out


def padded_shape(a: tuple, b: tuple) -> tuple:
    if a[-1] != b[-1]:
        raise ChannelMismatch(f"cannot add maps with {a[-1]} and {b[-1]} channels")
    return (max(a[0], b[0]), max(a[1], b[1]), a[-1])


# ---------------------------------------------------------------------------
# heads


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def dense_forward(m: np.ndarray, layer: DenseSoftmax) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape[-1] != layer.in_features:
        raise LengthMismatch(f"dense layer expects {layer.in_features} inputs, got {m.shape[-1]}")
    return softmax(m @ layer.W.T + layer.bias.values)


def qpost_circuit(states: np.ndarray, theta: np.ndarray, inverse: bool = False) -> np.ndarray:
    """Apply RY(theta_i) on every qubit then the CNOT chain (or the exact inverse)."""
    theta = np.asarray(theta)
    n = theta.shape[-1]
    # theta is either shared (n,) or one row per state (batch, n)
    if inverse:
        states = qsim.cnot_chain_batch(states, n, reverse=True)
        for q in range(n):
            states = qsim.ry_batch(states, q, -theta[..., q])
        return states
    for q in range(n):
        states = qsim.ry_batch(states, q, theta[..., q])
    return qsim.cnot_chain_batch(states, n)


def qpost_forward(features: np.ndarray, post: QuantumPostprocessor) -> np.ndarray:
    states, _ = qsim.amplitude_encode_batch(features, post.n_qubits)
    out = qpost_circuit(states, post.theta.values)
    return qsim.expectation_z_batch(out, post.measured_qubits)
