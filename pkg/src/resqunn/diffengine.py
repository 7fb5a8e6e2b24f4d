"""Gradients for the hybrid network.

Reverse accumulation over a small tape of layer-level nodes. Quanvolution
nodes are gradient barriers: they receive an output gradient, turn it into a
gradient for their own rotation angles with the parameter-shift rule, and
pass nothing back to their data input (the measured, re-encoded signal). The
quantum postprocessor is differentiated through its amplitude-encoded input
by reverse-mode simulation, so residual paths that end in it carry signal.

A parameter set whose layer never receives an output gradient keeps
``grad = None``. That is distinct from a zero gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import qsim
from .errors import CyclicTape

TAPE_KINDS = ("quanv", "residual_add", "dense_softmax", "qpost", "loss")
CE_CLAMP = 1e-12


@dataclass(eq=False)
class ParamSet:
    name: str
    values: np.ndarray
    owner: Optional[str] = None
    grad: Optional[np.ndarray] = None
    trainable: bool = True

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if self.owner is None:
            self.owner = self.name

    def __len__(self):
        return self.values.size


# vjp(output_grad) -> (one gradient per data input or None, {param name: grad})
VJP = Callable[[np.ndarray], tuple[list, dict]]


@dataclass(eq=False)
class TapeNode:
    kind: str
    inputs: tuple
    output: str
    vjp: VJP
    params: tuple = ()

    def __post_init__(self):
        if self.kind not in TAPE_KINDS:
            raise ValueError(f"unknown tape node kind {self.kind!r}")

    @property
    def barrier(self) -> bool:
        return self.kind == "quanv"


@dataclass
class Tape:
    nodes: list = field(default_factory=list)
    values: dict = field(default_factory=dict)
    alias: dict = field(default_factory=dict)

    def leaf(self, ref: str, value: np.ndarray) -> None:
        self.values[ref] = value

    def record(self, node: TapeNode, value: np.ndarray) -> np.ndarray:
        self.nodes.append(node)
        self.values[node.output] = value
        return value

    def params(self) -> list:
        seen = {}
        for node in self.nodes:
            for p in node.params:
                seen.setdefault(p.name, p)
        return list(seen.values())


def check_order(nodes) -> None:
    """Raise :class:`CyclicTape` unless every input is a leaf or an earlier output."""
    producers = {}
    for i, node in enumerate(nodes):
        if node.output in producers:
            raise CyclicTape(f"{node.output!r} is produced twice")
        producers[node.output] = i
    for i, node in enumerate(nodes):
        for ref in node.inputs:
            j = producers.get(ref)
            if j is not None and j >= i:
                raise CyclicTape(f"node {i} ({node.kind}) reads {ref!r} before it is produced")


def backward(tape: Tape, loss_ref: str = "loss") -> dict:
    """Reverse accumulation from ``loss_ref``; returns ``{param name: grad or None}``.

    Also stores the result on each :class:`ParamSet` (``grad``).
    """
    check_order(tape.nodes)
    if loss_ref not in tape.values:
        raise KeyError(f"loss {loss_ref!r} is not on the tape")
    grads = {loss_ref: np.ones_like(np.asarray(tape.values[loss_ref], dtype=float))}
    param_grads = {p.name: None for p in tape.params()}
    for node in reversed(tape.nodes):
        g_out = grads.get(node.output)
        if g_out is None:
            continue
        input_grads, pgrads = node.vjp(g_out)
        if not node.barrier:
            for ref, g in zip(node.inputs, input_grads):
                if g is None:
                    continue
                grads[ref] = grads[ref] + g if ref in grads else g
        for name, g in pgrads.items():
            prev = param_grads.get(name)
            param_grads[name] = g if prev is None else prev + g
    for p in tape.params():
        p.grad = param_grads[p.name]
    return param_grads


def parameter_shift_grad(f: Callable[[float], float], theta: float) -> float:
    return (f(theta + math.pi / 2) - f(theta - math.pi / 2)) / 2


# ---------------------------------------------------------------------------
# vector-Jacobian products for the tape nodes


def quanv_param_grad(angles: np.ndarray, theta: np.ndarray, g_out: np.ndarray, channel_mode: str) -> np.ndarray:
    """dL/dtheta for one quanvolution layer from its output gradient.

    ``angles`` are the encoded patches ``(..., 4)``; ``g_out`` matches the
    layer output ``(..., 1)`` (single) or ``(..., 4)`` (multi). Per-patch
    derivatives come from the parameter-shift rule and are reduced in patch
    order.
    """
    from ._patchsim import patch_expvals_and_shift_grads

    n = angles.shape[-1]
    flat = np.ascontiguousarray(angles.reshape(-1, n))
    _, dz = patch_expvals_and_shift_grads(flat, np.ascontiguousarray(theta))
    g = g_out.reshape(flat.shape[0], -1)
    if channel_mode == "single":
        g = np.repeat(g / n, n, axis=1)
    return np.einsum("pkq,pq->k", dz, g)


def residual_add_vjp(shape_a: tuple, shape_b: tuple, g_out: np.ndarray) -> list:
    ga = g_out[..., : shape_a[-3], : shape_a[-2], :]
    gb = g_out[..., : shape_b[-3], : shape_b[-2], :]
    return [np.array(ga), np.array(gb)]


def dense_softmax_vjp(m: np.ndarray, probs: np.ndarray, W: np.ndarray, g_probs: np.ndarray):
    """Returns (dL/dm, dL/dW, dL/dB) for ``probs = softmax(m @ W.T + B)``."""
    g_z = probs * (g_probs - np.sum(g_probs * probs, axis=-1, keepdims=True))
    g_z2 = g_z.reshape(-1, g_z.shape[-1])
    m2 = m.reshape(-1, m.shape[-1])
    return g_z @ W, g_z2.T @ m2, g_z2.sum(axis=0)


def qpost_features_vjp(features: np.ndarray, theta: np.ndarray, g_out: np.ndarray,
                       n_qubits: int = 10, measured=(0, 1, 2, 3)) -> np.ndarray:
    """dL/dfeatures for the amplitude-encoded postprocessor, by reverse-mode simulation.

    With ``psi = f / |f|`` and ``phi = U psi`` the outputs are
    ``<phi|Z_q|phi>``; the cotangent on ``psi`` is ``2 U^T (sum_q g_q Z_q) phi``
    and the normalisation projects out the radial part.
    """
    from .layers import qpost_circuit

    features = np.asarray(features, dtype=float)
    psi, norms = qsim.amplitude_encode_batch(features, n_qubits)
    phi = qpost_circuit(psi, theta)
    signs = np.stack([qsim.z_signs(n_qubits, q) for q in measured], axis=-1)
    lam = phi * (g_out @ signs.T)
    g_psi = 2.0 * qpost_circuit(lam, theta, inverse=True)
    radial = np.sum(g_psi * psi, axis=-1, keepdims=True)
    g_f = (g_psi - radial * psi) / norms[..., None]
    return g_f[..., : features.shape[-1]]


def qpost_input_grad(features, theta, n_qubits: int = 10, measured=(0, 1, 2, 3)) -> np.ndarray:
    """Jacobian ``d outputs / d features`` of shape ``(len(measured), len(features))``."""
    features = np.asarray(features, dtype=float).ravel()
    k = len(measured)
    stacked = np.broadcast_to(features, (k, features.size))
    return qpost_features_vjp(stacked, np.asarray(theta, dtype=float), np.eye(k), n_qubits, measured)


def qpost_theta_grad(features: np.ndarray, theta: np.ndarray, g_out: np.ndarray,
                     n_qubits: int = 10, measured=(0, 1, 2, 3)) -> np.ndarray:
    """dL/dtheta of the postprocessor by the parameter-shift rule, summed over the batch."""
    from .layers import qpost_circuit

    psi, _ = qsim.amplitude_encode_batch(features, n_qubits)
    grad = np.zeros(len(theta))
    for i in range(len(theta)):
        diff = 0.0
        for sign in (1.0, -1.0):
            shifted = np.array(theta, dtype=float)
            shifted[i] += sign * math.pi / 2
            ez = qsim.expectation_z_batch(qpost_circuit(psi, shifted), measured)
            diff = diff + sign * ez
        grad[i] = np.sum(0.5 * diff * g_out)
    return grad


def cross_entropy_vjp(probs: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Gradient of the batch-mean cross-entropy with respect to ``probs``."""
    batch = probs.shape[0]
    g = np.zeros_like(probs)
    rows = np.arange(batch)
    picked = probs[rows, targets]
    g[rows, targets] = np.where(picked > CE_CLAMP, -1.0 / (batch * np.maximum(picked, CE_CLAMP)), 0.0)
    return g


def softmax_cross_entropy_vjp(scores: np.ndarray, targets: np.ndarray) -> np.ndarray:
    from .layers import softmax

    p = softmax(scores)
    p[np.arange(scores.shape[0]), targets] -= 1.0
    return p / scores.shape[0]
