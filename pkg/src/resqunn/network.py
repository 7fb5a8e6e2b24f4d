"""Multi-layer quanvolutional network assembled from a residual wiring."""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np

from . import diffengine as de
from .archspec import WiringSpec, _sort_key, parse_wiring, signal_shapes
from .diffengine import Tape, TapeNode
from .errors import ChannelMismatch, ConfigMismatch, TooManyFeatures
from .layers import (
    DenseSoftmax,
    QuantumPostprocessor,
    QuanvLayer,
    dense_forward,
    qpost_forward,
    quanv_angles,
    reduce_channels,
    residual_add,
)
from ._patchsim import patch_expvals

DEFAULT_DEPTHS = {1: (2,), 2: (4, 1), 3: (4, 1, 1)}


class ResQuNN:
    """Quanvolution layers joined by residual sums, then a dense or quantum head.

    Parameters are drawn in a fixed order (layer 1..n, then the head) from
    ``np.random.default_rng(seed)``.
    """

    def __init__(
        self,
        wiring,
        n_layers: Optional[int] = None,
        depths: Optional[Sequence[int]] = None,
        postprocessing: str = "classical",
        n_classes: int = 10,
        input_shape=(28, 28, 1),
        channel_mode: str = "single",
        input_angle_scale: float = math.pi,
        seed: int = 0,
    ):
        if isinstance(wiring, str):
            wiring = parse_wiring(wiring, n_layers or 2)
        if n_layers is not None and wiring.n_layers != n_layers:
            raise ConfigMismatch(f"wiring has {wiring.n_layers} layers, expected {n_layers}")
        self.wiring: WiringSpec = wiring
        self.n_layers = wiring.n_layers
        self.depths = tuple(depths or DEFAULT_DEPTHS.get(self.n_layers, (1,) * self.n_layers))
        if len(self.depths) != self.n_layers:
            raise ConfigMismatch(f"{len(self.depths)} depths given for {self.n_layers} layers")
        if postprocessing not in ("classical", "quantum"):
            raise ConfigMismatch(f"unknown postprocessing {postprocessing!r}")
        self.postprocessing = postprocessing
        self.n_classes = n_classes
        self.channel_mode = channel_mode
        self.input_shape = tuple(input_shape)
        self.shapes = signal_shapes(wiring, self.input_shape, channel_mode)

        rng = np.random.default_rng(seed)
        # raw pixels in [0, 1] are spread over [0, pi]; later layers re-encode <Z> as is
        self.quanv = [
            QuanvLayer.create(f"quanv{k}", d, rng, input_angle_scale if k == 1 else 1.0)
            for k, d in enumerate(self.depths, start=1)
        ]
        n_features = int(np.prod(self.shapes["output"]))
        if postprocessing == "classical":
            self.head = DenseSoftmax.create(n_features, n_classes, rng)
        else:
            if n_classes != 4:
                raise ConfigMismatch("quantum postprocessing measures 4 qubits and needs 4 classes")
            self.head = QuantumPostprocessor.create(rng)
            if n_features > 2**self.head.n_qubits:
                raise TooManyFeatures(f"{n_features} features exceed the postprocessor register")

    # -- parameters -------------------------------------------------------

    def quanv_params(self) -> list:
        return [layer.theta for layer in self.quanv]

    def head_params(self) -> list:
        if isinstance(self.head, DenseSoftmax):
            return [self.head.weight, self.head.bias]
        return [self.head.theta]

    def parameters(self) -> list:
        return self.quanv_params() + self.head_params()

    def get_state(self) -> dict:
        return {p.name: p.values.copy() for p in self.parameters()}

    def set_state(self, state: dict) -> None:
        for p in self.parameters():
            p.values = np.array(state[p.name], dtype=float)

    # -- forward ----------------------------------------------------------

    def _quanv(self, tape: Tape, k: int, in_ref: str, x: np.ndarray) -> np.ndarray:
        layer = self.quanv[k - 1]
        angles = quanv_angles(x, layer)
        flat = np.ascontiguousarray(angles.reshape(-1, layer.n_qubits))
        theta = np.ascontiguousarray(layer.theta_matrix)
        out = reduce_channels(patch_expvals(flat, theta).reshape(angles.shape), self.channel_mode)
        mode = self.channel_mode

        def vjp(g):
            if not layer.theta.trainable:
                return [None], {}
            return [None], {layer.theta.name: de.quanv_param_grad(angles, theta, g, mode)}

        return tape.record(TapeNode("quanv", (in_ref,), f"O{k}", vjp, (layer.theta,)), out)

    def _add(self, tape: Tape, a_ref: str, b_ref: str, out_ref: str) -> np.ndarray:
        a, b = tape.values[a_ref], tape.values[b_ref]
        sa, sb = a.shape, b.shape

        def vjp(g):
            return de.residual_add_vjp(sa, sb, g), {}

        return tape.record(TapeNode("residual_add", (a_ref, b_ref), out_ref, vjp), residual_add(a, b))

    def _head(self, tape: Tape, in_ref: str) -> np.ndarray:
        fmap = tape.values[in_ref]
        batch_shape = fmap.shape[:-3]
        m = fmap.reshape(batch_shape + (-1,))
        if isinstance(self.head, DenseSoftmax):
            head = self.head
            probs = dense_forward(m, head)

            def vjp(g):
                g_m, g_w, g_b = de.dense_softmax_vjp(m, probs, head.W, g)
                return [g_m.reshape(fmap.shape)], {head.weight.name: g_w.ravel(), head.bias.name: g_b}

            node = TapeNode("dense_softmax", (in_ref,), "scores", vjp, (head.weight, head.bias))
            return tape.record(node, probs)

        post = self.head
        expvals = qpost_forward(m, post)
        theta = post.theta.values.copy()

        def vjp(g):
            g_m = de.qpost_features_vjp(m, theta, g, post.n_qubits, post.measured_qubits)
            g_t = de.qpost_theta_grad(m, theta, g, post.n_qubits, post.measured_qubits)
            return [g_m.reshape(fmap.shape)], {post.theta.name: g_t}

        return tape.record(TapeNode("qpost", (in_ref,), "scores", vjp, (post.theta,)), expvals)

    def forward(self, x: np.ndarray, detached_inputs: Optional[dict] = None) -> Tape:
        """Run the network on a batch ``(B, H, W, 1)`` and return the recorded tape.

        ``detached_inputs`` maps a layer index to an array used as that layer's
        input instead of the wired signal (lets a finite-difference check hold
        the re-encoded inputs fixed).
        """
        x = np.asarray(x, dtype=float)
        if x.ndim == 3:
            x = x[None]
        tape = Tape()
        tape.leaf("X", x)
        alias = {"X": "X", "s0": "X"}
        for k in range(1, self.n_layers + 1):
            in_ref = alias[f"s{k - 1}"]
            x_in = tape.values[in_ref]
            if detached_inputs and k in detached_inputs:
                in_ref = f"detached{k}"
                x_in = np.asarray(detached_inputs[k], dtype=float)
                tape.leaf(in_ref, x_in)
            self._quanv(tape, k, in_ref, x_in)
            alias[f"O{k}"] = f"O{k}"
            acc = f"O{k}"
            addends = sorted(self.wiring.addends(k), key=_sort_key)
            for i, a in enumerate(addends):
                out_ref = f"s{k}" if i == len(addends) - 1 else f"s{k}.{i}"
                self._add(tape, acc, alias[a], out_ref)
                acc = out_ref
            alias[f"s{k}"] = acc
        self._head(tape, alias[f"s{self.n_layers}"])
        tape.alias = alias
        return tape

    def layer_inputs(self, tape: Tape) -> dict:
        """The array each quanvolution layer consumed on ``tape``."""
        found = {}
        for node in tape.nodes:
            if node.kind == "quanv":
                found[int(node.output[1:])] = tape.values[node.inputs[0]]
        return found

    def scores(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x).values["scores"]

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.scores(x), axis=-1)

    def loss_tape(self, x: np.ndarray, targets: np.ndarray, detached_inputs: Optional[dict] = None) -> Tape:
        """Forward pass plus the batch-mean cross-entropy node ``"loss"``."""
        tape = self.forward(x, detached_inputs)
        scores = tape.values["scores"]
        targets = np.asarray(targets, dtype=int)
        if self.postprocessing == "classical":
            picked = np.maximum(scores[np.arange(len(targets)), targets], de.CE_CLAMP)

            def vjp(g):
                return [g * de.cross_entropy_vjp(scores, targets)], {}
        else:
            from .layers import softmax

            p = softmax(scores)
            picked = np.maximum(p[np.arange(len(targets)), targets], de.CE_CLAMP)

            def vjp(g):
                return [g * de.softmax_cross_entropy_vjp(scores, targets)], {}

        loss = np.array(-np.mean(np.log(picked)))
        tape.record(TapeNode("loss", ("scores",), "loss", vjp), loss)
        return tape

    def loss_and_grads(self, x, targets, detached_inputs=None) -> tuple:
        tape = self.loss_tape(x, targets, detached_inputs)
        grads = de.backward(tape, "loss")
        return float(tape.values["loss"]), grads, tape


def probe_shape(wiring: WiringSpec, channel_mode: str = "single") -> tuple:
    """Smallest square input (28x28 first) on which every layer of ``wiring`` is shape-valid."""
    for side in (28, 32, 16, 64):
        try:
            signal_shapes(wiring, (side, side, 1), channel_mode)
        except (ValueError, ChannelMismatch):
            continue
        return (side, side, 1)
    raise ConfigMismatch(f"no probe input fits wiring {wiring}")


def dynamic_accessibility(wiring, n_layers: int = 2, postprocessing: str = "classical",
                          seed: int = 0, batch: int = 2) -> tuple:
    """Which layers receive a gradient in one real backward pass on random data."""
    if isinstance(wiring, str):
        wiring = parse_wiring(wiring, n_layers)
    shape = probe_shape(wiring)
    n_classes = 4 if postprocessing == "quantum" else 10
    model = ResQuNN(wiring, postprocessing=postprocessing, n_classes=n_classes, input_shape=shape, seed=seed)
    rng = np.random.default_rng(seed)
    x = rng.uniform(0, 1, (batch,) + shape)
    _, grads, _ = model.loss_and_grads(x, rng.integers(0, n_classes, batch))
    return tuple(grads[p.name] is not None for p in model.quanv_params())
