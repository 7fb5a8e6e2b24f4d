"""Minimal statevector simulator: RY, RX, CNOT, Z expectations, amplitude encoding.

Qubit 0 is the most significant bit of the basis index, so for ``n`` qubits
the basis state ``|b_0 b_1 ... b_{n-1}>`` sits at index
``sum(b_q << (n - 1 - q))``. The same convention is used for encoding, the
CNOT chains and measurement.

The single-state functions (``apply_ry`` and friends) are value-to-value and
validate their arguments. The ``*_batch`` functions work on arrays whose last
axis holds ``2**n`` amplitudes and whose leading axes are a batch; they skip
validation and are what the layers use internally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np

from .errors import (
    ControlEqualsTarget,
    QubitCountOutOfRange,
    QubitIndexOutOfRange,
    TooManyFeatures,
    ZeroNormInput,
)

MAX_QUBITS = 16
NORM_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise ValueError(
                f"expected {2**self.n_qubits} amplitudes, got shape {self.amplitudes.shape}"
            )
        self.amplitudes.setflags(write=False)

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2)))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class GateOp:
    kind: Literal["RY", "RX", "CNOT"]
    target: int
    control: Optional[int] = None
    angle: float = 0.0


def _check_count(n_qubits: int) -> None:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise QubitCountOutOfRange(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")


def _check_index(state: StateVector, qubit: int) -> None:
    if not 0 <= qubit < state.n_qubits:
        raise QubitIndexOutOfRange(f"qubit {qubit} outside register of {state.n_qubits}")


def _n_from_dim(dim: int) -> int:
    return dim.bit_length() - 1


# ---------------------------------------------------------------------------
# batched kernels


def _split(states: np.ndarray, qubit: int) -> np.ndarray:
    n = _n_from_dim(states.shape[-1])
    return states.reshape(states.shape[:-1] + (2**qubit, 2, 2 ** (n - 1 - qubit)))


def _angles(angle, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    half = np.asarray(angle, dtype=float) / 2
    # per-row angles broadcast over the two trailing split axes
    if half.ndim:
        half = half.reshape(half.shape + (1, 1))
    return np.cos(half), np.sin(half)


def apply_2x2_batch(states: np.ndarray, qubit: int, m00, m01, m10, m11) -> np.ndarray:
    s = _split(states, qubit)
    a0, a1 = s[..., 0, :], s[..., 1, :]
    out = np.stack([m00 * a0 + m01 * a1, m10 * a0 + m11 * a1], axis=-2)
    return out.reshape(states.shape)


def ry_batch(states: np.ndarray, qubit: int, angle) -> np.ndarray:
    """RY on ``qubit`` of every state; ``angle`` is a scalar or one per batch row."""
    c, s = _angles(angle, states)
    return apply_2x2_batch(states, qubit, c, -s, s, c)


def rx_batch(states: np.ndarray, qubit: int, angle) -> np.ndarray:
    c, s = _angles(angle, states)
    return apply_2x2_batch(states, qubit, c, -1j * s, -1j * s, c)


def cnot_batch(states: np.ndarray, control: int, target: int) -> np.ndarray:
    n = _n_from_dim(states.shape[-1])
    idx = np.arange(2**n)
    cbit = 1 << (n - 1 - control)
    tbit = 1 << (n - 1 - target)
    src = np.where(idx & cbit, idx ^ tbit, idx)
    return states[..., src]


def cnot_chain_batch(states: np.ndarray, n_qubits: int, reverse: bool = False) -> np.ndarray:
    """Nearest-neighbour chain CNOT(0,1), CNOT(1,2), ...; ``reverse`` applies its inverse."""
    pairs = [(q, q + 1) for q in range(n_qubits - 1)]
    if reverse:
        pairs = pairs[::-1]
    for c, t in pairs:
        states = cnot_batch(states, c, t)
    return states


def z_signs(n_qubits: int, qubit: int) -> np.ndarray:
    idx = np.arange(2**n_qubits)
    return np.where(idx & (1 << (n_qubits - 1 - qubit)), -1.0, 1.0)


def expectation_z_batch(states: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """<Z> of each listed qubit; result has shape ``batch + (len(qubits),)``."""
    n = _n_from_dim(states.shape[-1])
    probs = np.abs(states) ** 2
    signs = np.stack([z_signs(n, q) for q in qubits], axis=-1)
    return probs @ signs


def amplitude_encode_batch(features: np.ndarray, n_qubits: int) -> tuple[np.ndarray, np.ndarray]:
    """Zero-pad each row to ``2**n_qubits`` and L2-normalise. Returns (states, norms)."""
    features = np.asarray(features, dtype=float)
    dim = 2**n_qubits
    if features.shape[-1] > dim:
        raise TooManyFeatures(f"{features.shape[-1]} features do not fit in {n_qubits} qubits")
    norms = np.sqrt(np.sum(features**2, axis=-1))
    if np.any(norms <= NORM_EPS):
        raise ZeroNormInput("cannot amplitude-encode a vector with zero norm")
    padded = np.zeros(features.shape[:-1] + (dim,))
    padded[..., : features.shape[-1]] = features
    return padded / norms[..., None], norms


# ---------------------------------------------------------------------------
# single-state API


def new_zero_state(n_qubits: int) -> StateVector:
    _check_count(n_qubits)
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def from_amplitudes(amplitudes) -> StateVector:
    amps = np.array(amplitudes, dtype=complex)
    n = _n_from_dim(amps.size)
    if amps.ndim != 1 or 2**n != amps.size:
        raise ValueError("amplitude count must be a power of two")
    _check_count(n)
    return StateVector(n, amps)


def apply_ry(state: StateVector, qubit: int, angle: float) -> StateVector:
    _check_index(state, qubit)
    return StateVector(state.n_qubits, ry_batch(state.amplitudes, qubit, angle))


def apply_rx(state: StateVector, qubit: int, angle: float) -> StateVector:
    _check_index(state, qubit)
    return StateVector(state.n_qubits, rx_batch(state.amplitudes, qubit, angle))


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    _check_index(state, control)
    _check_index(state, target)
    if control == target:
        raise ControlEqualsTarget(f"control and target are both {control}")
    return StateVector(state.n_qubits, cnot_batch(state.amplitudes, control, target))


def apply_gate(state: StateVector, op: GateOp) -> StateVector:
    if op.kind == "RY":
        return apply_ry(state, op.target, op.angle)
    if op.kind == "RX":
        return apply_rx(state, op.target, op.angle)
    if op.kind == "CNOT":
        if op.control is None:
            raise ValueError("CNOT needs a control qubit")
        return apply_cnot(state, op.control, op.target)
    raise ValueError(f"unsupported gate {op.kind!r}")


def run_circuit(state: StateVector, ops: Sequence[GateOp]) -> StateVector:
    for op in ops:
        state = apply_gate(state, op)
    return state


def expectation_z(state: StateVector, qubit: int) -> float:
    _check_index(state, qubit)
    return float(expectation_z_batch(state.amplitudes, [qubit])[0])


def prepare_amplitude_state(features, n_qubits: int) -> StateVector:
    _check_count(n_qubits)
    features = np.asarray(features, dtype=float).ravel()
    amps, _ = amplitude_encode_batch(features, n_qubits)
    return StateVector(n_qubits, amps.astype(complex))
