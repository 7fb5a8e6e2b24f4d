"""
Statevector basics
==================

A tour of the small simulator that runs every circuit in the package.
"""

import numpy as np

from resqunn import qsim
from resqunn.diffengine import ParamSet
from resqunn.layers import QuanvLayer, quanv_patch

# A register of n qubits is 2**n complex amplitudes. Qubit 0 is the most
# significant bit of the basis index, so flipping it on three qubits moves the
# amplitude from index 0 (|000>) to index 4 (|100>).
state = qsim.new_zero_state(3)
flipped = qsim.apply_ry(state, 0, np.pi)
print(np.round(flipped.amplitudes.real, 3))

# RY keeps amplitudes real, RX introduces phases.
plus = qsim.apply_ry(qsim.new_zero_state(1), 0, np.pi / 2)
print("RY(pi/2)|0> =", np.round(plus.amplitudes, 4))
print("RX(pi)|0>   =", np.round(qsim.apply_rx(qsim.new_zero_state(1), 0, np.pi).amplitudes, 4))

# <Z> on a qubit is P(0) - P(1).
for angle in (0, np.pi / 3, np.pi / 2, np.pi):
    s = qsim.apply_ry(qsim.new_zero_state(1), 0, angle)
    print(f"<Z> after RY({angle:.3f}) = {qsim.expectation_z(s, 0):+.4f}  (cos = {np.cos(angle):+.4f})")

# CNOT is a permutation of amplitudes, so applying it twice is exact.
rng = np.random.default_rng(0)
a = rng.normal(size=16) + 1j * rng.normal(size=16)
s = qsim.from_amplitudes(a / np.linalg.norm(a))
back = qsim.apply_cnot(qsim.apply_cnot(s, 1, 3), 1, 3)
print("CNOT twice is the identity:", np.array_equal(back.amplitudes, s.amplitudes))

# Amplitude encoding pads a feature vector to 2**n entries and normalises it.
# A 28x28 image fits into 10 qubits with 240 trailing zeros.
img = rng.uniform(0, 1, 784)
enc = qsim.prepare_amplitude_state(img, 10)
print("encoded norm:", round(enc.norm(), 12), " zero tail:", not enc.amplitudes[784:].any())

# One quanvolution patch: RY(pixel) on each of 4 qubits, RX(theta), then the
# CNOT chain 0->1->2->3, repeated `depth` times. A flip on qubit 0 cascades
# down the chain.
layer = QuanvLayer(1, ParamSet("demo", np.zeros(4)))
print("patch [pi,0,0,0]:", quanv_patch([np.pi, 0, 0, 0], layer))
print("patch [0,0,pi,0]:", quanv_patch([0, 0, np.pi, 0], layer))
