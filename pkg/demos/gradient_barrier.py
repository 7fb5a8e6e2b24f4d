"""
Gradient barriers
=================

Measuring a quanvolution layer and re-encoding the result as rotation angles
breaks the chain of derivatives. Only residual sums carry gradient around it.
"""

import numpy as np

from resqunn.archspec import analyze_accessibility, parse_wiring
from resqunn.network import ResQuNN

rng = np.random.default_rng(0)
x = rng.uniform(0, 1, (4, 28, 28, 1))
y = rng.integers(0, 10, 4)

# A plain two-layer stack: the first layer never hears from the loss.
model = ResQuNN("none", 2, seed=0)
loss, grads, tape = model.loss_and_grads(x, y)
print("loss", round(loss, 4))
for name, g in grads.items():
    print(f"  {name:<12}", "absent" if g is None else f"|g| = {np.linalg.norm(g):.3e}")

# Absent is not zero. The layer simply has no gradient to report, so an
# optimiser leaves it alone.
print("quanv1.grad is None:", model.quanv[0].theta.grad is None)

# The static analyser predicts the same thing from the wiring alone by looking
# for a path of sums from O_k to the output.
for text in ("none", "X+O1", "O1+O2", "X+O2", "(X+O1)+O2"):
    report = analyze_accessibility(parse_wiring(text))
    _, grads, _ = ResQuNN(text, 2, seed=1).loss_and_grads(x, y)
    dynamic = tuple(grads[f"quanv{k}"] is not None for k in (1, 2))
    print(f"{text:<10} static {report.present}  backward {dynamic}  path1 {report.paths.get(1)}")

# With the quantum head the residual signal is amplitude encoded. The head is
# differentiable with respect to its input, so O1+O2 still reaches layer 1.
q = ResQuNN("O1+O2", 2, postprocessing="quantum", n_classes=4, seed=0)
_, grads, _ = q.loss_and_grads(x, y % 4)
print("quantum head, O1+O2:", {k: v is not None for k, v in grads.items()})
