"""
Desk-scale training
===================

Trains one configuration on a small MNIST subset and writes the same
artifacts the CLI does. Run demos/prepare_mnist.py first.

    python demos/desk_training.py "O1+O2" 20 5
"""

import sys
from pathlib import Path

from resqunn.cli import curves_svg
from resqunn.data import load_mnist, sample_subset
from resqunn.train import TrainConfig, run_training, write_metrics_csv

wiring = sys.argv[1] if len(sys.argv) > 1 else "O1+O2"
per_class = int(sys.argv[2]) if len(sys.argv) > 2 else 20
epochs = int(sys.argv[3]) if len(sys.argv) > 3 else 5

raw = load_mnist("data/mnist")
cfg = TrainConfig(wiring=wiring, samples_per_class=per_class, epochs=epochs, seed=0)
train, val = sample_subset(raw, cfg.classes, per_class, cfg.split, cfg.seed)
print(f"{len(train)} train / {len(val)} val images, wiring {wiring}")

result = run_training(cfg, train, val, progress=lambda row: print(
    f"epoch {row['epoch']:>2}  loss {row['train_loss']:.3f}  acc {row['train_acc']:.3f}  val {row['val_acc']:.3f}"))
print("gradient present per layer:", result.report.present)

# The same run with frozen quanvolution layers isolates the dense head.
frozen = run_training(TrainConfig(**{**cfg.to_dict(), "trainable_quanv": False}), train, val)
print("frozen benchmark final val acc:", frozen.history[-1]["val_acc"])

out = Path("runs/demo")
out.mkdir(parents=True, exist_ok=True)
write_metrics_csv(result.history, out / "metrics.csv")
(out / "curves.svg").write_text(curves_svg(result.history, wiring))
print("wrote", out / "metrics.csv", "and", out / "curves.svg")
