"""Residual quanvolutional neural networks simulated on a numpy statevector."""

from .archspec import WiringSpec, analyze_accessibility, enumerate_wirings, parse_wiring, render_wiring
from .network import ResQuNN
from .train import TrainConfig, run_training

__version__ = "0.1.0"

__all__ = [
    "ResQuNN",
    "TrainConfig",
    "WiringSpec",
    "analyze_accessibility",
    "enumerate_wirings",
    "parse_wiring",
    "render_wiring",
    "run_training",
]
