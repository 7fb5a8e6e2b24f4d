"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line PASS/FAIL summary in ``RESULTS``; the conftest
prints them at the end of the session. The stochastic criteria (5-7) train
on real MNIST digits from ``$RESQUNN_DATA`` (default ``data/mnist``; see
``demos/prepare_mnist.py``) and take the better part of an hour on one core.
"""

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest

from resqunn import qsim
from resqunn.archspec import PAPER_TWO_LAYER, analyze_accessibility, output_shape, parse_wiring
from resqunn.cli import main as cli_main
from resqunn.data import (
    load_mnist,
    parse_idx_images,
    parse_idx_labels,
    sample_subset,
    write_idx_images,
    write_idx_labels,
)
from resqunn.errors import BadMagic, TruncatedPayload
from resqunn.layers import QuantumPostprocessor, QuanvLayer, qpost_forward, quanv_forward
from resqunn.diffengine import ParamSet
from resqunn.network import ResQuNN, dynamic_accessibility
from resqunn.qsim import GateOp
from resqunn.train import TrainConfig, build_model, run_training

import oracles

RESULTS = {}
DATA_DIR = Path(os.environ.get("RESQUNN_DATA", Path(__file__).resolve().parents[1] / "data" / "mnist"))
SEEDS = (0, 1, 2)


def record(n, ok, detail, started):
    RESULTS[n] = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {detail}  ({time.perf_counter() - started:.1f}s)"


@pytest.fixture(scope="module")
def mnist():
    if not (DATA_DIR / "train-images-idx3-ubyte").exists() and not (DATA_DIR / "train-images-idx3-ubyte.gz").exists():
        pytest.fail(f"MNIST IDX files not found in {DATA_DIR}; run demos/prepare_mnist.py")
    return load_mnist(DATA_DIR)


def train_run(raw, **kw):
    cfg = TrainConfig(**kw)
    train, val = sample_subset(raw, cfg.classes, cfg.samples_per_class, cfg.split, cfg.seed)
    return run_training(cfg, train, val)


# -- 1 -------------------------------------------------------------------

GOLDEN = {
    "none": (False, True),
    "X+O1": (False, True),
    "O1+O2": (True, True),
    "X+O2": (False, True),
    "(X+O1)+O2": (True, True),
    "(O1+O2)+O3": (True, True, True),
    "((X+O1)+O2)+O3": (True, True, True),
}


def test_criterion_01_accessibility_golden_matrix():
    t0 = time.perf_counter()
    bad = []
    for text, expected in GOLDEN.items():
        n = len(expected)
        static = analyze_accessibility(parse_wiring(text, n)).present
        for post in ("classical", "quantum"):
            dynamic = dynamic_accessibility(text, n, post, seed=1)
            if not static == dynamic == expected:
                bad.append(f"{text}/{post}: static {static} dynamic {dynamic}")
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 60
    record(1, ok, f"7 wirings x 2 heads static==dynamic==golden; mismatches: {bad or 'none'}", t0)
    assert not bad
    assert elapsed < 60


# -- 2 -------------------------------------------------------------------

TABLE2 = {"none": (7, 7, 1), "X+O1": (14, 14, 1), "O1+O2": (14, 14, 1), "X+O2": (28, 28, 1), "(X+O1)+O2": (28, 28, 1)}


def test_criterion_02_table_shapes():
    t0 = time.perf_counter()
    x = np.random.default_rng(0).uniform(0, 1, (1, 28, 28, 1))
    got = {}
    for text in TABLE2:
        model = ResQuNN(text, 2, input_shape=(28, 28, 1))
        tape = model.forward(x)
        got[text] = (output_shape(parse_wiring(text), (28, 28, 1)), tape.values[tape.alias["s2"]].shape[1:])
    elapsed = time.perf_counter() - t0
    ok = all(s == d == TABLE2[t] for t, (s, d) in got.items()) and elapsed < 1.0
    record(2, ok, "; ".join(f"{t}->{'x'.join(map(str, s))}" for t, (s, _) in got.items()), t0)
    for text, (static, dynamic) in got.items():
        assert static == dynamic == TABLE2[text]
    assert elapsed < 1.0


# -- 3 -------------------------------------------------------------------


def fd_check(model, x, targets, rng, dense_coords=12, h=1e-5):
    """Max |analytic - central difference| over quanv, head and a sample of dense weights."""
    _, grads, tape = model.loss_and_grads(x, targets)
    fixed = model.layer_inputs(tape)
    worst, count = 0.0, 0
    for p in model.parameters():
        g = grads[p.name]
        if g is None:
            continue
        if p.name == "dense.weight":
            coords = rng.choice(p.values.size, size=dense_coords, replace=False)
        else:
            coords = range(p.values.size)
        base = p.values.copy()
        for i in coords:
            vals = []
            for step in (h, -h):
                v = base.copy()
                v[i] += step
                p.values = v
                vals.append(float(model.loss_tape(x, targets, detached_inputs=fixed).values["loss"]))
            p.values = base
            worst = max(worst, abs((vals[0] - vals[1]) / (2 * h) - g[i]))
            count += 1
    return worst, count


def test_criterion_03_gradient_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst, checked, draws = 0.0, 0, 0
    for draw in range(100):
        post = "classical" if draw % 2 == 0 else "quantum"
        text = PAPER_TWO_LAYER[draw // 2 % 5]
        k = 10 if post == "classical" else 4
        model = ResQuNN(text, 2, postprocessing=post, n_classes=k, input_shape=(8, 8, 1),
                        seed=int(rng.integers(2**31)))
        if post == "classical":
            model.head.weight.values = rng.normal(size=model.head.weight.values.size)
            model.head.bias.values = rng.normal(size=model.head.bias.values.size)
        x = rng.uniform(0, 1, (3, 8, 8, 1))
        w, c = fd_check(model, x, rng.integers(0, k, 3), rng)
        worst, checked, draws = max(worst, w), checked + c, draws + 1
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-4 and draws >= 100 and elapsed < 300
    record(3, ok, f"{draws} draws, {checked} coordinates, max |err| {worst:.2e} (< 1e-4)", t0)
    assert worst < 1e-4
    assert elapsed < 300


# -- 4 -------------------------------------------------------------------


def test_criterion_04_simulator_fidelity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    gate_err, norm_err = 0.0, 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 5))
        a = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
        state = qsim.from_amplitudes(a / np.linalg.norm(a))
        ref = state.amplitudes.copy()
        for _ in range(int(rng.integers(1, 25))):
            kind = str(rng.choice(["RY", "RX", "CNOT"] if n > 1 else ["RY", "RX"]))
            if kind == "CNOT":
                c, t = (int(v) for v in rng.choice(n, 2, replace=False))
                op = GateOp(kind, t, c)
            else:
                op = GateOp(kind, int(rng.integers(n)), angle=float(rng.uniform(-7, 7)))
            state = qsim.apply_gate(state, op)
            ref = oracles.gate_matrix(n, op.kind, op.target, op.control, op.angle) @ ref
            gate_err = max(gate_err, np.max(np.abs(state.amplitudes - ref)))
        norm_err = max(norm_err, abs(state.norm() - 1))

    patch_err = 0.0
    for _ in range(50):
        depth = int(rng.integers(1, 5))
        theta = rng.uniform(0, 2 * np.pi, 4 * depth)
        img = rng.uniform(0, np.pi, (2, 2, 1))
        got = quanv_forward(img, QuanvLayer(depth, ParamSet("q", theta)), "multi")[0, 0]
        patch_err = max(patch_err, np.max(np.abs(got - oracles.quanv_patch(img.ravel(), theta))))

    post_err = 0.0
    for _ in range(10):
        f = rng.normal(size=int(rng.integers(2, 1025)))
        theta = rng.uniform(0, 2 * np.pi, 10)
        got = qpost_forward(f, QuantumPostprocessor(ParamSet("qpost", theta)))
        post_err = max(post_err, np.max(np.abs(got - oracles.qpost(f, theta))))
    elapsed = time.perf_counter() - t0
    ok = gate_err < 1e-12 and norm_err < 1e-12 and patch_err < 1e-12 and post_err < 1e-10 and elapsed < 120
    record(4, ok, f"gates {gate_err:.1e}, norm {norm_err:.1e} (1000 circuits), "
                  f"quanv circuits {patch_err:.1e}, 10-qubit head {post_err:.1e}", t0)
    assert gate_err < 1e-12 and norm_err < 1e-12 and patch_err < 1e-12
    assert post_err < 1e-10
    assert elapsed < 120


# -- 5 -------------------------------------------------------------------


def test_criterion_05_trainable_beats_frozen(mnist):
    t0 = time.perf_counter()
    gaps = []
    for seed in SEEDS:
        acc = {}
        for trainable in (True, False):
            result = train_run(mnist, wiring="none", n_layers=1, samples_per_class=20, epochs=30,
                               seed=seed, trainable_quanv=trainable)
            acc[trainable] = result.history[-1]["val_acc"]
        gaps.append(acc[True] - acc[False])
    mean_gap = float(np.mean(gaps))
    elapsed = time.perf_counter() - t0
    ok = mean_gap >= 0.15 and elapsed < 1800
    record(5, ok, f"val gap trainable-frozen per seed {[round(g, 3) for g in gaps]}, mean {mean_gap:.3f} (>= 0.15)", t0)
    assert mean_gap >= 0.15
    assert elapsed < 1800


# -- 6 -------------------------------------------------------------------


def test_criterion_06_residual_ordering_classical(mnist):
    t0 = time.perf_counter()
    acc = {w: [] for w in ("O1+O2", "X+O1")}
    for seed in SEEDS:
        for w in acc:
            acc[w].append(train_run(mnist, wiring=w, seed=seed).history[-1]["val_acc"])
    gaps = [a - b for a, b in zip(acc["O1+O2"], acc["X+O1"])]
    mean_gap = float(np.mean(gaps))
    elapsed = time.perf_counter() - t0
    ok = mean_gap >= 0.15 and elapsed < 3600
    record(6, ok, f"val O1+O2 {acc['O1+O2']} vs X+O1 {acc['X+O1']}, mean gap {mean_gap:.3f} (>= 0.15)", t0)
    assert mean_gap >= 0.15
    assert elapsed < 3600


# -- 7 -------------------------------------------------------------------


def test_criterion_07_quantum_head_separation(mnist):
    t0 = time.perf_counter()
    full, restricted = ("O1+O2", "(X+O1)+O2"), ("none", "X+O1", "X+O2")
    acc = {w: [] for w in full + restricted}
    for seed in SEEDS:
        for w in acc:
            result = train_run(mnist, wiring=w, postprocessing="quantum", classes=(0, 1, 2, 3), seed=seed)
            acc[w].append(result.history[-1]["val_acc"])
    means = {w: float(np.mean(v)) for w, v in acc.items()}
    elapsed = time.perf_counter() - t0
    ok = all(means[w] > 0.5 for w in full) and all(means[w] < 0.4 for w in restricted) and elapsed < 7200
    record(7, ok, "mean val " + ", ".join(f"{w} {m:.3f}" for w, m in means.items())
           + " (full > 0.5, restricted < 0.4)", t0)
    assert all(means[w] > 0.5 for w in full)
    assert all(means[w] < 0.4 for w in restricted)
    assert elapsed < 7200


# -- 8 -------------------------------------------------------------------


def test_criterion_08_frozen_and_absent_untouched(mnist):
    t0 = time.perf_counter()
    failures = []
    for w in PAPER_TWO_LAYER:
        cfg = dict(wiring=w, samples_per_class=5, epochs=30, seed=3)
        before = build_model(TrainConfig(**cfg)).get_state()
        frozen = train_run(mnist, trainable_quanv=False, **cfg)
        for name in ("quanv1", "quanv2"):
            if not np.array_equal(before[name], frozen.params[name]):
                failures.append(f"{w} frozen {name}")
        live = train_run(mnist, **cfg)
        for k, present in enumerate(live.report.present, start=1):
            same = np.array_equal(before[f"quanv{k}"], live.params[f"quanv{k}"])
            if same == present:
                failures.append(f"{w} trainable quanv{k} present={present} unchanged={same}")
    ok = not failures
    record(8, ok, f"frozen runs and absent layers bit-identical over 5 wirings; failures: {failures or 'none'}", t0)
    assert not failures


# -- 9 -------------------------------------------------------------------


def test_criterion_09_manifest_reproducibility(mnist, tmp_path):
    t0 = time.perf_counter()
    first = tmp_path / "first"
    common = ["--data-dir", str(DATA_DIR)]
    assert cli_main(["train", "--wiring", "(X+O1)+O2", "--epochs", "3", "--samples-per-class", "5",
                     "--seed", "11", "--out-dir", str(first), *common]) == 0
    outputs = []
    for name in ("again", "once_more"):
        assert cli_main(["train", "--manifest", str(first / "manifest.json"), "--out-dir", str(tmp_path / name), *common]) == 0
        outputs.append((tmp_path / name / "metrics.csv").read_bytes())
    manifest = json.loads((first / "manifest.json").read_text())
    ok = outputs[0] == outputs[1] == (first / "metrics.csv").read_bytes()
    record(9, ok, f"3 metrics.csv files byte-identical ({len(outputs[0])} bytes, wiring {manifest['wiring']})", t0)
    assert ok


# -- 10 ------------------------------------------------------------------


def test_criterion_10_idx_parser():
    t0 = time.perf_counter()
    images = bytes.fromhex("00000803" "00000002" "00000002" "00000002") + bytes([0, 255, 1, 2, 3, 4, 5, 6])
    labels = bytes.fromhex("00000801" "00000002") + bytes([4, 2])
    grids = parse_idx_images(images)
    round_trip = write_idx_images(grids) == images and write_idx_labels(parse_idx_labels(labels)) == labels
    order = grids.tolist() == [[[0, 255], [1, 2]], [[3, 4], [5, 6]]]
    rejected = []
    for data, exc in ((labels[:4] + images[4:], BadMagic), (images[:-3], TruncatedPayload), (images[:7], TruncatedPayload)):
        try:
            parse_idx_images(data)
        except exc:
            rejected.append(exc.__name__)
    ok = round_trip and order and len(rejected) == 3
    record(10, ok, f"golden round-trip byte-exact={round_trip}, rejected {rejected}", t0)
    assert ok
