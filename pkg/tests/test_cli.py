import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from resqunn.cli import curves_svg, main
from resqunn.data import write_mnist_dir


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("mnist")
    rng = np.random.default_rng(0)
    labels = np.repeat(np.arange(10), 4).astype(np.uint8)
    images = rng.integers(0, 256, size=(40, 28, 28), dtype=np.uint8)
    write_mnist_dir(images, labels, root)
    return root


def test_grads_none(capsys):
    assert main(["grads", "--wiring", "none", "--layers", "2"]) == 0
    out = capsys.readouterr().out
    assert "layer1: absent" in out and "layer2: present" in out


def test_grads_three_layers_all_present(capsys):
    assert main(["grads", "--wiring", "(O1+O2)+O3", "--layers", "3"]) == 0
    out = capsys.readouterr().out
    assert out.count(": present") == 3 and "absent" not in out


def test_grads_json_file(tmp_path, capsys):
    assert main(["grads", "--wiring", "O1+O2", "--post", "quantum", "--json", "--out-dir", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "grads.json").read_text())
    assert report["agree"] is True
    assert report["layers"]["layer1"] == {"gradient": "present", "path": ["O1", "s2"], "dynamic": "present"}
    assert json.loads(capsys.readouterr().out) == report


def test_grads_forward_reference(capsys):
    assert main(["grads", "--wiring", "O9+X"]) == 2
    assert "O9" in capsys.readouterr().err


def test_grads_syntax_error_points_at_position(capsys):
    assert main(["grads", "--wiring", "(X+O1"]) == 2
    err = capsys.readouterr().err.splitlines()
    assert err[-1].index("^") == 2 + 5


def test_matrix_unknown_suite():
    with pytest.raises(SystemExit) as exc:
        main(["matrix", "four-layer"])
    assert exc.value.code == 2


def test_matrix_three_layer_grads(tmp_path, capsys):
    assert main(["matrix", "three-layer-grads", "--out-dir", str(tmp_path)]) == 0
    with open(tmp_path / "three-layer-grads" / "summary.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 10
    assert {r["wiring"] for r in rows if r["all_present"] == "True"} == {"(O1+O2)+O3", "((X+O1)+O2)+O3"}
    assert all(r["agree"] == "True" for r in rows)


def train_args(data_dir, out, *extra):
    return ["train", "--data-dir", str(data_dir), "--out-dir", str(out), "--epochs", "1",
            "--samples-per-class", "4", *extra]


def test_train_writes_artifacts(data_dir, tmp_path):
    out = tmp_path / "run"
    assert main(train_args(data_dir, out, "--wiring", "X+O1", "--frozen-quanv")) == 0
    assert {p.name for p in out.iterdir()} == {"metrics.csv", "curves.svg", "manifest.json", "grads.json"}
    lines = (out / "metrics.csv").read_text().splitlines()
    assert lines[0] == "epoch,train_loss,train_acc,val_loss,val_acc" and len(lines) == 3
    svg = (out / "curves.svg").read_text()
    assert 'viewBox="0 0 800 500"' in svg and svg.count("<polyline") == 2
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["trainable_quanv"] is False
    assert manifest["depths"] == [4, 1]
    assert manifest["channel_mode"] == "single"
    grads = json.loads((out / "grads.json").read_text())
    assert grads["layers"]["layer1"]["gradient"] == "absent"
    assert grads["updated"] == {"quanv1": False, "quanv2": False, "dense.weight": True, "dense.bias": True}


def test_train_from_manifest_is_byte_identical(data_dir, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(train_args(data_dir, a, "--wiring", "O1+O2", "--depths", "2,1", "--seed", "7")) == 0
    assert main(["train", "--manifest", str(a / "manifest.json"), "--data-dir", str(data_dir), "--out-dir", str(b)]) == 0
    assert (a / "metrics.csv").read_bytes() == (b / "metrics.csv").read_bytes()
    assert json.loads((b / "manifest.json").read_text())["depths"] == [2, 1]


def test_train_quantum_defaults_to_four_classes(data_dir, tmp_path):
    out = tmp_path / "q"
    assert main(train_args(data_dir, out, "--wiring", "O1+O2", "--post", "quantum")) == 0
    assert json.loads((out / "manifest.json").read_text())["config"]["classes"] == [0, 1, 2, 3]


def test_train_quantum_with_ten_classes_is_rejected(data_dir, tmp_path, capsys):
    assert main(train_args(data_dir, tmp_path, "--post", "quantum", "--classes", "10")) == 2
    assert "4 classes" in capsys.readouterr().err


def test_train_missing_data(tmp_path, capsys):
    assert main(train_args(tmp_path / "nowhere", tmp_path / "out")) == 2
    assert "not found" in capsys.readouterr().err


def test_curves_svg_is_deterministic():
    history = [dict(epoch=e, train_acc=e / 4, val_acc=e / 5) for e in range(3)]
    assert curves_svg(history, "X+O1") == curves_svg(history, "X+O1")
    assert "X+O1 accuracy" in curves_svg(history, "X+O1")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "resqunn", "grads", "--wiring", "X+O2"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "layer1: absent" in proc.stdout
