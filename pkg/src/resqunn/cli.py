"""Command-line experiment runner: ``resqunn grads | train | matrix``."""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import sys
from pathlib import Path

from .archspec import (
    PAPER_THREE_LAYER,
    PAPER_TWO_LAYER,
    analyze_accessibility,
    enumerate_wirings,
    parse_wiring,
    render_wiring,
)
from .data import data_files, load_mnist, sample_subset
from .errors import ResQuNNError, WiringError, WiringSyntaxError
from .network import DEFAULT_DEPTHS, dynamic_accessibility
from .train import TrainConfig, run_training, write_metrics_csv

SUITES = ("two-layer-classical", "two-layer-quantum", "two-layer-benchmark", "three-layer-grads")
QUANTUM_CLASSES = 4


# ---------------------------------------------------------------------------
# reports


def grads_report(text: str, n_layers: int, postprocessing: str = "classical", seed: int = 0) -> dict:
    spec = parse_wiring(text, n_layers)
    static = analyze_accessibility(spec)
    dynamic = dynamic_accessibility(spec, n_layers, postprocessing, seed)
    report = static.as_dict()
    for k, present in enumerate(dynamic, start=1):
        report["layers"][f"layer{k}"]["dynamic"] = "present" if present else "absent"
    report["postprocessing"] = postprocessing
    report["agree"] = static.present == dynamic
    return report


def format_report(report: dict) -> str:
    lines = [f"wiring: {report['wiring']}"]
    for name, row in report["layers"].items():
        line = f"{name}: {row['gradient']}"
        if "dynamic" in row and row["dynamic"] != row["gradient"]:
            line += f" (dynamic: {row['dynamic']})"
        if row["path"]:
            line += "  via " + " -> ".join(row["path"])
        lines.append(line)
    if not report.get("agree", True):
        lines.append("MISMATCH: static analysis and backward pass disagree")
    return "\n".join(lines)


def curves_svg(history: list, title: str = "") -> str:
    """Train/validation accuracy against epoch as two polylines in an 800x500 box."""
    left, right, top, bottom = 60, 780, 40, 440
    last = max(1, max(row["epoch"] for row in history))

    def pt(epoch, acc):
        return f"{left + (right - left) * epoch / last:.2f},{bottom - (bottom - top) * acc:.2f}"

    out = [
        '<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 800 500" width="800" height="500">',
        '<rect width="800" height="500" fill="white"/>',
        f'<line x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" stroke="black"/>',
    ]
    for tick in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = bottom - (bottom - top) * tick
        out.append(f'<text x="{left - 8}" y="{y + 4:.2f}" font-size="12" text-anchor="end">{tick:.2f}</text>')
    out.append(f'<text x="{(left + right) // 2}" y="480" font-size="14" text-anchor="middle">epoch (0..{last})</text>')
    out.append(f'<text x="{left}" y="24" font-size="14">{_escape(title)} accuracy</text>')
    for key, colour, y in (("train_acc", "#1f77b4", 24), ("val_acc", "#d62728", 44)):
        points = " ".join(pt(row["epoch"], row[key]) for row in history)
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="2" points="{points}"/>')
        out.append(f'<text x="{right - 90}" y="{y}" font-size="13" fill="{colour}">{key}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# train


def config_from_args(args) -> TrainConfig:
    if args.manifest:
        manifest = json.loads(Path(args.manifest).read_text())
        return TrainConfig.from_dict(manifest["config"])
    n_classes = args.classes or (QUANTUM_CLASSES if args.post == "quantum" else 10)
    return TrainConfig(
        wiring=args.wiring,
        n_layers=args.layers,
        depths=_depths(args.depths),
        postprocessing=args.post,
        classes=tuple(range(n_classes)),
        samples_per_class=args.samples_per_class,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.lr,
        seed=args.seed,
        trainable_quanv=not args.frozen_quanv,
        channel_mode=args.channel_mode,
    )


def _depths(text):
    if not text:
        return None
    return tuple(int(d) for d in text.split(","))


def train_once(config: TrainConfig, data_dir, out_dir, log=print) -> dict:
    """One run with all artifacts written to ``out_dir``; returns the manifest."""
    spec = parse_wiring(config.wiring, config.n_layers)
    config.wiring = render_wiring(spec)
    if config.depths is None:
        config.depths = DEFAULT_DEPTHS.get(config.n_layers)
    raw = load_mnist(data_dir, "train")
    train, val = sample_subset(raw, config.classes, config.samples_per_class, config.split, config.seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def progress(row):
        log(f"epoch {row['epoch']:>3}  train_loss {row['train_loss']:.4f}  train_acc {row['train_acc']:.4f}"
            f"  val_loss {row['val_loss']:.4f}  val_acc {row['val_acc']:.4f}")

    result = run_training(config, train, val, progress)
    paths = {name: str(out / name) for name in ("metrics.csv", "curves.svg", "manifest.json", "grads.json")}
    write_metrics_csv(result.history, paths["metrics.csv"])
    Path(paths["curves.svg"]).write_text(curves_svg(result.history, config.wiring))
    grads = result.report.as_dict()
    grads["trainable_quanv"] = config.trainable_quanv
    grads["updated"] = {
        p.name: p.trainable and p.name in result.state.moments for p in result.model.parameters()
    }
    Path(paths["grads.json"]).write_text(json.dumps(grads, indent=2) + "\n")
    manifest = {
        "config": config.to_dict(),
        "wiring": config.wiring,
        "angle_scale": config.angle_scale,
        "channel_mode": config.channel_mode,
        "depths": list(result.model.depths),
        "seed": config.seed,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "data": {str(p): _sha256(p) for p in data_files(data_dir, "train")},
        "artifacts": paths,
        "final": result.history[-1],
    }
    Path(paths["manifest.json"]).write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


# ---------------------------------------------------------------------------
# matrix


def _slug(text: str) -> str:
    return text.replace("(", "").replace(")", "").replace("+", "_") or "none"


def run_matrix(suite: str, args, log=print) -> list:
    out_root = Path(args.out_dir) / suite
    rows = []
    if suite == "three-layer-grads":
        named = set(PAPER_THREE_LAYER)
        for spec in enumerate_wirings(3):
            text = render_wiring(spec)
            report = grads_report(text, 3, seed=args.seed)
            present = [report["layers"][f"layer{k}"]["gradient"] == "present" for k in (1, 2, 3)]
            row = {"wiring": text, **{f"layer{k}": report["layers"][f"layer{k}"]["gradient"] for k in (1, 2, 3)},
                   "all_present": all(present), "named": text in named, "agree": report["agree"]}
            log(f"{text:<18} {' '.join(row[f'layer{k}'] for k in (1, 2, 3))}{'  <- all present' if row['all_present'] else ''}")
            rows.append(row)
        _write_rows(rows, out_root / "summary.csv")
        return rows

    quantum = suite == "two-layer-quantum"
    for text in PAPER_TWO_LAYER:
        config = TrainConfig(
            wiring=text,
            n_layers=2,
            postprocessing="quantum" if quantum else "classical",
            classes=tuple(range(QUANTUM_CLASSES if quantum else 10)),
            samples_per_class=args.samples_per_class,
            epochs=args.epochs,
            batch_size=args.batch_size,
            learning_rate=args.lr,
            seed=args.seed,
            trainable_quanv=suite != "two-layer-benchmark",
            channel_mode=args.channel_mode,
        )
        log(f"== {suite}: {text}")
        manifest = train_once(config, args.data_dir, out_root / _slug(text), log=log)
        final = manifest["final"]
        present = analyze_accessibility(parse_wiring(text)).present
        rows.append({
            "wiring": text,
            "gradients": "".join("P" if p else "A" for p in present),
            "trainable_quanv": config.trainable_quanv,
            "final_train_acc": f"{final['train_acc']:.6f}",
            "final_val_acc": f"{final['val_acc']:.6f}",
            "final_val_loss": f"{final['val_loss']:.6f}",
        })
    rows.sort(key=lambda r: -float(r["final_val_acc"]))
    _write_rows(rows, out_root / "summary.csv")
    return rows


def _write_rows(rows: list, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    path.write_text(buf.getvalue())


# ---------------------------------------------------------------------------
# argument parsing


def _training_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples-per-class", type=int, default=200)
    p.add_argument("--channel-mode", choices=("single", "multi"), default="single")
    p.add_argument("--data-dir", default="data/mnist")
    p.add_argument("--out-dir", default="runs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="resqunn", description="Residual quanvolutional network experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("grads", help="gradient accessibility of a wiring (static and dynamic)")
    g.add_argument("--wiring", required=True)
    g.add_argument("--layers", type=int, default=2)
    g.add_argument("--post", choices=("classical", "quantum"), default="classical")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out-dir", default=None, help="also write grads.json here")
    g.add_argument("--json", action="store_true", help="print JSON instead of text")

    t = sub.add_parser("train", help="train one configuration")
    t.add_argument("--wiring", default="none")
    t.add_argument("--layers", type=int, default=2)
    t.add_argument("--post", choices=("classical", "quantum"), default="classical")
    t.add_argument("--classes", type=int, default=None, help="use digits 0..n-1 (default 10, or 4 with --post quantum)")
    t.add_argument("--frozen-quanv", action="store_true")
    t.add_argument("--depths", default=None, help="comma list, one repetition count per layer")
    t.add_argument("--manifest", default=None, help="rerun the configuration stored in a manifest.json")
    _training_flags(t)

    m = sub.add_parser("matrix", help="run a predefined suite of configurations")
    m.add_argument("suite", choices=SUITES)
    _training_flags(m)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "grads":
            report = grads_report(args.wiring, args.layers, args.post, args.seed)
            print(json.dumps(report, indent=2) if args.json else format_report(report))
            if args.out_dir:
                Path(args.out_dir).mkdir(parents=True, exist_ok=True)
                (Path(args.out_dir) / "grads.json").write_text(json.dumps(report, indent=2) + "\n")
            return 0 if report["agree"] else 1
        if args.command == "train":
            manifest = train_once(config_from_args(args), args.data_dir, args.out_dir)
            print(f"wrote {', '.join(manifest['artifacts'].values())}")
            return 0
        rows = run_matrix(args.suite, args)
        print(f"summary: {Path(args.out_dir) / args.suite / 'summary.csv'} ({len(rows)} rows)")
        return 0
    except WiringSyntaxError as err:
        text = getattr(args, "wiring", "")
        print(f"error: {err}\n  {text}\n  {' ' * err.position}^", file=sys.stderr)
        return 2
    except (WiringError, ResQuNNError, FileNotFoundError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
