"""MNIST IDX files and class-balanced subsets."""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import BadMagic, IDXFormatError, InsufficientSamples, TruncatedPayload

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def _header(data: bytes, magic: int, n_dims: int) -> tuple:
    size = 4 * (1 + n_dims)
    if len(data) < size:
        raise TruncatedPayload(f"header needs {size} bytes, file has {len(data)}")
    found, *dims = struct.unpack(f">{1 + n_dims}I", data[:size])
    if found != magic:
        raise BadMagic(f"magic 0x{found:08x}, expected 0x{magic:08x}")
    return dims, size


def _payload(data: bytes, offset: int, count: int) -> np.ndarray:
    body = data[offset:]
    if len(body) < count:
        raise TruncatedPayload(f"payload has {len(body)} bytes, header promises {count}")
    if len(body) > count:
        raise IDXFormatError(f"{len(body) - count} unexpected trailing bytes")
    return np.frombuffer(body, dtype=np.uint8)


def parse_idx_images(data: bytes) -> np.ndarray:
    """Big-endian IDX3 image file -> ``uint8`` array ``(n, rows, cols)``."""
    (n, rows, cols), offset = _header(data, IMAGES_MAGIC, 3)
    return _payload(data, offset, n * rows * cols).reshape(n, rows, cols)


def parse_idx_labels(data: bytes) -> np.ndarray:
    (n,), offset = _header(data, LABELS_MAGIC, 1)
    return _payload(data, offset, n)


def write_idx_images(images: np.ndarray) -> bytes:
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    return struct.pack(">4I", IMAGES_MAGIC, n, rows, cols) + images.tobytes()


def write_idx_labels(labels: np.ndarray) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">2I", LABELS_MAGIC, labels.size) + labels.tobytes()


def _read(path: Path) -> bytes:
    if path.exists():
        return path.read_bytes()
    gz = path.with_name(path.name + ".gz")
    if gz.exists():
        return gzip.decompress(gz.read_bytes())
    raise FileNotFoundError(f"{path} (or {gz.name}) not found")


@dataclass(frozen=True)
class RawMnist:
    images: np.ndarray  # (n, 28, 28) uint8
    labels: np.ndarray  # (n,) uint8


def load_mnist(data_dir, split: str = "train") -> RawMnist:
    img_name, lbl_name = FILES[split]
    root = Path(data_dir)
    images = parse_idx_images(_read(root / img_name))
    labels = parse_idx_labels(_read(root / lbl_name))
    if len(images) != len(labels):
        raise IDXFormatError(f"{len(images)} images but {len(labels)} labels")
    return RawMnist(images, labels)


def data_files(data_dir, split: str = "train") -> list:
    root = Path(data_dir)
    found = []
    for name in FILES[split]:
        p = root / name
        found.append(p if p.exists() else p.with_name(name + ".gz"))
    return found


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray  # (n, 28, 28, 1) float in [0, 1]
    labels: np.ndarray  # digit labels, each in class_list
    class_list: tuple
    source_index: np.ndarray  # rows of the source file, for provenance

    def __len__(self):
        return len(self.labels)

    @property
    def targets(self) -> np.ndarray:
        """Labels as indices into ``class_list``."""
        lookup = {c: i for i, c in enumerate(self.class_list)}
        return np.array([lookup[int(c)] for c in self.labels], dtype=int)


def sample_subset(source: RawMnist, classes: Sequence[int], per_class: int,
                  split: float = 0.8, seed: int = 0) -> tuple:
    """Stratified sample without replacement, split per class into (train, val).

    Pixels are scaled to [0, 1] by dividing by 255.
    """
    classes = tuple(int(c) for c in classes)
    n_train = int(round(per_class * split))
    rng = np.random.default_rng(seed)
    train_idx, val_idx = [], []
    for c in classes:
        pool = np.flatnonzero(source.labels == c)
        if len(pool) < per_class:
            raise InsufficientSamples(f"class {c} has {len(pool)} examples, {per_class} requested")
        chosen = rng.choice(pool, size=per_class, replace=False)
        train_idx.append(chosen[:n_train])
        val_idx.append(chosen[n_train:])
    train_idx = rng.permutation(np.concatenate(train_idx))
    val_idx = rng.permutation(np.concatenate(val_idx))
    return _subset(source, train_idx, classes), _subset(source, val_idx, classes)


def _subset(source: RawMnist, idx: np.ndarray, classes: tuple) -> Dataset:
    images = source.images[idx].astype(float)[..., None] / 255.0
    return Dataset(images, source.labels[idx].astype(int), classes, idx)


def write_mnist_dir(images: np.ndarray, labels: np.ndarray, data_dir, split: str = "train") -> list:
    """Write images ``(n, 28, 28)`` and labels as the standard IDX file pair."""
    root = Path(data_dir)
    root.mkdir(parents=True, exist_ok=True)
    img_name, lbl_name = FILES[split]
    (root / img_name).write_bytes(write_idx_images(images))
    (root / lbl_name).write_bytes(write_idx_labels(labels))
    return [root / img_name, root / lbl_name]
