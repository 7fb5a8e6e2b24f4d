"""Write MNIST IDX files into ./data/mnist.

If the four original files are already somewhere on disk, copy them into the
data directory instead. Without network access this script falls back to the
5000-image MNIST subset (500 per digit) that ships inside the ``mlxtend``
wheel (``pip install mlxtend``) and writes it out as a standard
``train-images-idx3-ubyte`` / ``train-labels-idx1-ubyte`` pair, which is enough
for the 200-per-class experiments.
"""

import sys
from pathlib import Path

import numpy as np

from resqunn.data import load_mnist, write_mnist_dir

out_dir = Path(sys.argv[1] if len(sys.argv) > 1 else "data/mnist")

try:
    from mlxtend.data import mnist_data
except ImportError:
    sys.exit("mlxtend is not installed; place the MNIST IDX files in " + str(out_dir) + " by hand")

X, y = mnist_data()
images = X.reshape(-1, 28, 28).astype(np.uint8)
paths = write_mnist_dir(images, y.astype(np.uint8), out_dir)
for p in paths:
    print("wrote", p)

raw = load_mnist(out_dir)
print(len(raw.labels), "images; per class:", np.bincount(raw.labels))
