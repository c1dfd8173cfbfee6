"""Write IDX files for the real MNIST subset bundled with mlxtend.

mlxtend ships 5000 genuine MNIST digits (500 per class) as a gzipped CSV
(784 pixel bytes then the label per line). This script splits it
per class into a training and a test part and writes the standard IDX
containers, so the rest of the pipeline only ever sees IDX files.

    python scripts/prepare_mnist_subset.py data/mnist
"""
import argparse
import gzip
import importlib.resources
import io
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from swarmimpute.dataset import RawImageSet, write_idx_images, write_idx_labels  # noqa: E402

TRAIN_IMAGES = "mnist5k-train-images-idx3-ubyte"
TRAIN_LABELS = "mnist5k-train-labels-idx1-ubyte"
TEST_IMAGES = "mnist5k-test-images-idx3-ubyte"
TEST_LABELS = "mnist5k-test-labels-idx1-ubyte"


def bundled_csv() -> bytes:
    ref = importlib.resources.files("mlxtend.data") / "data" / "mnist_5k.csv.gz"
    return gzip.decompress(ref.read_bytes())


def prepare(out_dir, test_per_class: int = 100, seed: int = 0) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table = np.loadtxt(io.BytesIO(bundled_csv()), delimiter=",", dtype=np.int64)
    pixels = table[:, :784].astype(np.uint8)
    labels = table[:, 784].astype(np.uint8)

    rng = np.random.default_rng(seed)
    test_idx = []
    for digit in range(10):
        members = np.flatnonzero(labels == digit)
        test_idx.append(rng.choice(members, size=test_per_class, replace=False))
    test_idx = np.sort(np.concatenate(test_idx))
    is_test = np.zeros(labels.size, dtype=bool)
    is_test[test_idx] = True
    # interleave so that any prefix of either split is roughly class-balanced
    train_idx = _interleave(np.flatnonzero(~is_test), labels, rng)
    test_idx = _interleave(test_idx, labels, rng)

    for idx, img_name, lab_name in ((train_idx, TRAIN_IMAGES, TRAIN_LABELS),
                                    (test_idx, TEST_IMAGES, TEST_LABELS)):
        images = RawImageSet(idx.size, 28, 28, pixels[idx].reshape(-1, 28, 28))
        write_idx_images(images, out_dir / img_name)
        write_idx_labels(labels[idx], out_dir / lab_name)
    return out_dir


def _interleave(idx, labels, rng):
    by_class = [rng.permutation(idx[labels[idx] == d]) for d in range(10)]
    longest = max(len(c) for c in by_class)
    out = [c[k] for k in range(longest) for c in by_class if k < len(c)]
    return np.asarray(out)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out_dir", nargs="?", default="data/mnist")
    parser.add_argument("--test-per-class", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    out = prepare(args.out_dir, args.test_per_class, args.seed)
    print(f"wrote IDX files to {out}")


if __name__ == "__main__":
    main()
