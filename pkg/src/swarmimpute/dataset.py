"""Data ingestion and missingness injection.

IDX image/label containers are read into numpy arrays, pixels are scaled
to [0, 1], and MCAR/MAR masks are generated with an exact per-sample
missing count so that every corrupted record hands the optimizer the same
number of unknowns.

A "dataset" throughout the package is a plain ``float64`` array of shape
``(count, m)``; a batch is the same thing with ``batch_size`` rows.
"""
from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagic,
    IndivisibleCount,
    LabelMismatch,
    LabelOutOfRange,
    RateOutOfRange,
    TooFewFeatures,
    TruncatedFile,
)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

MCAR = "MCAR"
MAR = "MAR"

# slope of the logistic weighting used by the MAR generator
MAR_SLOPE = 8.0


@dataclass(frozen=True)
class RawImageSet:
    count: int
    rows: int
    cols: int
    pixels: np.ndarray  # uint8, shape (count, rows, cols)

    def __post_init__(self):
        if self.pixels.dtype != np.uint8:
            raise ValueError("pixels must be uint8")
        if self.pixels.shape != (self.count, self.rows, self.cols):
            raise ValueError(
                f"pixels shape {self.pixels.shape} does not match "
                f"({self.count}, {self.rows}, {self.cols})"
            )


def _open(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_header(raw: bytes, nints: int, magic: int, path) -> tuple[int, ...]:
    need = 4 * nints
    if len(raw) < need:
        raise TruncatedFile(f"{path}: header needs {need} bytes, file has {len(raw)}")
    values = struct.unpack(f">{nints}I", raw[:need])
    if values[0] != magic:
        raise BadMagic(f"{path}: magic 0x{values[0]:08x}, expected 0x{magic:08x}")
    return values[1:]


def load_idx_images(path) -> RawImageSet:
    with _open(path) as f:
        raw = f.read()
    count, rows, cols = _read_header(raw, 4, IMAGE_MAGIC, path)
    n = count * rows * cols
    body = raw[16:16 + n]
    if len(body) < n:
        raise TruncatedFile(f"{path}: expected {n} pixel bytes, found {len(body)}")
    pixels = np.frombuffer(body, dtype=np.uint8).reshape(count, rows, cols).copy()
    return RawImageSet(count, rows, cols, pixels)


def load_idx_labels(path) -> np.ndarray:
    """Read an IDX label file; returns a uint8 vector of digits 0..9."""
    with _open(path) as f:
        raw = f.read()
    (count,) = _read_header(raw, 2, LABEL_MAGIC, path)
    body = raw[8:8 + count]
    if len(body) < count:
        raise TruncatedFile(f"{path}: expected {count} label bytes, found {len(body)}")
    labels = np.frombuffer(body, dtype=np.uint8).copy()
    bad = np.flatnonzero(labels > 9)
    if bad.size:
        raise LabelOutOfRange(f"{path}: label {labels[bad[0]]} at index {bad[0]}")
    return labels


def idx_image_bytes(images: RawImageSet) -> bytes:
    header = struct.pack(">4I", IMAGE_MAGIC, images.count, images.rows, images.cols)
    return header + images.pixels.tobytes()


def idx_label_bytes(labels) -> bytes:
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">2I", LABEL_MAGIC, labels.size) + labels.tobytes()


def write_idx_images(images: RawImageSet, path) -> None:
    Path(path).write_bytes(idx_image_bytes(images))


def write_idx_labels(labels, path) -> None:
    Path(path).write_bytes(idx_label_bytes(labels))


def normalize(raw: RawImageSet) -> np.ndarray:
    """Flatten each image row-major and divide by 255."""
    return raw.pixels.reshape(raw.count, raw.rows * raw.cols).astype(np.float64) / 255.0


def balanced_batch_indices(labels, batch_count: int, seed: int) -> list[np.ndarray]:
    """Split sample indices into class-balanced batches.

    Indices are shuffled within each class, laid out class by class and
    dealt round-robin, so every batch receives floor or ceil of
    ``class_size / batch_count`` members of each class.
    """
    labels = np.asarray(labels)
    count = labels.size
    if batch_count <= 0 or count % batch_count:
        raise IndivisibleCount(f"{count} samples cannot form {batch_count} equal batches")
    rng = np.random.default_rng(seed)
    order = []
    for cls in np.unique(labels):
        members = np.flatnonzero(labels == cls)
        order.append(rng.permutation(members))
    order = np.concatenate(order)
    return [np.sort(order[b::batch_count]) for b in range(batch_count)]


def make_balanced_minibatches(data: np.ndarray, labels, batch_count: int, seed: int) -> list[np.ndarray]:
    labels = np.asarray(labels)
    if labels.shape != (data.shape[0],):
        raise LabelMismatch(f"{labels.size} labels for {data.shape[0]} samples")
    return [data[idx] for idx in balanced_batch_indices(labels, batch_count, seed)]


@dataclass(frozen=True)
class MaskedDataset:
    """Ground truth plus a boolean mask (True = missing).

    The ground truth stays here for scoring only; imputers receive
    observed values through :meth:`observed`.
    """

    data: np.ndarray
    mask: np.ndarray
    mechanism: str
    rate: float
    seed: int

    def __post_init__(self):
        if self.mask.shape != self.data.shape:
            raise ValueError(f"mask shape {self.mask.shape} != data shape {self.data.shape}")
        self.data.setflags(write=False)
        self.mask.setflags(write=False)

    @property
    def count(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def missing_indices(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.mask[i])

    def observed(self, i: int) -> np.ndarray:
        """Row ``i`` with missing entries replaced by NaN."""
        row = self.data[i].copy()
        row[self.mask[i]] = np.nan
        return row

    def subset(self, rows) -> "MaskedDataset":
        rows = np.asarray(rows)
        return MaskedDataset(self.data[rows].copy(), self.mask[rows].copy(),
                             self.mechanism, self.rate, self.seed)


def _missing_count(rate: float, m: int) -> int:
    if not 0.0 <= rate <= 1.0:
        raise RateOutOfRange(f"rate {rate} outside [0, 1]")
    return int(np.floor(rate * m))


def inject_mcar(data: np.ndarray, rate: float, seed: int) -> MaskedDataset:
    count, m = data.shape
    k = _missing_count(rate, m)
    rng = np.random.default_rng(seed)
    # the k smallest of m iid uniforms index a uniform random k-subset
    keys = rng.random((count, m))
    chosen = np.argsort(keys, axis=1, kind="stable")[:, :k]
    mask = np.zeros((count, m), dtype=bool)
    np.put_along_axis(mask, chosen, True, axis=1)
    return MaskedDataset(data.copy(), mask, MCAR, rate, seed)


def mar_split(m: int) -> tuple[np.ndarray, np.ndarray]:
    """Determinant indices (those below m/2, never missing) and target indices."""
    half = (m + 1) // 2
    return np.arange(half), np.arange(half, m)


def mar_weights(sample: np.ndarray) -> np.ndarray:
    """Selection weights over the target half, a function of the determinant half only.

    A bright determinant half tilts missingness toward the end of the
    target half, a dark one toward its start; an all-zero half is uniform.
    """
    determinant, target = mar_split(sample.size)
    level = float(np.mean(sample[determinant]))
    position = np.linspace(-1.0, 1.0, target.size)
    return 1.0 / (1.0 + np.exp(-MAR_SLOPE * level * position))


def inject_mar(data: np.ndarray, rate: float, seed: int) -> MaskedDataset:
    count, m = data.shape
    if m < 2:
        raise TooFewFeatures("MAR needs at least two features")
    k = _missing_count(rate, m)
    _, target = mar_split(m)
    if k > target.size:
        raise TooFewFeatures(f"{k} missing values exceed the {target.size} target features")
    rng = np.random.default_rng(seed)
    mask = np.zeros((count, m), dtype=bool)
    for i in range(count):
        w = mar_weights(data[i])
        picked = rng.choice(target, size=k, replace=False, p=w / w.sum())
        mask[i, picked] = True
    return MaskedDataset(data.copy(), mask, MAR, rate, seed)


def inject(data: np.ndarray, mechanism: str, rate: float, seed: int) -> MaskedDataset:
    mechanism = mechanism.upper()
    if mechanism == MCAR:
        return inject_mcar(data, rate, seed)
    if mechanism == MAR:
        return inject_mar(data, rate, seed)
    raise ValueError(f"unknown mechanism {mechanism!r}")


# -- persistence: truth.csv + mask.csv + masked.meta -------------------------

def save_masked(masked: MaskedDataset, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    np.savetxt(directory / "truth.csv", masked.data, fmt="%.17g", delimiter=",")
    np.savetxt(directory / "mask.csv", masked.mask.astype(np.uint8), fmt="%d", delimiter=",")
    meta = f"mechanism={masked.mechanism}\nrate={masked.rate!r}\nseed={masked.seed}\n"
    (directory / "masked.meta").write_text(meta)


def load_masked(directory) -> MaskedDataset:
    directory = Path(directory)
    meta = dict(
        line.split("=", 1)
        for line in (directory / "masked.meta").read_text().splitlines()
        if "=" in line
    )
    data = np.loadtxt(directory / "truth.csv", delimiter=",", ndmin=2)
    mask = np.loadtxt(directory / "mask.csv", delimiter=",", dtype=np.uint8, ndmin=2).astype(bool)
    return MaskedDataset(data, mask, meta["mechanism"], float(meta["rate"]), int(meta["seed"]))
