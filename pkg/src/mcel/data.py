"""Dataset ingestion, synthetic blob generation, label-noise injection,
splitting and standardization.

Datasets are immutable value objects: an n x d float64 feature matrix plus
integer labels in [0, k). All randomness flows through explicit seeds.
"""

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError, DimensionError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray  # n x d, float64
    labels: np.ndarray  # n, int
    k: int
    feature_names: tuple = None

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        labs = np.asarray(self.labels, dtype=int)
        if feats.ndim != 2 or feats.shape[0] < 1:
            raise DimensionError(f"features must be n x d with n >= 1, got {feats.shape}")
        if labs.shape != (feats.shape[0],):
            raise DimensionError("labels length must match feature rows")
        if not np.all(np.isfinite(feats)):
            raise ValueError("features contain non-finite values")
        if self.k < 1 or labs.min() < 0 or labs.max() >= self.k:
            raise ValueError(f"labels must lie in [0, {self.k})")
        feats.setflags(write=False)
        labs.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", labs)

    @property
    def n(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.k)


@dataclass(frozen=True)
class NoiseSpec:
    """Pairwise label-swap noise: disjoint class pairs, a swap fraction
    applied symmetrically within each pair, and a seed."""

    pairs: tuple  # of (a, b) class-index pairs
    swap_fraction: float
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(tuple(p) for p in self.pairs))
        seen = set()
        for a, b in self.pairs:
            if a == b:
                raise ValueError(f"pair ({a},{b}) repeats a class")
            for c in (a, b):
                if c in seen:
                    raise ValueError(f"class {c} appears in more than one pair")
                seen.add(c)
        if not 0.0 <= self.swap_fraction <= 1.0:
            raise ValueError("swap_fraction must be in [0, 1]")


def load_csv(path, label_column):
    """Load a labeled dataset from a headered CSV file.

    Feature columns parse as float64. String labels map to indices in
    first-appearance order; the mapping is returned alongside the dataset.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if label_column not in header:
            raise DataFormatError(f"{path}: no column named {label_column!r} in header")
        label_idx = header.index(label_column)
        feature_names = tuple(h for i, h in enumerate(header) if i != label_idx)

        rows = []
        raw_labels = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataFormatError(
                    f"{path}: line {lineno}: expected {len(header)} cells, got {len(row)}"
                )
            feats = []
            for col, cell in enumerate(row):
                if col == label_idx:
                    continue
                try:
                    feats.append(float(cell))
                except ValueError:
                    raise DataFormatError(
                        f"{path}: line {lineno}: non-numeric value {cell!r} "
                        f"in column {header[col]!r}"
                    ) from None
            rows.append(feats)
            raw_labels.append(row[label_idx])
        if not rows:
            raise DataFormatError(f"{path}: no data rows")

    mapping = {}
    labels = []
    for lab in raw_labels:
        if lab not in mapping:
            mapping[lab] = len(mapping)
        labels.append(mapping[lab])
    data = LabeledDataset(
        np.array(rows, dtype=float), np.array(labels), len(mapping), feature_names
    )
    return data, mapping


def save_csv(data, path, label_names=None):
    """Write a dataset back out in the load_csv format (label column last)."""
    names = data.feature_names or tuple(f"f{i}" for i in range(data.dim))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(names) + ["label"])
        for x, y in zip(data.features, data.labels):
            lab = label_names[y] if label_names else int(y)
            writer.writerow([repr(float(v)) for v in x] + [lab])


def _read_be_u32(fh, path, what):
    raw = fh.read(4)
    if len(raw) != 4:
        raise DataFormatError(f"{path}: truncated while reading {what} at offset {fh.tell()}")
    return struct.unpack(">I", raw)[0]


def load_idx(images_path, labels_path):
    """Load an MNIST-style big-endian IDX image/label file pair.

    Pixels scale to [0, 1]; each image flattens row-major into one feature row.
    """
    with open(images_path, "rb") as fh:
        magic = _read_be_u32(fh, images_path, "magic")
        if magic != IDX_IMAGES_MAGIC:
            raise DataFormatError(
                f"{images_path}: bad image magic 0x{magic:08x} at offset 0"
            )
        count = _read_be_u32(fh, images_path, "count")
        rows = _read_be_u32(fh, images_path, "rows")
        cols = _read_be_u32(fh, images_path, "cols")
        raw = fh.read(count * rows * cols)
        if len(raw) != count * rows * cols:
            raise DataFormatError(
                f"{images_path}: truncated pixel data at offset {16 + len(raw)}"
            )
    images = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows * cols)

    with open(labels_path, "rb") as fh:
        magic = _read_be_u32(fh, labels_path, "magic")
        if magic != IDX_LABELS_MAGIC:
            raise DataFormatError(
                f"{labels_path}: bad label magic 0x{magic:08x} at offset 0"
            )
        lcount = _read_be_u32(fh, labels_path, "count")
        raw = fh.read(lcount)
        if len(raw) != lcount:
            raise DataFormatError(
                f"{labels_path}: truncated label data at offset {8 + len(raw)}"
            )
    if lcount != count:
        raise DataFormatError(
            f"{labels_path}: label count {lcount} != image count {count}"
        )
    labels = np.frombuffer(raw, dtype=np.uint8).astype(int)
    k = int(labels.max()) + 1 if lcount else 1
    return LabeledDataset(images.astype(float) / 255.0, labels, k)


def gen_blobs(k, per_class, dim, centers=None, spread=1.0, seed=0):
    """Gaussian clusters, one per class, deterministic per seed.

    If centers is None they are drawn uniformly from [-5, 5]^dim using the
    same seed stream.
    """
    if k < 2 or per_class < 1 or spread <= 0:
        raise ValueError("need k >= 2, per_class >= 1, spread > 0")
    rng = np.random.default_rng(seed)
    if centers is None:
        centers = rng.uniform(-5.0, 5.0, size=(k, dim))
    else:
        centers = np.asarray(centers, dtype=float)
        if centers.shape != (k, dim):
            raise DimensionError(f"centers must be {k} x {dim}, got {centers.shape}")
    feats = np.empty((k * per_class, dim))
    labels = np.empty(k * per_class, dtype=int)
    for c in range(k):
        block = slice(c * per_class, (c + 1) * per_class)
        feats[block] = centers[c] + spread * rng.standard_normal((per_class, dim))
        labels[block] = c
    return LabeledDataset(feats, labels, k)


def inject_pairwise_noise(data, spec):
    """Swap a fraction of labels symmetrically within each designated pair.

    Features are untouched. Returns the noisy dataset and a boolean mask of
    flipped rows.
    """
    for a, b in spec.pairs:
        if not (0 <= a < data.k and 0 <= b < data.k):
            raise ValueError(f"pair ({a},{b}) references a class outside [0,{data.k})")
    rng = np.random.default_rng(spec.seed)
    labels = data.labels.copy()
    mask = np.zeros(data.n, dtype=bool)
    for a, b in spec.pairs:
        for src, dst in ((a, b), (b, a)):
            idx = np.flatnonzero(data.labels == src)
            flip = rng.random(idx.shape[0]) < spec.swap_fraction
            labels[idx[flip]] = dst
            mask[idx[flip]] = True
    return LabeledDataset(data.features, labels, data.k, data.feature_names), mask


def split(data, fractions, seed=0):
    """Seeded shuffle then contiguous slicing into train/val/test.

    A fraction of exactly 0 yields an empty slot (returned as None); any
    other slot receiving zero samples is an error. Every class must appear
    in the train part.
    """
    fractions = [float(f) for f in fractions]
    if len(fractions) != 3 or any(f < 0 for f in fractions):
        raise ValueError("fractions must be three non-negative numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    rng = np.random.default_rng(seed)
    order = rng.permutation(data.n)
    n_train = int(round(fractions[0] * data.n))
    n_val = int(round(fractions[1] * data.n))
    bounds = [0, n_train, n_train + n_val, data.n]
    parts = []
    for i in range(3):
        idx = order[bounds[i]:bounds[i + 1]]
        if idx.size == 0:
            if fractions[i] == 0.0:
                parts.append(None)
                continue
            raise ValueError(f"split part {i} received zero samples")
        parts.append(
            LabeledDataset(data.features[idx], data.labels[idx], data.k, data.feature_names)
        )
    train = parts[0]
    if train is None:
        raise ValueError("train split cannot be empty")
    present = np.bincount(train.labels, minlength=data.k)
    missing = np.flatnonzero(present == 0)
    if missing.size:
        raise ValueError(f"class {int(missing[0])} has no samples in the train split")
    return tuple(parts)


def standardize(train, *others):
    """Per-feature mean/std transform fitted on train only.

    Zero-variance features divide by 1 instead of 0. Returns the transformed
    datasets followed by (mean, std).
    """
    mean = train.features.mean(axis=0)
    std = train.features.std(axis=0)
    std = np.where(std == 0.0, 1.0, std)

    def apply(ds):
        if ds is None:
            return None
        return LabeledDataset(
            (ds.features - mean) / std, ds.labels, ds.k, ds.feature_names
        )

    out = [apply(train)] + [apply(d) for d in others]
    return (*out, mean, std)
