"""Dataset construction for the PU regime.

A fully labeled sample is turned into positive-unlabeled training data under
SCAR: a uniform random subset of the positives becomes the labeled set X_L,
while the unlabeled pool X_U keeps the entire original sample (case-control
scenario, so selected positives also remain in X_U). Ground-truth labels are
carried along for evaluation only.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ConfigError, ContractError, DataFormatError
from .rng import TAG_LABELED_SHUFFLE, TAG_UNLABELED_SHUFFLE, derive_rng

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


def _check_finite(x: np.ndarray, name: str) -> None:
    if x.size and not np.isfinite(x).all():
        raise ContractError(f"{name} contains NaN or Inf values")


@dataclass(frozen=True)
class LabeledDataset:
    """Fully labeled sample: float features (n, d) and integer labels (n,)."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if features.ndim != 2:
            raise ContractError(f"features must be 2-d, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise ContractError(
                f"labels shape {labels.shape} does not match {features.shape[0]} rows"
            )
        _check_finite(features, "features")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def is_binary(self) -> bool:
        return bool(np.isin(self.labels, (0, 1)).all())


@dataclass(frozen=True)
class PUDataset:
    """PU training data: labeled positives X_L, unlabeled pool X_U, class prior.

    `y_unlabeled` holds the hidden ground-truth labels of X_U when known
    (synthetic or binarized sources); it is used for evaluation only and never
    enters training.
    """

    x_labeled: np.ndarray
    x_unlabeled: np.ndarray
    class_prior: float
    y_unlabeled: np.ndarray | None = None

    def __post_init__(self):
        xl = np.asarray(self.x_labeled, dtype=np.float64)
        xu = np.asarray(self.x_unlabeled, dtype=np.float64)
        if xl.ndim != 2 or xu.ndim != 2:
            raise ContractError("x_labeled and x_unlabeled must be 2-d arrays")
        if xu.shape[0] < 1:
            raise ContractError("unlabeled pool must contain at least one example")
        if xl.shape[0] and xl.shape[1] != xu.shape[1]:
            raise ContractError(
                f"feature dims differ: labeled {xl.shape[1]} vs unlabeled {xu.shape[1]}"
            )
        if not (0.0 < self.class_prior < 1.0):
            raise ConfigError(f"class_prior must lie in (0, 1), got {self.class_prior}")
        _check_finite(xl, "x_labeled")
        _check_finite(xu, "x_unlabeled")
        if self.y_unlabeled is not None:
            yu = np.asarray(self.y_unlabeled, dtype=np.int64)
            if yu.shape != (xu.shape[0],):
                raise ContractError("y_unlabeled length does not match x_unlabeled")
            object.__setattr__(self, "y_unlabeled", yu)
        object.__setattr__(self, "x_labeled", xl)
        object.__setattr__(self, "x_unlabeled", xu)

    @property
    def n_labeled(self) -> int:
        return self.x_labeled.shape[0]

    @property
    def n_unlabeled(self) -> int:
        return self.x_unlabeled.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.x_unlabeled.shape[1]


@dataclass(frozen=True)
class BatchPlan:
    """Mini-batch schedule; shuffling is a pure function of (seed, epoch_index)."""

    batch_size: int
    seed: int
    epoch_index: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epoch_index < 0:
            raise ConfigError(f"epoch_index must be >= 0, got {self.epoch_index}")


@dataclass(frozen=True)
class Batch:
    """One training step's draw: features plus the source indices."""

    x_labeled: np.ndarray
    x_unlabeled: np.ndarray
    labeled_indices: np.ndarray
    unlabeled_indices: np.ndarray


def make_gaussian_mixture(
    n: int,
    prior: float,
    mean_pos,
    mean_neg,
    stddev: float,
    seed: int,
) -> LabeledDataset:
    """Two isotropic Gaussians: label ~ Bernoulli(prior), x ~ N(mean_label, stddev^2 I).

    `prior` may be 0 or 1 (degenerate single-class sample); PU splitting later
    requires a prior strictly inside (0, 1).
    """
    mean_pos = np.asarray(mean_pos, dtype=np.float64)
    mean_neg = np.asarray(mean_neg, dtype=np.float64)
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if not (0.0 <= prior <= 1.0):
        raise ConfigError(f"prior must lie in [0, 1], got {prior}")
    if not stddev > 0:
        raise ConfigError(f"stddev must be > 0, got {stddev}")
    if mean_pos.shape != mean_neg.shape or mean_pos.ndim != 1:
        raise ConfigError("mean vectors must be 1-d and of equal length")
    rng = derive_rng(seed)
    labels = (rng.random(n) < prior).astype(np.int64)
    means = np.where(labels[:, None] == 1, mean_pos[None, :], mean_neg[None, :])
    features = means + stddev * rng.standard_normal((n, mean_pos.size))
    return LabeledDataset(features, labels)


def scar_split(
    full: LabeledDataset,
    n_labeled: int,
    prior_override: float | None = None,
    *,
    seed: int,
) -> PUDataset:
    """SCAR split: X_L is a uniform subset of the positives, X_U the full sample.

    Selection is independent of features. The class prior defaults to the
    empirical positive fraction of `full`.
    """
    if not full.is_binary():
        raise ContractError("scar_split requires binary {0,1} labels")
    positives = np.flatnonzero(full.labels == 1)
    if n_labeled < 0 or n_labeled > positives.size:
        raise ConfigError(
            f"n_labeled={n_labeled} exceeds the {positives.size} available positives"
        )
    rng = derive_rng(seed)
    chosen = rng.choice(positives, size=n_labeled, replace=False)
    prior = float(prior_override) if prior_override is not None else empirical_prior(full)
    return PUDataset(
        x_labeled=full.features[chosen],
        x_unlabeled=full.features.copy(),
        class_prior=prior,
        y_unlabeled=full.labels.copy(),
    )


def binarize(dataset: LabeledDataset, positive_classes) -> LabeledDataset:
    """Map a multi-class dataset to binary: 1 iff the class id is in `positive_classes`."""
    positive_classes = set(int(c) for c in positive_classes)
    if not positive_classes:
        raise ConfigError("positive_classes must be non-empty")
    observed = set(np.unique(dataset.labels).tolist())
    unknown = positive_classes - observed
    if unknown:
        raise ConfigError(f"positive_classes contains unknown class ids: {sorted(unknown)}")
    labels = np.isin(dataset.labels, sorted(positive_classes)).astype(np.int64)
    return LabeledDataset(dataset.features, labels)


def normalize(dataset: LabeledDataset, mean, stddev) -> LabeledDataset:
    """Per-channel affine transform x -> (x - mean) / stddev."""
    mean = np.asarray(mean, dtype=np.float64)
    stddev = np.asarray(stddev, dtype=np.float64)
    if not (stddev > 0).all():
        raise ConfigError("stddev components must all be > 0")
    return LabeledDataset((dataset.features - mean) / stddev, dataset.labels)


def empirical_prior(dataset: LabeledDataset) -> float:
    """Positive fraction of a fully labeled binary dataset."""
    if len(dataset) == 0:
        raise ConfigError("empirical_prior of an empty dataset is undefined")
    if not dataset.is_binary():
        raise ContractError("empirical_prior requires binary {0,1} labels")
    return float(dataset.labels.mean())


def _read_exact(fh, n_bytes: int, path: str, offset: int) -> bytes:
    buf = fh.read(n_bytes)
    if len(buf) != n_bytes:
        raise DataFormatError(
            f"{path}: truncated file, expected {n_bytes} bytes at offset {offset}, "
            f"got {len(buf)}"
        )
    return buf


def load_idx_images(path) -> np.ndarray:
    """Parse a big-endian IDX image file into (n, rows*cols) floats in [0, 1]."""
    path = str(path)
    with open(path, "rb") as fh:
        magic, n, rows, cols = struct.unpack(">IIII", _read_exact(fh, 16, path, 0))
        if magic != IDX_IMAGES_MAGIC:
            raise DataFormatError(
                f"{path}: bad magic number 0x{magic:08x} at offset 0, "
                f"expected 0x{IDX_IMAGES_MAGIC:08x}"
            )
        pixels = np.frombuffer(_read_exact(fh, n * rows * cols, path, 16), dtype=np.uint8)
    return pixels.reshape(n, rows * cols).astype(np.float64) / 255.0


def load_idx_labels(path) -> np.ndarray:
    """Parse a big-endian IDX label file into an int vector."""
    path = str(path)
    with open(path, "rb") as fh:
        magic, n = struct.unpack(">II", _read_exact(fh, 8, path, 0))
        if magic != IDX_LABELS_MAGIC:
            raise DataFormatError(
                f"{path}: bad magic number 0x{magic:08x} at offset 0, "
                f"expected 0x{IDX_LABELS_MAGIC:08x}"
            )
        labels = np.frombuffer(_read_exact(fh, n, path, 8), dtype=np.uint8)
    return labels.astype(np.int64)


def load_csv(path, has_header: bool = False) -> LabeledDataset:
    """Load a CSV of d feature columns followed by one integer label column.

    UTF-8, '.' decimal separator. An empty file yields an empty dataset.
    """
    path = str(path)
    rows: list[list[float]] = []
    labels: list[int] = []
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for line_no, row in enumerate(reader, start=1):
            if has_header and line_no == 1:
                continue
            if not row:
                continue
            if width is None:
                width = len(row)
                if width < 2:
                    raise DataFormatError(
                        f"{path}: line {line_no}: need at least one feature column "
                        f"and a label column, got {width} columns"
                    )
            elif len(row) != width:
                raise DataFormatError(
                    f"{path}: line {line_no}: expected {width} columns, got {len(row)}"
                )
            try:
                feats = [float(v) for v in row[:-1]]
            except ValueError as exc:
                raise DataFormatError(
                    f"{path}: line {line_no}: non-numeric feature cell ({exc})"
                ) from exc
            if not all(np.isfinite(feats)):
                raise DataFormatError(f"{path}: line {line_no}: non-finite feature value")
            try:
                label = int(row[-1])
            except ValueError as exc:
                raise DataFormatError(
                    f"{path}: line {line_no}: non-integer label cell {row[-1]!r}"
                ) from exc
            rows.append(feats)
            labels.append(label)
    if not rows:
        return LabeledDataset(np.zeros((0, 0)), np.zeros((0,), dtype=np.int64))
    return LabeledDataset(np.array(rows, dtype=np.float64), np.array(labels, dtype=np.int64))


def load_dataset(path, fmt: str, labels_path=None, has_header: bool = False) -> LabeledDataset:
    """Load a multi-class dataset from disk.

    fmt="csv": one row per example, last column the integer label.
    fmt="idx": `path` is the IDX image file; `labels_path` the IDX label file.
    """
    if fmt == "csv":
        return load_csv(path, has_header=has_header)
    if fmt == "idx":
        if labels_path is None:
            raise ConfigError("idx format needs both an image file and a labels_path")
        features = load_idx_images(path)
        labels = load_idx_labels(labels_path)
        if labels.shape[0] != features.shape[0]:
            raise DataFormatError(
                f"{path}: {features.shape[0]} images but {labels.shape[0]} labels"
            )
        return LabeledDataset(features, labels)
    raise ConfigError(f"unknown dataset format {fmt!r}, expected 'csv' or 'idx'")


def _labeled_chunks(n_labeled: int, sizes: list[int], rng: np.random.Generator):
    """Yield index chunks of the given sizes, cycling through fresh shuffles of X_L."""
    queue: list[int] = []
    for size in sizes:
        while len(queue) < size:
            queue.extend(rng.permutation(n_labeled).tolist())
        chunk, queue = queue[:size], queue[size:]
        yield np.array(chunk, dtype=np.int64)


def batch_iter(dataset: PUDataset, plan: BatchPlan) -> Iterator[Batch]:
    """Deterministic mini-batches covering X_U exactly once per epoch.

    Each step draws `batch_size` unlabeled examples (last partial batch kept)
    and a proportional draw of round(step_size * n_L / n_U) labeled examples,
    clamped to >= 1 while X_L is non-empty. The labeled side cycles through
    independent reshuffles of X_L.
    """
    n_u = dataset.n_unlabeled
    n_l = dataset.n_labeled
    if n_u < 1:
        raise ConfigError("batch_iter requires a non-empty unlabeled pool")

    rng_u = derive_rng(plan.seed, plan.epoch_index, TAG_UNLABELED_SHUFFLE)
    perm_u = rng_u.permutation(n_u)
    u_chunks = [perm_u[i : i + plan.batch_size] for i in range(0, n_u, plan.batch_size)]

    if n_l == 0:
        l_chunks = [np.zeros((0,), dtype=np.int64) for _ in u_chunks]
    else:
        rng_l = derive_rng(plan.seed, plan.epoch_index, TAG_LABELED_SHUFFLE)
        sizes = [max(1, int(np.rint(len(c) * n_l / n_u))) for c in u_chunks]
        l_chunks = list(_labeled_chunks(n_l, sizes, rng_l))

    for li, ui in zip(l_chunks, u_chunks):
        yield Batch(
            x_labeled=dataset.x_labeled[li],
            x_unlabeled=dataset.x_unlabeled[ui],
            labeled_indices=li,
            unlabeled_indices=ui,
        )
