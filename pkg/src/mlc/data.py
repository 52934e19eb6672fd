"""Dataset construction: synthetic blobs, CSV ingestion, clean/noisy/test bundles, batching."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .noise import NoiseSpec, inject

log = logging.getLogger(__name__)


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class LabeledSet:
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if self.x.ndim != 2 or self.y.ndim != 1 or self.x.shape[0] != self.y.shape[0]:
            raise DataError(f"LabeledSet shapes disagree: x {self.x.shape}, y {self.y.shape}")

    def __len__(self):
        return self.y.shape[0]

    def take(self, idx) -> "LabeledSet":
        return LabeledSet(self.x[idx], self.y[idx])


@dataclass(frozen=True)
class TrainingData:
    """Everything a trainer may see. Carries no ground truth for the noisy set."""

    clean: LabeledSet
    noisy: LabeledSet
    test: LabeledSet
    num_classes: int


@dataclass(frozen=True)
class DatasetBundle:
    clean: LabeledSet
    noisy: LabeledSet
    test: LabeledSet
    num_classes: int
    _hidden_true_of_noisy: np.ndarray = field(repr=False)

    def training_view(self) -> TrainingData:
        return TrainingData(self.clean, self.noisy, self.test, self.num_classes)

    def hidden_true_of_noisy(self) -> np.ndarray:
        """True labels of the noisy split. Evaluation and analysis only."""
        return self._hidden_true_of_noisy.copy()


def circle_centers(num_classes: int, dim: int, radius: float) -> np.ndarray:
    """Class centers evenly spaced on a circle in the first two coordinates
    (on a line when ``dim == 1``)."""
    centers = np.zeros((num_classes, dim))
    if dim == 1:
        centers[:, 0] = radius * (np.arange(num_classes) - (num_classes - 1) / 2.0)
    else:
        theta = 2.0 * np.pi * np.arange(num_classes) / num_classes
        centers[:, 0] = radius * np.cos(theta)
        centers[:, 1] = radius * np.sin(theta)
    return centers


def gen_blobs(num_classes: int, dim: int, per_class_counts, spread: float, seed: int, center_radius: float = 3.0):
    """Isotropic Gaussian clusters with standard deviation ``spread``.

    ``per_class_counts`` is an int (same for every class) or a sequence of
    length ``num_classes``. Rows are returned in class order; shuffle downstream.
    """
    if num_classes < 2 or dim < 1 or not spread > 0 or not center_radius > 0:
        raise DataError(
            f"gen_blobs: need C >= 2, dim >= 1, spread > 0, radius > 0; got "
            f"C={num_classes}, dim={dim}, spread={spread}, radius={center_radius}"
        )
    counts = np.broadcast_to(np.asarray(per_class_counts, dtype=np.int64), (num_classes,))
    if np.any(counts < 0):
        raise DataError(f"gen_blobs: negative class count in {per_class_counts}")
    rng = np.random.default_rng(seed)
    centers = circle_centers(num_classes, dim, center_radius)
    labels = np.repeat(np.arange(num_classes), counts)
    x = centers[labels] + spread * rng.standard_normal((labels.shape[0], dim))
    return x, labels


def nearest_centroid_predict(x, centers) -> np.ndarray:
    d = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
    return d.argmin(axis=1)


@dataclass(frozen=True)
class CsvSchema:
    label_column: str
    feature_columns: Sequence[str] | None = None  # None: every other column


def load_csv(path, schema: CsvSchema, label_map: dict[str, int] | None = None):
    """Parse a comma-separated file with a header row.

    Returns ``(features, labels, label_map)``. Without ``label_map`` the
    labels are assigned dense ids in sorted order of their string values;
    with one, unseen labels raise :class:`DataError`.
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, expected a header row") from None
        if schema.label_column not in header:
            raise DataError(f"{path}: label column {schema.label_column!r} not in header {header}")
        feat_cols = list(schema.feature_columns) if schema.feature_columns is not None else [
            h for h in header if h != schema.label_column
        ]
        missing = [c for c in feat_cols if c not in header]
        if missing:
            raise DataError(f"{path}: feature columns {missing} not in header")
        li = header.index(schema.label_column)
        fi = [header.index(c) for c in feat_cols]
        rows, raw_labels = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            try:
                rows.append([float(rec[i]) for i in fi])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            raw_labels.append(rec[li].strip())
    if label_map is None:
        label_map = {name: i for i, name in enumerate(sorted(set(raw_labels)))}
    unknown = [(n, lab) for n, lab in enumerate(raw_labels) if lab not in label_map]
    if unknown:
        n, lab = unknown[0]
        raise DataError(f"{path}: unknown label {lab!r} on data row {n + 1}")
    x = np.asarray(rows, dtype=np.float64).reshape(len(rows), len(fi))
    y = np.asarray([label_map[lab] for lab in raw_labels], dtype=np.int64)
    return x, y, dict(label_map)


def export_csv(path, features, labels, feature_names=None, label_column="label", label_names=None) -> None:
    """Write features and labels in the format :func:`load_csv` reads back."""
    features = np.asarray(features, dtype=np.float64)
    names = feature_names or [f"x{i}" for i in range(features.shape[1])]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*names, label_column])
        for row, lab in zip(features, labels):
            w.writerow([repr(float(v)) for v in row] + [label_names[lab] if label_names else str(lab)])


def _stratified_pick(labels, per_class_target: np.ndarray, rng) -> np.ndarray:
    picked = []
    for c, want in enumerate(per_class_target):
        idx = np.flatnonzero(labels == c)
        picked.append(rng.permutation(idx)[:want])
    return np.sort(np.concatenate(picked))


def make_bundle(
    features,
    labels,
    noise: NoiseSpec,
    *,
    clean_count: int | None = None,
    clean_fraction: float | None = None,
    test_count: int | None = None,
    test_fraction: float | None = None,
    seed: int = 0,
    standardize: bool = True,
) -> DatasetBundle:
    """Split rows into test / clean / noisy and corrupt the noisy labels.

    The test split is a uniform random subset. The clean split is stratified
    so per-class counts differ by at most one. Every remaining row goes to the
    noisy split and its label passes through the injector described by
    ``noise``.
    """
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    n, c = y.shape[0], noise.num_classes
    if x.ndim != 2 or x.shape[0] != n:
        raise DataError(f"features {x.shape} do not match {n} labels")
    if np.any((y < 0) | (y >= c)):
        raise DataError(f"labels must lie in [0, {c})")
    if (clean_count is None) == (clean_fraction is None):
        raise DataError("give exactly one of clean_count or clean_fraction")
    if test_count is not None and test_fraction is not None:
        raise DataError("give at most one of test_count or test_fraction")
    rng = np.random.default_rng([seed, 0x5EED])

    n_test = test_count if test_count is not None else int(round((test_fraction or 0.0) * n))
    if not 0 <= n_test < n:
        raise DataError(f"test split of {n_test} rows infeasible for {n} rows")
    order = rng.permutation(n)
    test_idx = np.sort(order[:n_test])
    train_idx = np.sort(order[n_test:])

    n_clean = clean_count if clean_count is not None else int(round(clean_fraction * train_idx.size))
    if not c <= n_clean < train_idx.size:
        raise DataError(
            f"clean split of {n_clean} rows infeasible (need >= {c} classes and < {train_idx.size} training rows)"
        )
    y_train = y[train_idx]
    avail = np.bincount(y_train, minlength=c)
    base, extra = divmod(n_clean, c)
    target = np.full(c, base)
    target[rng.permutation(c)[:extra]] += 1
    short = np.flatnonzero(avail < target)
    if short.size:
        k = int(short[0])
        raise DataError(
            f"class {k} has {avail[k]} training rows but the stratified clean split needs {target[k]}; "
            f"lower clean_count or supply more class-{k} data"
        )
    if np.any(target == 0):
        raise DataError(f"class {int(np.flatnonzero(target == 0)[0])} missing from clean split; raise clean_count")
    clean_local = _stratified_pick(y_train, target, rng)
    noisy_mask = np.ones(train_idx.size, dtype=bool)
    noisy_mask[clean_local] = False
    clean_idx = train_idx[clean_local]
    noisy_idx = train_idx[noisy_mask]

    if standardize:
        mu = x[train_idx].mean(axis=0)
        sd = x[train_idx].std(axis=0)
        sd[sd == 0] = 1.0
        x = (x - mu) / sd

    true_noisy = y[noisy_idx]
    noisy_labels = inject(true_noisy, noise)
    if clean_idx.size > noisy_idx.size:
        log.warning("clean split (%d) larger than noisy split (%d)", clean_idx.size, noisy_idx.size)
    return DatasetBundle(
        clean=LabeledSet(x[clean_idx], y[clean_idx]),
        noisy=LabeledSet(x[noisy_idx], noisy_labels),
        test=LabeledSet(x[test_idx], y[test_idx]),
        num_classes=c,
        _hidden_true_of_noisy=true_noisy,
    )


def batch_iter(split: LabeledSet, batch_size: int, seed: int, epoch: int) -> Iterator[LabeledSet]:
    """One epoch of shuffled mini-batches; the last one may be short."""
    if batch_size < 1:
        raise DataError(f"batch_size must be >= 1, got {batch_size}")
    order = np.random.default_rng([seed, epoch]).permutation(len(split))
    for start in range(0, order.size, batch_size):
        yield split.take(order[start : start + batch_size])


class CyclingBatches:
    """Endless stream of shuffled batches over a small split, reshuffled each pass."""

    def __init__(self, split: LabeledSet, batch_size: int, seed: int):
        self.split = split
        self.batch_size = min(batch_size, len(split))
        self.seed = seed
        self._pass = 0
        self._it = iter(())

    def next(self) -> LabeledSet:
        while True:
            batch = next(self._it, None)
            if batch is not None and len(batch) == self.batch_size:
                return batch
            self._it = batch_iter(self.split, self.batch_size, self.seed, self._pass)
            self._pass += 1
