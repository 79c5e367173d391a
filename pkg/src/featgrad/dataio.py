"""Datasets: svmlight/CSV loading, stratified splits, subsampling, synthetic data."""
import csv
from dataclasses import dataclass
import math

import numpy as np
import scipy.sparse as sp


class DataFormatError(ValueError):
    """A data file could not be parsed."""


class ConfigError(ValueError):
    """Invalid split or generator settings."""


@dataclass(frozen=True)
class Dataset:
    """Examples with binary ``{-1, +1}`` labels.

    ``X`` is either a dense ``(n_rows, n_features)`` array or a CSR matrix
    whose rows hold strictly increasing column indices.
    """

    X: object
    y: np.ndarray
    name: str = ""

    def __post_init__(self):
        X = self.X
        if sp.issparse(X):
            X = sp.csr_matrix(X, dtype=np.float64)
            X.sort_indices()
            X.sum_duplicates()
        else:
            X = np.ascontiguousarray(X, dtype=np.float64)
            if X.ndim != 2:
                raise ValueError(f"X must be 2-D, got shape {X.shape}")
        y = np.asarray(self.y).ravel()
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"{X.shape[0]} rows but {y.shape[0]} labels")
        if not np.all((y == 1) | (y == -1)):
            raise ValueError("labels must be -1 or +1")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y.astype(np.int8))

    @property
    def n_rows(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    @property
    def is_sparse(self):
        return sp.issparse(self.X)

    def dense(self):
        return self.X.toarray() if self.is_sparse else self.X

    def row_entries(self, i):
        """Return ``(indices, values)`` of the nonzeros in row ``i``."""
        if self.is_sparse:
            lo, hi = self.X.indptr[i], self.X.indptr[i + 1]
            return self.X.indices[lo:hi].copy(), self.X.data[lo:hi].copy()
        row = self.X[i]
        idx = np.flatnonzero(row)
        return idx, row[idx]

    def take(self, rows, name=None):
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.X[rows], self.y[rows], self.name if name is None else name)

    def select_features(self, columns):
        columns = np.asarray(columns, dtype=np.int64)
        return Dataset(self.X[:, columns], self.y, self.name)

    def class_counts(self):
        return int(np.sum(self.y == 1)), int(np.sum(self.y == -1))


def binarize_labels(values):
    values = np.asarray(values, dtype=np.float64)
    return np.where(values > 0, 1, -1).astype(np.int8)


def load_svmlight(path, d_hint=None, name=None):
    """Parse a ``label idx:val ...`` file with 1-based indices into a CSR dataset.

    Positive labels map to +1 and everything else to -1. The feature count
    is the larger of the largest index seen and ``d_hint``.
    """
    labels, indptr, indices, values = [], [0], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                labels.append(float(parts[0]))
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: bad label {parts[0]!r}") from None
            prev = 0
            for tok in parts[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise DataFormatError(f"{path}:{lineno}: expected idx:val, got {tok!r}")
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise DataFormatError(f"{path}:{lineno}: bad entry {tok!r}") from None
                if idx <= 0:
                    raise DataFormatError(f"{path}:{lineno}: index {idx} is not 1-based")
                if idx <= prev:
                    raise DataFormatError(
                        f"{path}:{lineno}: indices must be strictly increasing ({prev} then {idx})"
                    )
                prev = idx
                indices.append(idx - 1)
                values.append(val)
            indptr.append(len(indices))
    n_features = max(indices) + 1 if indices else 0
    if d_hint is not None:
        n_features = max(n_features, int(d_hint))
    X = sp.csr_matrix(
        (np.asarray(values, dtype=np.float64), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(labels), n_features),
    )
    return Dataset(X, binarize_labels(labels), name if name is not None else str(path))


def write_svmlight(ds, path):
    X = ds.X if ds.is_sparse else sp.csr_matrix(ds.X)
    with open(path, "w") as fh:
        for i in range(ds.n_rows):
            lo, hi = X.indptr[i], X.indptr[i + 1]
            entries = " ".join(
                f"{j + 1}:{v!r}" for j, v in zip(X.indices[lo:hi].tolist(), X.data[lo:hi].tolist())
            )
            label = "+1" if ds.y[i] > 0 else "-1"
            fh.write(f"{label} {entries}\n" if entries else f"{label}\n")


def load_csv(path, label_column=0, name=None):
    """Load a rectangular numeric CSV with a header row into a dense dataset.

    ``label_column`` is a column position or a header name.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if isinstance(label_column, str):
            if label_column not in header:
                raise DataFormatError(f"{path}: no column named {label_column!r}")
            label_column = header.index(label_column)
        width = len(header)
        if not 0 <= label_column < width:
            raise DataFormatError(f"{path}: label column {label_column} out of range")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DataFormatError(f"{path}:{lineno}: expected {width} cells, got {len(row)}")
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise DataFormatError(f"{path}:{lineno}: non-numeric cell") from None
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    data = np.asarray(rows, dtype=np.float64)
    y = binarize_labels(data[:, label_column])
    X = np.delete(data, label_column, axis=1)
    return Dataset(X, y, name if name is not None else str(path))


def write_csv(ds, path):
    X = ds.dense()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"f{j}" for j in range(ds.n_features)])
        for i in range(ds.n_rows):
            writer.writerow([int(ds.y[i])] + [repr(float(v)) for v in X[i]])


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    validation_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError(f"train_fraction must be in (0, 1), got {self.train_fraction}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigError(
                f"validation_fraction must be in [0, 1), got {self.validation_fraction}"
            )
        if self.train_fraction + self.validation_fraction >= 1.0:
            raise ConfigError("train_fraction + validation_fraction must be < 1")


def _apportion(total, weights, caps):
    # largest-remainder rounding of total across weights, respecting caps
    weights = np.asarray(weights, dtype=np.float64)
    if total == 0 or weights.sum() == 0:
        return np.zeros(len(weights), dtype=np.int64)
    quota = total * weights / weights.sum()
    counts = np.minimum(np.floor(quota).astype(np.int64), caps)
    order = np.argsort(-(quota - np.floor(quota)), kind="stable")
    while counts.sum() < total:
        for c in order:
            if counts.sum() >= total:
                break
            if counts[c] < caps[c]:
                counts[c] += 1
    return counts


def split(ds, spec):
    """Stratified shuffle split into ``(train, validation, test)``."""
    if ds.n_rows < 3:
        raise ConfigError(f"need at least 3 rows to split, got {ds.n_rows}")
    n = ds.n_rows
    n_train = int(math.floor(spec.train_fraction * n + 0.5))
    n_val = int(math.floor(spec.validation_fraction * n + 0.5))
    n_val = min(n_val, n - n_train)
    rng = np.random.default_rng(spec.seed)
    groups = [rng.permutation(np.flatnonzero(ds.y == c)) for c in (1, -1)]
    sizes = np.array([len(g) for g in groups])
    t = _apportion(n_train, sizes, sizes)
    v = _apportion(n_val, sizes - t, sizes - t)
    parts = [[], [], []]
    for g, tc, vc in zip(groups, t, v):
        parts[0].append(g[:tc])
        parts[1].append(g[tc : tc + vc])
        parts[2].append(g[tc + vc :])
    out = []
    for label, chunks in zip(("train", "validation", "test"), parts):
        idx = rng.permutation(np.concatenate(chunks))
        out.append(ds.take(idx, name=f"{ds.name}:{label}"))
    return tuple(out)


def subsample(ds, m, seed=0):
    """Draw ``min(m, n_rows)`` rows without replacement."""
    if m < 1:
        raise ConfigError(f"subsample size must be >= 1, got {m}")
    rng = np.random.default_rng(seed)
    idx = rng.permutation(ds.n_rows)[: min(int(m), ds.n_rows)]
    return ds.take(idx)


@dataclass(frozen=True)
class SynthSpec:
    n_rows: int = 1000
    n_features: int = 100
    support_size: int = 10
    noise_std: float = 1.0
    feature_correlation: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_rows < 1 or self.n_features < 1:
            raise ConfigError("n_rows and n_features must be positive")
        if not 0 <= self.support_size <= self.n_features:
            raise ConfigError("support_size must be in [0, n_features]")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be nonnegative")
        if not 0.0 <= self.feature_correlation < 1.0:
            raise ConfigError("feature_correlation must be in [0, 1)")


def generate_synthetic(spec):
    """Equicorrelated Gaussian features with a unit-weight linear label rule.

    Each row is ``sqrt(1-r) * z + sqrt(r) * c`` with ``z`` standard normal and
    a shared scalar ``c`` per row, so every feature pair has correlation ``r``.
    The label is the sign of the support-feature sum plus Gaussian noise.
    Returns the dataset and the sorted support indices.
    """
    rng = np.random.default_rng(spec.seed)
    r = spec.feature_correlation
    support = np.sort(rng.choice(spec.n_features, size=spec.support_size, replace=False))
    common = rng.standard_normal(spec.n_rows)
    X = math.sqrt(1.0 - r) * rng.standard_normal((spec.n_rows, spec.n_features))
    X += math.sqrt(r) * common[:, None]
    latent = X[:, support].sum(axis=1) + spec.noise_std * rng.standard_normal(spec.n_rows)
    y = np.where(latent >= 0, 1, -1).astype(np.int8)
    name = f"synth-n{spec.n_rows}-d{spec.n_features}-s{spec.support_size}-seed{spec.seed}"
    return Dataset(X, y, name), support


def true_residual_variance(spec):
    """Residual variance of the best linear predictor of the ±1 label.

    For jointly Gaussian ``(x, latent)`` the covariance of ``x`` with
    ``sign(latent)`` is ``sqrt(2/pi) * cov(x, latent) / sd(latent)``, so the
    explained share is ``(2/pi) * var(signal) / var(latent)``.
    """
    m = spec.support_size
    r = spec.feature_correlation
    signal = m + r * m * (m - 1)
    total = signal + spec.noise_std ** 2
    if total == 0:
        return 1.0
    return 1.0 - (2.0 / math.pi) * signal / total
