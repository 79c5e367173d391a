"""Centering and spectral scaling of the data matrix.

Data are centered per feature and divided by the square root of the largest
eigenvalue of the sample covariance, so that the normalized covariance has
spectral norm one and one coefficient set serves every dataset.
"""
from dataclasses import dataclass
import json
import math

import numpy as np
import scipy.sparse as sp

from featgrad.dataio import subsample as _subsample


class DegenerateDataError(ValueError):
    """The covariance has no positive eigenvalue."""


@dataclass(frozen=True)
class PreprocessStats:
    means: np.ndarray
    spectral_scale: float
    fitted_on: int
    label_mean: float = 0.0

    def __post_init__(self):
        means = np.asarray(self.means, dtype=np.float64).ravel()
        if not np.all(np.isfinite(means)):
            raise ValueError("means must be finite")
        if not (self.spectral_scale > 0 and math.isfinite(self.spectral_scale)):
            raise ValueError(f"spectral_scale must be positive, got {self.spectral_scale}")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "spectral_scale", float(self.spectral_scale))
        object.__setattr__(self, "fitted_on", int(self.fitted_on))

    @property
    def n_features(self):
        return self.means.shape[0]

    def save(self, path):
        """Write a sidecar: JSON header next to a binary ``.npy`` of the means."""
        path = str(path)
        np.save(path + ".means.npy", self.means)
        with open(path, "w") as fh:
            json.dump(
                {
                    "spectral_scale": self.spectral_scale,
                    "fitted_on": self.fitted_on,
                    "label_mean": self.label_mean,
                    "n_features": self.n_features,
                    "means_file": path.rsplit("/", 1)[-1] + ".means.npy",
                },
                fh,
                indent=2,
            )

    @classmethod
    def load(cls, path):
        path = str(path)
        with open(path) as fh:
            meta = json.load(fh)
        means = np.load(path + ".means.npy")
        return cls(means, meta["spectral_scale"], meta["fitted_on"], meta.get("label_mean", 0.0))


def top_eigenvalue(matvec, dim, seed=0, tol=1e-6, max_iter=200):
    """Largest eigenvalue of a symmetric PSD operator by power iteration.

    Stops when the Rayleigh quotient changes by less than ``tol`` relative,
    or after ``max_iter`` iterations. Returns ``(eigenvalue, vector)``.
    """
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(dim)
    w /= np.linalg.norm(w)
    lam = 0.0
    for _ in range(max_iter):
        z = matvec(w)
        lam_new = float(w @ z)
        norm = np.linalg.norm(z)
        if norm == 0.0:
            return 0.0, w
        w = z / norm
        if lam_new > 0 and abs(lam_new - lam) < tol * lam_new:
            lam = lam_new
            break
        lam = lam_new
    return lam, w


def fit_stats(ds, subsample_size=None, seed=0, tol=1e-6, max_iter=200, center_labels=False):
    """Estimate feature means and the covariance's top eigenvalue.

    The covariance ``(1/n) Xc^T Xc`` is applied matrix-free; sparse input is
    never densified because centering is folded into each product.
    """
    if subsample_size is not None:
        ds = _subsample(ds, subsample_size, seed)
    n = ds.n_rows
    if n < 2:
        raise DegenerateDataError(f"need at least 2 rows, got {n}")
    X = ds.X
    means = np.asarray(X.mean(axis=0)).ravel()

    def cov_matvec(w):
        r = X @ w - means @ w
        return (X.T @ r - means * r.sum()) / n

    lam, _ = top_eigenvalue(cov_matvec, ds.n_features, seed=seed, tol=tol, max_iter=max_iter)
    sq = X.multiply(X).sum() if sp.issparse(X) else np.einsum("ij,ij->", X, X)
    ref = max(float(sq) / X.shape[0], np.finfo(float).tiny)
    if not lam > 1e-14 * ref:
        raise DegenerateDataError("covariance top eigenvalue is zero (constant data)")
    label_mean = float(np.mean(ds.y)) if center_labels else 0.0
    return PreprocessStats(means, lam, n, label_mean)


def transform_batch(rows, stats):
    """Return dense ``(rows - means) / sqrt(spectral_scale)``."""
    if sp.issparse(rows):
        out = rows.toarray()
    else:
        out = np.array(rows, dtype=np.float64, ndmin=2)
    out -= stats.means
    out /= math.sqrt(stats.spectral_scale)
    return np.ascontiguousarray(out)


def transform_labels(labels, stats=None, center=False):
    """Labels as floats; with ``center`` subtract the fit-time label mean."""
    y = np.asarray(labels, dtype=np.float64).ravel().copy()
    if center:
        if stats is None:
            raise ValueError("centering labels needs fitted stats")
        y -= stats.label_mean
    return y
