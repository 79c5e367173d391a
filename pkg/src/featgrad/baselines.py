"""Per-feature filter scores: one-way ANOVA F and binned mutual information."""
import numpy as np
import scipy.sparse as sp

_CHUNK = 256


def _require_both_classes(ds):
    pos, neg = ds.class_counts()
    if pos == 0 or neg == 0:
        raise ValueError("filter scores need both classes present")
    return pos, neg


def anova_f_scores(ds):
    """Two-group one-way ANOVA F statistic for every feature.

    Zero within-class variance with nonzero between-class variance scores
    ``+inf``; a constant feature scores 0.
    """
    _require_both_classes(ds)
    n = ds.n_rows
    X = ds.X
    pos = ds.y == 1
    ssb = np.zeros(ds.n_features)
    ssw = np.zeros(ds.n_features)
    grand = np.asarray(X.mean(axis=0)).ravel()
    for mask in (pos, ~pos):
        Xc = X[mask]
        n_c = Xc.shape[0]
        mean_c = np.asarray(Xc.mean(axis=0)).ravel()
        ssb += n_c * (mean_c - grand) ** 2
        if sp.issparse(Xc):
            sq = np.asarray(Xc.multiply(Xc).sum(axis=0)).ravel()
            ssw += np.maximum(sq - n_c * mean_c ** 2, 0.0)
        else:
            ssw += ((Xc - mean_c) ** 2).sum(axis=0)
    scale = ssb + ssw
    tiny = 1e-12 * scale
    f = np.zeros(ds.n_features)
    within_zero = ssw <= tiny
    regular = ~within_zero
    f[regular] = ssb[regular] / (ssw[regular] / (n - 2))
    f[within_zero & (ssb > 0)] = np.inf
    return f


def _column_block(X, lo, hi):
    block = X[:, lo:hi]
    return block.toarray() if sp.issparse(block) else np.asarray(block)


def mutual_info_scores(ds, n_bins=16):
    """Plug-in mutual information (nats) between equal-width bins and the label."""
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    _require_both_classes(ds)
    n = ds.n_rows
    cls = (ds.y == 1).astype(np.int64)
    p_c = np.bincount(cls, minlength=2) / n
    out = np.zeros(ds.n_features)
    for lo in range(0, ds.n_features, _CHUNK):
        hi = min(ds.n_features, lo + _CHUNK)
        block = _column_block(ds.X, lo, hi)
        width = hi - lo
        vmin = block.min(axis=0)
        span = block.max(axis=0) - vmin
        safe = np.where(span > 0, span, 1.0)
        bins = np.floor((block - vmin) / safe * n_bins).astype(np.int64)
        np.clip(bins, 0, n_bins - 1, out=bins)
        bins[:, span == 0] = 0
        # joint index (feature, bin, class) flattened for one bincount
        flat = (np.arange(width) * n_bins)[None, :] + bins
        flat = flat * 2 + cls[:, None]
        joint = np.bincount(flat.ravel(), minlength=width * n_bins * 2).reshape(width, n_bins, 2) / n
        p_b = joint.sum(axis=2, keepdims=True)
        denom = p_b * p_c[None, None, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(joint > 0, joint * np.log(joint / denom), 0.0)
        out[lo:hi] = np.maximum(terms.sum(axis=(1, 2)), 0.0)
    return out


def rank_scores(scores):
    """Indices by descending score; ties go to the lower index."""
    scores = np.asarray(scores, dtype=np.float64)
    return np.lexsort((np.arange(scores.size), -scores))
