"""Representation-quality battery: distance correlation, distance-regression
probe, covariance spectrum, k-nearest-neighbor probe, ROC-AUC, and alignment
histograms.
"""

from __future__ import annotations

import numpy as np

from ._linalg import jacobi_eigh
from .errors import DegenerateVariance

COLLAPSE_FLOOR = 1e-300


def _pairwise_sample(n, max_pairs, rng):
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if len(pairs) > max_pairs:
        chosen = rng.choice(len(pairs), size=max_pairs, replace=False)
        pairs = [pairs[int(k)] for k in sorted(chosen)]
    return pairs


def pearson_distance_correlation(Z, I, sample_pairs: int = 10000, seed: int = 0) -> float:
    """Pearson r between Euclidean embedding distances and Euclidean
    fingerprint distances over sampled molecule pairs."""
    Z = np.asarray(Z, dtype=np.float64)
    I = np.asarray(I, dtype=np.float64)
    n = Z.shape[0]
    if n < 3:
        raise ValueError("need at least 3 samples")
    rng = np.random.default_rng(seed)
    pairs = _pairwise_sample(n, sample_pairs, rng)
    dz = np.array([np.linalg.norm(Z[i] - Z[j]) for i, j in pairs])
    di = np.array([np.linalg.norm(I[i] - I[j]) for i, j in pairs])
    if np.std(dz) == 0.0 or np.std(di) == 0.0:
        raise DegenerateVariance("all distances equal on one side")
    r = np.corrcoef(dz, di)[0, 1]
    return float(np.clip(r, -1.0, 1.0))


def distance_regression_probe(Z, I, split, seed: int = 0, max_pairs: int = 10000):
    """Linear least-squares on pair features |z_a - z_b| predicting the
    Euclidean fingerprint distance; returns the test MSE.

    `split` is (train_indices, test_indices) over the molecules; pairs are
    formed within each side.
    """
    Z = np.asarray(Z, dtype=np.float64)
    I = np.asarray(I, dtype=np.float64)
    rng = np.random.default_rng(seed)
    train_idx, test_idx = split

    def pair_data(idx):
        pairs = _pairwise_sample(len(idx), max_pairs, rng)
        feats = np.stack([np.abs(Z[idx[a]] - Z[idx[b]]) for a, b in pairs])
        targets = np.array([np.linalg.norm(I[idx[a]] - I[idx[b]]) for a, b in pairs])
        return np.hstack([feats, np.ones((len(pairs), 1))]), targets

    X_train, y_train = pair_data(list(train_idx))
    X_test, y_test = pair_data(list(test_idx))
    w, *_ = np.linalg.lstsq(X_train, y_train, rcond=None)
    pred = X_test @ w
    return float(np.mean((pred - y_test) ** 2))


def covariance_singular_values(Z):
    """Descending singular values of the covariance of mean-centered rows,
    via Jacobi eigendecomposition of the (symmetric PSD) covariance.

    Returns (values, logs, collapsed_mask); logs floor at 1e-300 and the
    mask flags floored entries as collapsed directions.
    """
    Z = np.asarray(Z, dtype=np.float64)
    if Z.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    centered = Z - Z.mean(axis=0, keepdims=True)
    cov = centered.T @ centered / (Z.shape[0] - 1)
    w, _ = jacobi_eigh(cov)
    values = np.sort(np.maximum(w, 0.0))[::-1]
    # directions at numerical noise relative to the leading one also count
    # as collapsed, so exact rank deficiency is reported as such
    collapsed = values < max(COLLAPSE_FLOOR, 1e-12 * values[0])
    logs = np.log(np.maximum(values, COLLAPSE_FLOOR))
    return values, logs, collapsed


def roc_auc(scores, labels) -> float:
    """Mann-Whitney formulation with average-rank tie correction."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    pos = labels == 1.0
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise DegenerateVariance("ROC-AUC needs both classes")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores))
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    rank_sum = ranks[pos].sum()
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def knn_probe(Z_train, y_train, Z_test, y_test, k: int = 5) -> float:
    """Score each test point by the positive fraction among its k nearest
    training neighbors (Euclidean, distance ties broken by index); returns
    the ROC-AUC of those scores."""
    Z_train = np.asarray(Z_train, dtype=np.float64)
    Z_test = np.asarray(Z_test, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.float64)
    scores = []
    for x in Z_test:
        d = np.linalg.norm(Z_train - x[None, :], axis=1)
        order = sorted(range(len(d)), key=lambda i: (d[i], i))[:k]
        scores.append(float(np.mean(y_train[order])))
    return roc_auc(np.array(scores), y_test)


def alignment_histograms(Z, labels, pairs: int = 10000, bins: int = 20, seed: int = 0):
    """Positive pairs share an identical label, negatives differ; Euclidean
    embedding distances are min-max normalized over the sampled pool and
    binned with fixed-width bins.

    Returns (bin_edges, positive_counts, negative_counts).
    """
    Z = np.asarray(Z, dtype=np.float64)
    labels = np.asarray(labels)
    n = Z.shape[0]
    rng = np.random.default_rng(seed)

    pos_pool = [(i, j) for i in range(n) for j in range(i + 1, n) if labels[i] == labels[j]]
    neg_pool = [(i, j) for i in range(n) for j in range(i + 1, n) if labels[i] != labels[j]]

    def sample(pool):
        if len(pool) > pairs:
            chosen = rng.choice(len(pool), size=pairs, replace=False)
            return [pool[int(k)] for k in sorted(chosen)]
        return pool

    pos_pairs, neg_pairs = sample(pos_pool), sample(neg_pool)
    pos_d = np.array([np.linalg.norm(Z[i] - Z[j]) for i, j in pos_pairs])
    neg_d = np.array([np.linalg.norm(Z[i] - Z[j]) for i, j in neg_pairs])

    pool = np.concatenate([pos_d, neg_d]) if len(neg_d) else pos_d
    lo, hi = float(pool.min()), float(pool.max())
    span = hi - lo if hi > lo else 1.0
    pos_norm = (pos_d - lo) / span
    neg_norm = (neg_d - lo) / span if len(neg_d) else neg_d

    edges = np.linspace(0.0, 1.0, bins + 1)
    pos_counts, _ = np.histogram(pos_norm, bins=edges)
    neg_counts, _ = np.histogram(neg_norm, bins=edges)
    return edges, pos_counts, neg_counts


def histograms_to_csv(edges, pos_counts, neg_counts) -> str:
    lines = ["bin_left,bin_right,pos_count,neg_count"]
    for i in range(len(pos_counts)):
        lines.append(f"{edges[i]:.17g},{edges[i + 1]:.17g},{pos_counts[i]},{neg_counts[i]}")
    return "\n".join(lines) + "\n"
