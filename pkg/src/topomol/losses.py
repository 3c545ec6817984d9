"""Training objectives: topological-distance contrastive loss (plain and
over views), fingerprint-reconstruction MSE, NT-Xent, the combined objective,
and the closed-form gradient of the dot-product contrastive loss.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import BatchTooSmall, IndexOutOfRange, ZeroNormEmbedding

LOSS_MODES = ("tdl", "tdl-views", "tae", "ntxent", "combined")


@dataclass(frozen=True)
class LossConfig:
    mode: str = "combined"
    tau: float = 0.1
    lam: float = 1.0  # weight of the contrastive-distance term in combined mode

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be nonnegative")
        if self.mode not in LOSS_MODES:
            raise ValueError(f"unknown loss mode {self.mode!r}")


def _check_embeddings(Z, n_min=2):
    Z = np.asarray(Z, dtype=np.float64)
    if Z.shape[0] < n_min:
        raise BatchTooSmall(f"batch of {Z.shape[0]} below minimum {n_min}")
    if np.any(np.linalg.norm(Z, axis=1) == 0.0):
        raise ZeroNormEmbedding("zero-norm embedding row")
    return Z


def _distance_masks(I):
    """mask[n, m, k] = 1 iff dis(I_n, I_k) >= dis(I_n, I_m), with k != n."""
    I = np.asarray(I, dtype=np.float64)
    n = I.shape[0]
    dist = _pairwise_sq(I, I)
    mask = (dist[:, None, :] >= dist[:, :, None]).astype(np.float64)
    mask[np.arange(n), :, np.arange(n)] = 0.0
    return mask


def _pairwise_sq(A, B):
    """Squared Euclidean distances; they rank identically to distances, so
    the sqrt is skipped. The Gram expansion avoids the n*n*d temporary."""
    sa = (A * A).sum(-1)
    sb = (B * B).sum(-1)
    return sa[:, None] + sb[None, :] - 2.0 * (A @ B.T)


# ---------------------------------------------------------------------------
# Tape-level losses (used by the trainer)


def tdl_loss_t(tape, Z, I, tau: float):
    """Mean over anchors of the per-sample distance-ranked contrastive loss.
    `Z` is a tape tensor, `I` a constant fingerprint matrix."""
    n = Z.shape[0]
    _check_embeddings(Z.data)
    I = np.asarray(I, dtype=np.float64)
    dist = _pairwise_sq(I, I)
    np.fill_diagonal(dist, -np.inf)  # the anchor never appears as a negative
    zn = ad.l2_normalize(tape, Z)
    sims = ad.scale(tape, ad.matmul(tape, zn, ad.transpose(tape, zn)), 1.0 / tau)
    expo = ad.exp(tape, sims)

    # denom[n, m] = sum over k at least as far from n as m of exp(sim(n, k) / tau)
    denom = ad.ranked_suffix_sums(tape, dist, expo)
    # denom[n, n] is a full negative sum, positive; the diagonal is masked out
    terms = ad.sub(tape, ad.log(tape, denom), sims)
    per_pair = ad.mul(tape, terms, 1.0 - np.eye(n))
    return ad.scale(tape, ad.tsum(tape, per_pair), 1.0 / (n * (n - 1)))


def tdl_views_loss_t(tape, Z_i, Z_j, I_i, I_j, tau: float):
    """View-based variant: anchors come from view i, positives and negatives
    from view j; the distance ranking uses the per-view fingerprints."""
    n = Z_i.shape[0]
    if n == 1:
        return tape.tensor(0.0)
    _check_embeddings(Z_i.data, n_min=1)
    _check_embeddings(Z_j.data, n_min=1)
    I_i = np.asarray(I_i, dtype=np.float64)
    I_j = np.asarray(I_j, dtype=np.float64)
    dist = _pairwise_sq(I_i, I_j)

    zi = ad.l2_normalize(tape, Z_i)
    zj = ad.l2_normalize(tape, Z_j)
    sims = ad.scale(tape, ad.matmul(tape, zi, ad.transpose(tape, zj)), 1.0 / tau)
    expo = ad.exp(tape, sims)

    denom = ad.ranked_suffix_sums(tape, dist, expo)
    per_pair = ad.sub(tape, ad.log(tape, denom), sims)
    return ad.scale(tape, ad.tsum(tape, per_pair), 1.0 / (n * (n - 1)))


def tae_loss_t(tape, H, I):
    """Per-element, per-sample mean squared reconstruction error."""
    if H.shape != np.asarray(I).shape:
        raise ValueError(f"width mismatch: {H.shape} vs {np.asarray(I).shape}")
    return ad.tmean(tape, ad.pow_scalar(tape, ad.sub(tape, H, np.asarray(I)), 2.0))


def ntxent_loss_t(tape, Z_i, Z_j, tau: float):
    """Standard normalized-temperature cross entropy over 2N views."""
    n = Z_i.shape[0]
    if n == 1:
        warnings.warn("NT-Xent with a single sample has no negatives; returning 0")
        return tape.tensor(0.0)
    z = ad.l2_normalize(tape, ad.concat(tape, [Z_i, Z_j], axis=0))
    sims = ad.scale(tape, ad.matmul(tape, z, ad.transpose(tape, z)), 1.0 / tau)
    m = 2 * n
    off_diag = 1.0 - np.eye(m)
    denom = ad.tsum(tape, ad.mul(tape, ad.exp(tape, sims), off_diag), axis=1)
    pos_idx = np.concatenate([np.arange(n) + n, np.arange(n)])
    pos = ad.tsum(tape, ad.mul(tape, sims, _one_hot_rows(pos_idx, m)), axis=1)
    return ad.tmean(tape, ad.sub(tape, ad.log(tape, denom), pos))


def _one_hot_rows(idx, width):
    out = np.zeros((len(idx), width))
    out[np.arange(len(idx)), idx] = 1.0
    return out


def combined_loss_t(tape, base, tdl, lam: float):
    return ad.add(tape, base, ad.scale(tape, tdl, lam))


# ---------------------------------------------------------------------------
# Value-level wrappers


def _value(fn, *args):
    tape = ad.Tape()
    return float(fn(tape, *args).data)


def tdl_loss(Z, I, tau: float) -> float:
    return float(tdl_per_sample(Z, I, tau).mean())


def tdl_per_sample(Z, I, tau: float) -> np.ndarray:
    """Per-anchor loss values (the mean of which is `tdl_loss`).

    Each -log softmax term is evaluated as a max-subtracted log-sum-exp, so a
    denominator containing only the positive itself contributes exactly 0.
    """
    Z = _check_embeddings(Z)
    I = np.asarray(I, dtype=np.float64)
    n = Z.shape[0]
    zn = Z / np.linalg.norm(Z, axis=1, keepdims=True)
    sims = zn @ zn.T / tau
    mask = _distance_masks(I)
    out = np.zeros(n)
    for a in range(n):
        total = 0.0
        for m in range(n):
            if m == a:
                continue
            sel = sims[a][mask[a, m] > 0.0]
            top = sel.max()
            total += np.log(np.exp(sel - top).sum()) + top - sims[a, m]
        out[a] = total / (n - 1)
    return out


def tdl_views_loss(Z_i, Z_j, I_i, I_j, tau: float) -> float:
    tape = ad.Tape()
    return float(
        tdl_views_loss_t(
            tape,
            tape.tensor(np.asarray(Z_i, dtype=np.float64)),
            tape.tensor(np.asarray(Z_j, dtype=np.float64)),
            I_i,
            I_j,
            tau,
        ).data
    )


def tae_loss(H, I) -> float:
    tape = ad.Tape()
    return float(tae_loss_t(tape, tape.tensor(np.asarray(H, dtype=np.float64)), I).data)


def ntxent_loss(Z_i, Z_j, tau: float) -> float:
    tape = ad.Tape()
    return float(
        ntxent_loss_t(
            tape,
            tape.tensor(np.asarray(Z_i, dtype=np.float64)),
            tape.tensor(np.asarray(Z_j, dtype=np.float64)),
            tau,
        ).data
    )


def combined_loss(base: float, tdl: float, lam: float) -> float:
    return base + lam * tdl


# ---------------------------------------------------------------------------
# Closed-form gradient of the dot-product variant


def distance_ranking(I, n):
    """Indices of all samples except `n`, sorted by fingerprint distance from
    sample `n`, ties broken by original index."""
    I = np.asarray(I, dtype=np.float64)
    others = [k for k in range(I.shape[0]) if k != n]
    dists = {k: float(np.linalg.norm(I[n] - I[k])) for k in others}
    return sorted(others, key=lambda k: (dists[k], k))


def tdl_loss_n_dot(Z, I, tau: float, n: int) -> float:
    """Per-anchor loss with raw dot-product similarity, in the sorted form."""
    Z = np.asarray(Z, dtype=np.float64)
    order = distance_ranking(I, n)
    s = np.array([Z[n] @ Z[k] for k in order]) / tau
    total = 0.0
    for j in range(len(order)):
        total += np.log(np.exp(s[j:]).sum()) - s[j]
    return total / len(order)


def tdl_gradient_analytic(Z, I, tau: float, n: int, i: int) -> np.ndarray:
    """Gradient of the dot-product per-anchor loss with respect to the i-th
    closest sample (i in [1, N-1]); a scalar multiple of z_n / tau."""
    Z = np.asarray(Z, dtype=np.float64)
    N = Z.shape[0]
    if not 0 <= n < N:
        raise IndexOutOfRange(f"anchor {n} outside [0, {N})")
    if not 1 <= i <= N - 1:
        raise IndexOutOfRange(f"rank {i} outside [1, {N - 1}]")
    order = distance_ranking(I, n)
    s = np.array([Z[n] @ Z[k] for k in order]) / tau
    e = np.exp(s)
    coeff = sum(e[i - 1] / e[j - 1 :].sum() for j in range(1, i + 1)) - 1.0
    return coeff / (N - 1) * Z[n] / tau
