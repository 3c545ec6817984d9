"""Vector distances and molecule similarities, including an ECFP-like
Morgan bit fingerprint with Tanimoto similarity.

The Morgan scheme is deliberately "ECFP-like": a fixed, documented 64-bit
mixing hash over iteratively refined neighborhood codes. It is deterministic
and atom-order invariant but not bit-compatible with any toolkit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, ZeroNorm
from .molio import MolGraph

_MASK = (1 << 64) - 1
_SEED = 0x9E3779B97F4A7C15


def _mix(x: int) -> int:
    """splitmix64 finalizer; the only hash used for fingerprint bits."""
    x &= _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def _hash_ints(values) -> int:
    h = _SEED
    for v in values:
        h = _mix(h ^ _mix(v & _MASK))
    return h


def euclidean(a, b) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"{a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def cosine_sim(a, b) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LengthMismatch(f"{a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ZeroNorm("cosine similarity undefined for zero vectors")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


_BOND_CODE = {"single": 1, "double": 2, "triple": 3, "aromatic": 4}


@dataclass(frozen=True)
class BitFingerprint:
    bits: frozenset[int]
    width: int = 2048
    radius: int = 2

    def popcount(self):
        return len(self.bits)


def morgan_bits(graph: MolGraph, radius: int = 2, width: int = 2048) -> BitFingerprint:
    if width <= 0 or width & (width - 1):
        raise ValueError("width must be a power of two")
    adj = graph.adjacency()
    codes = []
    for i, atom in enumerate(graph.nodes):
        bond_multiset = sorted(_BOND_CODE[t] for _, t in adj[i])
        codes.append(_hash_ints([atom.atomic_number, len(adj[i])] + bond_multiset))
    bits = set(c & (width - 1) for c in codes)
    for _ in range(radius):
        nxt = []
        for i in range(graph.num_nodes):
            neigh = sorted(_mix(codes[j] ^ _BOND_CODE[t]) for j, t in adj[i])
            nxt.append(_hash_ints([codes[i]] + neigh))
        codes = nxt
        bits.update(c & (width - 1) for c in codes)
    return BitFingerprint(frozenset(bits), width=width, radius=radius)


def tanimoto(a: BitFingerprint, b: BitFingerprint) -> float:
    if a.width != b.width:
        raise LengthMismatch(f"bitset widths {a.width} vs {b.width}")
    union = a.bits | b.bits
    if not union:
        return 1.0
    return len(a.bits & b.bits) / len(union)


def similarity_histogram_protocol(
    graphs,
    fingerprints,
    bins: int = 20,
    max_pairs: int = 10000,
    seed: int = 0,
    similar_fraction: float = 0.2,
):
    """Tanimoto over ECFP-like bitsets splits sampled pairs into the top-20%
    "similar" group and the rest; both groups are binned by cosine similarity
    of the topological fingerprints.

    Returns (bin_edges, similar_counts, random_counts).
    """
    n = len(graphs)
    if n < 2:
        raise ValueError("need at least two molecules")
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if len(pairs) > max_pairs:
        rng = np.random.default_rng(seed)
        chosen = rng.choice(len(pairs), size=max_pairs, replace=False)
        pairs = [pairs[int(k)] for k in sorted(chosen)]

    bitsets = [morgan_bits(g) for g in graphs]
    tani = np.array([tanimoto(bitsets[i], bitsets[j]) for i, j in pairs])
    cos = np.array(
        [cosine_sim(fingerprints[i].values, fingerprints[j].values) for i, j in pairs]
    )

    k = max(1, int(round(similar_fraction * len(pairs))))
    threshold = np.sort(tani)[::-1][k - 1]
    similar_mask = tani >= threshold

    edges = np.linspace(-1.0, 1.0, bins + 1)
    sim_counts, _ = np.histogram(cos[similar_mask], bins=edges)
    rnd_counts, _ = np.histogram(cos[~similar_mask], bins=edges)
    return edges, sim_counts, rnd_counts
