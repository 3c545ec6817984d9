import numpy as np
import pytest

from conftest import random_graph
from topomol.errors import LengthMismatch, ZeroNorm
from topomol.metrics import (
    BitFingerprint,
    cosine_sim,
    euclidean,
    morgan_bits,
    similarity_histogram_protocol,
    tanimoto,
)
from topomol.molio import Atom, Bond, MolGraph, parse_smiles


class TestVectorDistances:
    def test_euclidean(self):
        assert euclidean([0, 0], [3, 4]) == pytest.approx(5.0)
        with pytest.raises(LengthMismatch):
            euclidean([1], [1, 2])

    def test_cosine(self):
        assert cosine_sim([1, 0], [0, 1]) == pytest.approx(0.0)
        assert cosine_sim([1, 1], [2, 2]) == pytest.approx(1.0)
        with pytest.raises(ZeroNorm):
            cosine_sim([0, 0], [1, 1])

    def test_cosine_clipped(self):
        # rounding can push |cos| epsilon past 1; result must stay in range
        v = np.full(50, 0.1)
        assert -1.0 <= cosine_sim(v, v) <= 1.0


def _relabel(graph, perm):
    """Graph with node order permuted: new index perm[i] holds old node i."""
    nodes = [None] * graph.num_nodes
    for i, a in enumerate(graph.nodes):
        nodes[perm[i]] = Atom(a.atomic_number, perm[i])
    edges = [Bond(perm[b.u], perm[b.v], b.bond_type) for b in graph.edges]
    return MolGraph(nodes, edges)


class TestMorgan:
    def test_deterministic(self):
        g = parse_smiles("CC(=O)O")
        assert morgan_bits(g).bits == morgan_bits(g).bits

    def test_atom_order_invariant(self, rng):
        for _ in range(20):
            g = random_graph(rng, max_nodes=8)
            perm = list(rng.permutation(g.num_nodes))
            assert morgan_bits(g).bits == morgan_bits(_relabel(g, perm)).bits

    def test_distinguishes_structures(self):
        a = morgan_bits(parse_smiles("CCO"))
        b = morgan_bits(parse_smiles("CCN"))
        assert a.bits != b.bits

    def test_radius_grows_bitset(self):
        g = parse_smiles("CCCCO")
        assert morgan_bits(g, radius=0).bits <= morgan_bits(g, radius=2).bits

    def test_width_must_be_power_of_two(self):
        with pytest.raises(ValueError):
            morgan_bits(parse_smiles("C"), width=1000)


class TestTanimoto:
    def test_identical(self):
        fp = morgan_bits(parse_smiles("CCO"))
        assert tanimoto(fp, fp) == 1.0

    def test_both_empty_is_one(self):
        a = BitFingerprint(frozenset())
        assert tanimoto(a, a) == 1.0

    def test_brute_force_agreement(self, rng):
        for _ in range(20):
            a = BitFingerprint(frozenset(int(x) for x in rng.integers(0, 64, 10)))
            b = BitFingerprint(frozenset(int(x) for x in rng.integers(0, 64, 10)))
            inter = sum(1 for x in a.bits if x in b.bits)
            union = len(set(a.bits) | set(b.bits))
            assert tanimoto(a, b) == pytest.approx(inter / union)

    def test_width_mismatch(self):
        with pytest.raises(LengthMismatch):
            tanimoto(BitFingerprint(frozenset(), width=512), BitFingerprint(frozenset()))


class TestSimilarityHistogram:
    def test_counts_partition_pairs(self, rng):
        from topomol.filtration import ATOMIC_NUMBER
        from topomol.vectorize import fingerprint_corpus

        smis = [
            "CCO", "CCN", "CCCO", "CC(C)O", "c1ccncc1", "C1CCOCC1",
            "CCS", "CCCl", "CC(=O)O", "CCOC", "C1CCC1O", "NCCO",
        ]
        graphs = [parse_smiles(s) for s in smis]
        fps, _ = fingerprint_corpus(graphs, [ATOMIC_NUMBER], resolution=4)
        edges, sim, rnd = similarity_histogram_protocol(graphs, fps, bins=10)
        n_pairs = 12 * 11 // 2
        assert sim.sum() + rnd.sum() == n_pairs
        assert len(edges) == 11
        assert sim.sum() >= round(0.2 * n_pairs)  # ties can enlarge the similar group
