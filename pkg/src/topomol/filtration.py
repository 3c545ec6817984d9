"""Node filter functions and sublevel-filtered 1-dimensional complexes.

A filter assigns one real value per node; edges inherit the max of their
endpoint values, producing a nested family of subgraphs as the threshold
grows.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._linalg import jacobi_eigh
from .molio import MolGraph


@dataclass(frozen=True)
class FilterKind:
    name: str  # "atomic_number" | "degree" | "hks"
    t: float = 0.1  # HKS temperature, ignored otherwise

    def __post_init__(self):
        if self.name not in ("atomic_number", "degree", "hks"):
            raise ValueError(f"unknown filter {self.name!r}")
        if self.name == "hks" and self.t <= 0:
            raise ValueError("HKS temperature must be positive")

    @property
    def tag(self):
        return f"hks_t{self.t:g}" if self.name == "hks" else self.name


ATOMIC_NUMBER = FilterKind("atomic_number")
DEGREE = FilterKind("degree")
HKS = FilterKind("hks", 0.1)

FILTER_PRESETS = {
    "atom": [ATOMIC_NUMBER],
    "hks": [HKS],
    "degree": [DEGREE],
    # atomic number + HKS(0.1) + degree, concatenated
    "ahd": [ATOMIC_NUMBER, HKS, DEGREE],
}


@dataclass
class Simplex:
    dim: int  # 0 or 1
    vertices: tuple[int, ...]
    value: float
    index: int  # original node index, or edge index for dim 1


@dataclass
class FilteredComplex:
    """Nodes and edges with filtration values in ascending (value, dim, index) order."""

    simplices: list[Simplex]
    num_nodes: int
    num_edges: int

    def node_values(self):
        vals = [0.0] * self.num_nodes
        for s in self.simplices:
            if s.dim == 0:
                vals[s.vertices[0]] = s.value
        return vals


def graph_laplacian(graph: MolGraph):
    n = graph.num_nodes
    lap = np.zeros((n, n))
    for b in graph.edges:
        lap[b.u, b.v] -= 1.0
        lap[b.v, b.u] -= 1.0
        lap[b.u, b.u] += 1.0
        lap[b.v, b.v] += 1.0
    return lap


def heat_kernel_signature(graph: MolGraph, t: float):
    """h_t(v) = sum_i exp(-t * lambda_i) * phi_i(v)^2 over Laplacian eigenpairs."""
    lap = graph_laplacian(graph)
    w, phi = jacobi_eigh(lap)
    return (np.exp(-t * w)[None, :] * phi**2).sum(axis=1)


def node_filter(graph: MolGraph, kind: FilterKind):
    if kind.name == "atomic_number":
        return np.array([a.atomic_number for a in graph.nodes], dtype=np.float64)
    if kind.name == "degree":
        return np.array(graph.degrees(), dtype=np.float64)
    return heat_kernel_signature(graph, kind.t)


def build_sublevel_complex(graph: MolGraph, node_values) -> FilteredComplex:
    node_values = np.asarray(node_values, dtype=np.float64)
    if len(node_values) != graph.num_nodes:
        raise ValueError("one value per node required")
    simplices = [
        Simplex(0, (i,), float(node_values[i]), i) for i in range(graph.num_nodes)
    ]
    for ei, b in enumerate(graph.edges):
        val = max(node_values[b.u], node_values[b.v])
        simplices.append(Simplex(1, (min(b.u, b.v), max(b.u, b.v)), float(val), ei))
    simplices.sort(key=lambda s: (s.value, s.dim, s.index))
    return FilteredComplex(simplices, graph.num_nodes, graph.num_edges)
