"""Extended persistence diagrams of filtered graph complexes.

Two routes compute the same diagram: `extended_persistence_oracle` does a
full boundary-matrix reduction over the cone construction, while
`extended_persistence_fast` handles dimension 0 with union-find and falls
back to the reduction only for cycle pairing. Both must agree exactly.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .errors import SizeLimit
from .filtration import FilteredComplex

ORDINARY0 = "ordinary0"
ESSENTIAL0 = "essential0_extended"
CYCLE1 = "cycle1_extended"

KINDS = (ORDINARY0, ESSENTIAL0, CYCLE1)
_DIM_OF_KIND = {ORDINARY0: 0, ESSENTIAL0: 0, CYCLE1: 1}


@dataclass(frozen=True)
class PersistencePoint:
    birth: float
    death: float
    dim: int
    kind: str


@dataclass
class PersistenceDiagram:
    points: list[PersistencePoint]
    filter_tag: str = ""

    def of_kind(self, kind):
        return [p for p in self.points if p.kind == kind]

    def count(self, kind):
        return len(self.of_kind(kind))

    def multiset(self):
        return sorted((p.kind, p.birth, p.death) for p in self.points)

    def to_csv(self):
        buf = io.StringIO()
        buf.write("dim,kind,birth,death\n")
        for p in sorted(self.points, key=lambda p: (p.dim, p.kind, p.birth, p.death)):
            buf.write(f"{p.dim},{p.kind},{p.birth:.17g},{p.death:.17g}\n")
        return buf.getvalue()


# ---------------------------------------------------------------------------
# Cone-construction oracle

# column roles inside the coned filtration
_OMEGA = "omega"
_ASC_V = "asc_vertex"
_ASC_E = "asc_edge"
_CONE_E = "cone_edge"
_CONE_T = "cone_triangle"


def _coned_columns(cx: FilteredComplex):
    """Column order: cone vertex, ascending pass, then the descending pass of
    coned simplices by decreasing value with (dim, index) tie-break."""
    cols = [(_OMEGA, None, 0.0)]
    asc_vertices = {}
    asc_edges = {}
    for s in cx.simplices:
        if s.dim == 0:
            asc_vertices[s.vertices[0]] = len(cols)
            cols.append((_ASC_V, s, s.value))
        else:
            asc_edges[s.vertices] = len(cols)
            cols.append((_ASC_E, s, s.value))

    node_vals = cx.node_values()
    desc = []
    for s in cx.simplices:
        if s.dim == 0:
            desc.append((_CONE_E, s, node_vals[s.vertices[0]]))
        else:
            u, v = s.vertices
            desc.append((_CONE_T, s, min(node_vals[u], node_vals[v])))
    desc.sort(key=lambda c: (-c[2], 1 if c[0] == _CONE_E else 2, c[1].index))

    cone_edges = {}
    for role, s, val in desc:
        if role == _CONE_E:
            cone_edges[s.vertices[0]] = len(cols)
        cols.append((role, s, val))

    boundaries = []
    for role, s, _ in cols:
        if role in (_OMEGA, _ASC_V):
            boundaries.append(frozenset())
        elif role == _ASC_E:
            u, v = s.vertices
            boundaries.append(frozenset({asc_vertices[u], asc_vertices[v]}))
        elif role == _CONE_E:
            boundaries.append(frozenset({0, asc_vertices[s.vertices[0]]}))
        else:  # cone triangle over edge (u, v)
            u, v = s.vertices
            boundaries.append(
                frozenset({asc_edges[s.vertices], cone_edges[u], cone_edges[v]})
            )
    return cols, boundaries


def _reduce(boundaries):
    """Standard GF(2) column reduction; returns pairs (creator, destroyer)."""
    low_owner = {}
    pairs = []
    for j, col in enumerate(boundaries):
        col = set(col)
        while col:
            low = max(col)
            if low not in low_owner:
                break
            col ^= low_owner[low][1]
        if col:
            low_owner[max(col)] = (j, col)
            pairs.append((max(col), j))
    return pairs


def extended_persistence_oracle(cx: FilteredComplex, filter_tag="") -> PersistenceDiagram:
    cols, boundaries = _coned_columns(cx)
    asc_end = 1 + cx.num_nodes + cx.num_edges
    points = []
    for i, j in _reduce(boundaries):
        role_i, si, val_i = cols[i]
        role_j, sj, val_j = cols[j]
        if j < asc_end:
            # ascending-internal: vertex killed by edge
            points.append(PersistencePoint(val_i, val_j, 0, ORDINARY0))
        elif i < asc_end and i > 0:
            if role_i == _ASC_V:
                points.append(PersistencePoint(val_i, val_j, 0, ESSENTIAL0))
            else:
                points.append(PersistencePoint(val_i, val_j, 1, CYCLE1))
        # descending-internal pairs carry no diagram point
    return PersistenceDiagram(points, filter_tag)


# ---------------------------------------------------------------------------
# Fast path


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def attach(self, child_root, parent_root):
        self.parent[child_root] = parent_root


def extended_persistence_fast(cx: FilteredComplex, filter_tag="") -> PersistenceDiagram:
    node_vals = cx.node_values()
    uf = _UnionFind(cx.num_nodes)
    # creator of each component root: (value, order position) for elder rule
    creator = {}
    comp_min = {}
    comp_max = {}
    order_pos = {}
    points = []
    has_cycle = False

    for pos, s in enumerate(cx.simplices):
        if s.dim == 0:
            v = s.vertices[0]
            order_pos[v] = pos
            creator[v] = (s.value, pos)
            comp_min[v] = s.value
            comp_max[v] = s.value
        else:
            u, v = s.vertices
            ru, rv = uf.find(u), uf.find(v)
            if ru == rv:
                has_cycle = True
                continue
            # the younger creator dies at this edge
            if creator[ru] <= creator[rv]:
                elder, younger = ru, rv
            else:
                elder, younger = rv, ru
            points.append(PersistencePoint(creator[younger][0], s.value, 0, ORDINARY0))
            uf.attach(younger, elder)
            comp_min[elder] = min(comp_min[elder], comp_min.pop(younger))
            comp_max[elder] = max(comp_max[elder], comp_max.pop(younger))
            del creator[younger]

    for root in creator:
        points.append(PersistencePoint(comp_min[root], comp_max[root], 0, ESSENTIAL0))

    if has_cycle:
        # cyclomatic numbers of molecules are tiny; reuse the exact reduction
        # for the ascending/descending cycle pairing only
        oracle = extended_persistence_oracle(cx)
        points.extend(oracle.of_kind(CYCLE1))
    return PersistenceDiagram(points, filter_tag)


# ---------------------------------------------------------------------------
# Diagram distances (single (dim, kind) class at a time)

MAX_DIAGRAM_POINTS = 512


def _check_sizes(p1, p2):
    if len(p1) > MAX_DIAGRAM_POINTS or len(p2) > MAX_DIAGRAM_POINTS:
        raise SizeLimit(f"diagram exceeds {MAX_DIAGRAM_POINTS} points")


def _as_points(d, kind):
    if isinstance(d, PersistenceDiagram):
        if kind is None:
            kinds = {p.kind for p in d.points}
            if len(kinds) > 1:
                raise ValueError("diagram mixes kinds; pass kind=")
        pts = d.points if kind is None else d.of_kind(kind)
        return [(p.birth, p.death) for p in pts]
    return [(float(b), float(dd)) for b, dd in d]


def _linf(a, b):
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def _diag_cost(p):
    return abs(p[1] - p[0]) / 2.0


def _augmented_cost(p1, p2):
    n1, n2 = len(p1), len(p2)
    m = n1 + n2
    cost = np.zeros((m, m))
    for i, a in enumerate(p1):
        for j, b in enumerate(p2):
            cost[i, j] = _linf(a, b)
        cost[i, n2:] = _diag_cost(a)
    for k, b in enumerate(p2):
        cost[n1:, k] = _diag_cost(b)
    return cost


def diagram_w1(d1, d2, kind=None):
    """Exact 1-Wasserstein distance (L-inf ground metric, diagonal allowed)."""
    p1, p2 = _as_points(d1, kind), _as_points(d2, kind)
    _check_sizes(p1, p2)
    if not p1 and not p2:
        return 0.0
    cost = _augmented_cost(p1, p2)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum())


def diagram_bottleneck(d1, d2, kind=None):
    """Bottleneck distance via binary search over candidate costs plus
    bipartite feasibility checks."""
    p1, p2 = _as_points(d1, kind), _as_points(d2, kind)
    _check_sizes(p1, p2)
    if not p1 and not p2:
        return 0.0
    cost = _augmented_cost(p1, p2)
    m = cost.shape[0]

    def feasible(c):
        adj = csr_matrix(cost <= c + 1e-15)
        match = maximum_bipartite_matching(adj, perm_type="column")
        return int((match >= 0).sum()) == m

    candidates = np.unique(cost)
    lo, hi = 0, len(candidates) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(candidates[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(candidates[lo])
