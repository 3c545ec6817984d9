"""Stable fingerprints from persistence diagrams: persistence images,
landscapes, silhouettes, concatenation across filters, and ingestion of
externally computed fingerprint files.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyRange, NonNumericCell, RaggedRows
from .filtration import FilterKind, build_sublevel_complex, node_filter
from .persistence import CYCLE1, ESSENTIAL0, ORDINARY0, PersistenceDiagram, extended_persistence_fast

# fixed concatenation order of per-class grids
CLASS_ORDER = (ORDINARY0, ESSENTIAL0, CYCLE1)


@dataclass(frozen=True)
class PIConfig:
    resolution: int = 16
    # (birth_min, birth_max, pers_min, pers_max); fixed per corpus
    birth_range: tuple[float, float] = (0.0, 1.0)
    pers_range: tuple[float, float] = (0.0, 1.0)
    sigma: float | None = None  # default: largest axis extent / resolution

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("resolution must be >= 2")
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("sigma must be positive")

    def check_ranges(self):
        if self.birth_range[1] <= self.birth_range[0] or self.pers_range[1] <= self.pers_range[0]:
            raise EmptyRange(
                f"degenerate PI range birth={self.birth_range} pers={self.pers_range}"
            )

    @property
    def bandwidth(self):
        if self.sigma is not None:
            return self.sigma
        extent = max(
            self.birth_range[1] - self.birth_range[0],
            self.pers_range[1] - self.pers_range[0],
        )
        return extent / self.resolution

    @property
    def pers_scale(self):
        """Weight normalizer: largest absolute persistence the range covers."""
        return max(abs(self.pers_range[0]), abs(self.pers_range[1]))


@dataclass
class TopoFingerprint:
    values: np.ndarray
    provenance: str

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("fingerprint has non-finite entries")

    def __len__(self):
        return len(self.values)


def _birth_pers(diagram: PersistenceDiagram, kind):
    return [(p.birth, p.death - p.birth) for p in diagram.of_kind(kind)]


def _pixel_centers(lo, hi, res):
    edges = np.linspace(lo, hi, res + 1)
    return (edges[:-1] + edges[1:]) / 2.0


def persistence_image(diagram: PersistenceDiagram, config: PIConfig) -> TopoFingerprint:
    """Gaussian-smoothed birth/persistence surface on a fixed grid, one grid
    per point class, concatenated in CLASS_ORDER. Weight is linear in
    absolute persistence and vanishes on the diagonal."""
    config.check_ranges()
    sigma = config.bandwidth
    res = config.resolution
    bx = _pixel_centers(*config.birth_range, res)
    py = _pixel_centers(*config.pers_range, res)
    norm = 1.0 / (2.0 * math.pi * sigma * sigma)
    pmax = config.pers_scale

    grids = []
    for kind in CLASS_ORDER:
        grid = np.zeros((res, res))
        for b, p in _birth_pers(diagram, kind):
            w = abs(p) / pmax if pmax > 0 else 0.0
            if w == 0.0:
                continue
            db2 = (bx - b) ** 2
            dp2 = (py - p) ** 2
            grid += w * norm * np.exp(-(db2[:, None] + dp2[None, :]) / (2 * sigma * sigma))
        grids.append(grid.ravel())  # row-major: birth axis outer, persistence inner
    return TopoFingerprint(np.concatenate(grids), f"pi({diagram.filter_tag})")


def pi_stability_constant(config: PIConfig) -> float:
    """Upper bound C with ||PI(D) - PI(D')||_2 <= C * W1(D, D') for diagrams
    of one class whose points stay inside the configured ranges.

    Per pixel the point-to-value map is Lipschitz with constant
    sqrt(5) * (sup|phi| / p_max + L_phi) in the L-inf metric on (birth, death);
    diagonal-projected points double the effective movement, and the grid has
    resolution^2 pixels.
    """
    sigma = config.bandwidth
    sup_phi = 1.0 / (2.0 * math.pi * sigma * sigma)
    lip_phi = 1.0 / (2.0 * math.pi * sigma**3 * math.sqrt(math.e))
    pmax = config.pers_scale
    per_pixel = math.sqrt(5.0) * (sup_phi / pmax + lip_phi)
    return 2.0 * config.resolution * per_pixel


def _tents(diagram_points):
    """Tent functions as (lo, hi) intervals; cycle points are stored with
    birth > death and are flipped to an honest interval."""
    return [(min(b, d), max(b, d)) for b, d in diagram_points]


def _tent_values(intervals, grid):
    if not intervals:
        return np.zeros((0, len(grid)))
    lo = np.array([iv[0] for iv in intervals])[:, None]
    hi = np.array([iv[1] for iv in intervals])[:, None]
    return np.maximum(np.minimum(grid[None, :] - lo, hi - grid[None, :]), 0.0)


def _all_points(diagram: PersistenceDiagram):
    return [(p.birth, p.death) for p in diagram.points]


def persistence_landscape(
    diagram: PersistenceDiagram, k_max: int, samples: int, value_range
) -> TopoFingerprint:
    if k_max < 1 or samples < 2:
        raise ValueError("k_max >= 1 and samples >= 2 required")
    grid = np.linspace(value_range[0], value_range[1], samples)
    vals = _tent_values(_tents(_all_points(diagram)), grid)
    out = np.zeros((k_max, samples))
    if vals.shape[0]:
        ordered = -np.sort(-vals, axis=0)
        k = min(k_max, ordered.shape[0])
        out[:k] = ordered[:k]
    return TopoFingerprint(out.ravel(), f"landscape({diagram.filter_tag})")


def persistence_silhouette(
    diagram: PersistenceDiagram, power: float, samples: int, value_range
) -> TopoFingerprint:
    grid = np.linspace(value_range[0], value_range[1], samples)
    points = _all_points(diagram)
    vals = _tent_values(_tents(points), grid)
    weights = np.array([abs(d - b) ** power for b, d in points])
    total = weights.sum()
    if vals.shape[0] == 0 or total == 0.0:
        out = np.zeros(samples)
    else:
        out = (weights[:, None] * vals).sum(axis=0) / total
    return TopoFingerprint(out, f"silhouette({diagram.filter_tag})")


def concat_fingerprints(fps) -> TopoFingerprint:
    fps = list(fps)
    if not fps:
        raise ValueError("nothing to concatenate")
    return TopoFingerprint(
        np.concatenate([fp.values for fp in fps]),
        "concat(" + ",".join(fp.provenance for fp in fps) + ")",
    )


# ---------------------------------------------------------------------------
# Corpus pipeline


def corpus_pi_config(diagrams, resolution=16, sigma=None) -> PIConfig:
    """PI ranges fixed over a fingerprinting corpus; degenerate axes fall
    back to a unit range around the observed value."""
    births, perses = [], []
    for d in diagrams:
        for p in d.points:
            births.append(p.birth)
            perses.append(p.death - p.birth)
    if not births:
        return PIConfig(resolution=resolution, sigma=sigma)

    def span(vals):
        lo, hi = min(vals), max(vals)
        if hi - lo <= 0:
            return (lo - 0.5, lo + 0.5)
        return (lo, hi)

    return PIConfig(
        resolution=resolution,
        birth_range=span(births),
        pers_range=span(perses),
        sigma=sigma,
    )


def diagram_for_graph(graph, kind: FilterKind) -> PersistenceDiagram:
    values = node_filter(graph, kind)
    cx = build_sublevel_complex(graph, values)
    return extended_persistence_fast(cx, filter_tag=kind.tag)


class _DiagramWorker:
    """Picklable per-filter diagram computation, usable with pool maps."""

    def __init__(self, kind: FilterKind):
        self.kind = kind

    def __call__(self, graph):
        return diagram_for_graph(graph, self.kind)


def fingerprint_corpus(graphs, filters, resolution=16, sigma=None, map_fn=None):
    """Persistence images for every graph: per filter, diagrams are computed,
    a corpus-level range is fixed, and the per-filter PIs are concatenated.

    `map_fn` (default builtin map) lets callers parallelize the per-graph
    diagram computation; it must preserve order.

    Returns (fingerprints, configs) where configs maps filter tag -> PIConfig.
    """
    if map_fn is None:
        map_fn = map
    per_filter = []
    configs = {}
    for kind in filters:
        diagrams = list(map_fn(_DiagramWorker(kind), graphs))
        config = corpus_pi_config(diagrams, resolution=resolution, sigma=sigma)
        configs[kind.tag] = config
        per_filter.append([persistence_image(d, config) for d in diagrams])
    fps = [concat_fingerprints(row) for row in zip(*per_filter)]
    return fps, configs


# ---------------------------------------------------------------------------
# Fingerprint CSV interchange


def emit_fingerprints_csv(path, ids, fingerprints):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        width = len(fingerprints[0]) if fingerprints else 0
        writer.writerow(["id"] + [f"x{i}" for i in range(width)])
        for mol_id, fp in zip(ids, fingerprints):
            writer.writerow([mol_id] + [f"{v:.17g}" for v in fp.values])


def ingest_external_fingerprints(path) -> dict[str, TopoFingerprint]:
    tag = str(path).rsplit("/", 1)[-1].rsplit(".", 1)[0]
    out = {}
    width = None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[0] != "id":
            raise RaggedRows(f"{path}: first column must be 'id'")
        for rownum, row in enumerate(reader, start=2):
            if width is None:
                width = len(row) - 1
            elif len(row) - 1 != width:
                raise RaggedRows(f"{path}: row {rownum} has {len(row) - 1} values, expected {width}")
            try:
                values = np.array([float(x) for x in row[1:]])
            except ValueError as e:
                raise NonNumericCell(f"{path}: row {rownum}: {e}") from e
            out[row[0]] = TopoFingerprint(values, f"external({tag})")
    return out
