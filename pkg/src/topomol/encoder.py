"""GIN-style message-passing encoder with mean-pool readout and a two-layer
projection head, plus graph augmentations and checkpoint serialization.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from .errors import ShapeMismatch, VocabOverflow
from .molio import Atom, Bond, MolGraph

BOND_CODE = {"single": 0, "double": 1, "triple": 2, "aromatic": 3}
DEGREE_CAP = 8  # one-hot degree buckets 0..8, larger degrees clamp


@dataclass(frozen=True)
class EncoderConfig:
    layers: int = 5
    hidden: int = 300
    atom_vocab: int = 119  # Z buckets 1..118 plus an overflow slot
    dropout: float = 0.0

    def __post_init__(self):
        if self.layers < 1 or self.hidden < 1:
            raise ValueError("layers >= 1 and hidden >= 1 required")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")


DESK_ENCODER = EncoderConfig(layers=3, hidden=64)
FULL_SCALE_ENCODER = EncoderConfig(layers=5, hidden=300)


@dataclass
class GraphBatch:
    atom_idx: np.ndarray  # per node, capped atomic-number bucket
    degree_idx: np.ndarray  # per node, capped degree bucket
    edge_src: np.ndarray  # directed edges, both orientations
    edge_dst: np.ndarray
    edge_type: np.ndarray
    membership: np.ndarray  # node -> graph index
    num_graphs: int

    @property
    def num_nodes(self):
        return len(self.atom_idx)


def batch_graphs(graphs, config: EncoderConfig) -> GraphBatch:
    atom_idx, degree_idx, membership = [], [], []
    edge_src, edge_dst, edge_type = [], [], []
    offset = 0
    for gi, g in enumerate(graphs):
        degs = g.degrees()
        for a, d in zip(g.nodes, degs):
            z = a.atomic_number
            if z < 1:
                raise VocabOverflow(f"atomic number {z}")
            atom_idx.append(min(z - 1, config.atom_vocab - 1))
            degree_idx.append(min(d, DEGREE_CAP))
            membership.append(gi)
        for b in g.edges:
            for u, v in ((b.u, b.v), (b.v, b.u)):
                edge_src.append(offset + u)
                edge_dst.append(offset + v)
                edge_type.append(BOND_CODE[b.bond_type])
        offset += g.num_nodes
    return GraphBatch(
        atom_idx=np.array(atom_idx, dtype=np.int64),
        degree_idx=np.array(degree_idx, dtype=np.int64),
        edge_src=np.array(edge_src, dtype=np.int64),
        edge_dst=np.array(edge_dst, dtype=np.int64),
        edge_type=np.array(edge_type, dtype=np.int64),
        membership=np.array(membership, dtype=np.int64),
        num_graphs=len(graphs),
    )


# ---------------------------------------------------------------------------
# Parameters


def _glorot(rng, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_encoder_params(config: EncoderConfig, seed: int) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(seed)
    h = config.hidden
    params = {
        "embed.atom": _glorot(rng, config.atom_vocab, h),
        "embed.degree": _glorot(rng, DEGREE_CAP + 1, h),
    }
    for l in range(config.layers):
        params[f"gin{l}.bond"] = _glorot(rng, len(BOND_CODE), h)
        params[f"gin{l}.eps"] = np.zeros(1)
        params[f"gin{l}.w1"] = _glorot(rng, h, h)
        params[f"gin{l}.b1"] = np.zeros(h)
        params[f"gin{l}.w2"] = _glorot(rng, h, h)
        params[f"gin{l}.b2"] = np.zeros(h)
    return params


def init_head_params(config: EncoderConfig, out_dim: int, seed: int, prefix="head"):
    rng = np.random.default_rng(seed)
    h = config.hidden
    return {
        f"{prefix}.w1": _glorot(rng, h, h),
        f"{prefix}.b1": np.zeros(h),
        f"{prefix}.w2": _glorot(rng, h, out_dim),
        f"{prefix}.b2": np.zeros(out_dim),
    }


def lift_params(tape, params):
    """Wrap parameter arrays as tape tensors once per forward/backward pass."""
    return {k: tape.tensor(v) for k, v in params.items()}


# ---------------------------------------------------------------------------
# Forward passes


def _dropout_mask(shape, rate, rng):
    keep = 1.0 - rate
    return (rng.random(shape) < keep).astype(np.float64) / keep


def encode_nodes(tape, batch: GraphBatch, config: EncoderConfig, p, dropout_rng=None):
    """Per-node embeddings after the GIN stack. `p` holds tape tensors."""
    h = ad.gather_sum(
        tape, p["embed.atom"], batch.atom_idx, p["embed.degree"], batch.degree_idx
    )
    n = batch.num_nodes
    for l in range(config.layers):
        if len(batch.edge_src):
            msg = ad.edge_message_sum(
                tape, h, p[f"gin{l}.bond"], batch.edge_src, batch.edge_type, batch.edge_dst, n
            )
            combined = ad.gin_combine(tape, h, p[f"gin{l}.eps"], msg)
        else:
            combined = ad.mul(tape, h, ad.add_scalar(tape, p[f"gin{l}.eps"], 1.0))
        a1 = ad.affine_relu(tape, combined, p[f"gin{l}.w1"], p[f"gin{l}.b1"])
        if dropout_rng is not None and config.dropout > 0.0:
            a1 = ad.mul(tape, a1, _dropout_mask(a1.shape, config.dropout, dropout_rng))
        h = ad.affine(tape, a1, p[f"gin{l}.w2"], p[f"gin{l}.b2"])
    return h


def readout_mean(tape, h_nodes, batch: GraphBatch):
    sums = ad.scatter_add_rows(tape, h_nodes, batch.membership, batch.num_graphs)
    counts = np.bincount(batch.membership, minlength=batch.num_graphs).astype(np.float64)
    return ad.mul(tape, sums, 1.0 / counts[:, None])


def project(tape, h, p, prefix="head"):
    """Two-layer MLP head with a ReLU between."""
    z1 = ad.affine_relu(tape, h, p[f"{prefix}.w1"], p[f"{prefix}.b1"])
    return ad.affine(tape, z1, p[f"{prefix}.w2"], p[f"{prefix}.b2"])


def encode_graphs(tape, batch, config, p, dropout_rng=None):
    """Contrastive-mode ordering: encode, read out, then project."""
    h_nodes = encode_nodes(tape, batch, config, p, dropout_rng)
    h_graph = readout_mean(tape, h_nodes, batch)
    return project(tape, h_graph, p), h_graph


def encode_graphs_tae(tape, batch, config, p, dropout_rng=None):
    """Reconstruction-mode ordering: encode, project per node, then read out."""
    h_nodes = encode_nodes(tape, batch, config, p, dropout_rng)
    projected = project(tape, h_nodes, p, prefix="tae")
    return readout_mean(tape, projected, batch)


# ---------------------------------------------------------------------------
# Augmentations


def _derive_seed(seed, attempt):
    return (seed * 1000003 + attempt) & 0xFFFFFFFF


def augment(graph: MolGraph, kind: str, ratio: float, seed: int):
    """Seeded node-drop or edge-perturb view. Returns (graph, changed_ok);
    `changed_ok` is False when 8 retries failed and the input came back."""
    if not 0.0 <= ratio < 1.0:
        raise ValueError("ratio must be in [0, 1)")
    if ratio == 0.0:
        return graph, True
    for attempt in range(8):
        rng = np.random.default_rng(_derive_seed(seed, attempt))
        try:
            if kind == "node-drop":
                out = _node_drop(graph, ratio, rng)
            elif kind == "edge-perturb":
                out = _edge_perturb(graph, ratio, rng)
            else:
                raise ValueError(f"unknown augmentation {kind!r}")
            return out, True
        except _EmptyResult:
            continue
    return graph, False


class _EmptyResult(Exception):
    pass


def _node_drop(graph, ratio, rng):
    n = graph.num_nodes
    k = int(np.ceil(ratio * n))
    if k >= n:
        raise _EmptyResult
    dropped = set(int(i) for i in rng.choice(n, size=k, replace=False))
    keep = [i for i in range(n) if i not in dropped]
    remap = {old: new for new, old in enumerate(keep)}
    nodes = [Atom(graph.nodes[i].atomic_number, remap[i]) for i in keep]
    edges = [
        Bond(remap[b.u], remap[b.v], b.bond_type)
        for b in graph.edges
        if b.u in remap and b.v in remap
    ]
    return MolGraph(nodes, edges, name=graph.name)


def _edge_perturb(graph, ratio, rng):
    n = graph.num_nodes
    m = graph.num_edges
    k = int(np.ceil(ratio * m))
    if k == 0:
        return MolGraph(list(graph.nodes), list(graph.edges), name=graph.name)
    removed = set(int(i) for i in rng.choice(m, size=k, replace=False))
    edges = [b for i, b in enumerate(graph.edges) if i not in removed]
    present = {b.key for b in edges}
    capacity = n * (n - 1) // 2 - len(present)
    if capacity < k:
        raise _EmptyResult
    added = 0
    while added < k:
        u, v = int(rng.integers(n)), int(rng.integers(n))
        if u == v:
            continue
        key = (min(u, v), max(u, v))
        if key in present:
            continue
        present.add(key)
        edges.append(Bond(key[0], key[1], "single"))
        added += 1
    return MolGraph(list(graph.nodes), edges, name=graph.name)


# ---------------------------------------------------------------------------
# Checkpoints

_MAGIC = b"TMCK"
_VERSION = 1


def save_params(path, params: dict[str, np.ndarray]):
    names = sorted(params)
    manifest = {"version": _VERSION, "arrays": []}
    offset = 0
    for name in names:
        arr = params[name]
        manifest["arrays"].append(
            {"name": name, "shape": list(arr.shape), "offset": offset}
        )
        offset += arr.size * 8
    blob = json.dumps(manifest, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, len(blob)))
        fh.write(blob)
        for name in names:
            fh.write(np.ascontiguousarray(params[name], dtype="<f8").tobytes())


def load_params(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        version, blob_len = struct.unpack("<II", fh.read(8))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        manifest = json.loads(fh.read(blob_len))
        payload = fh.read()
    params = {}
    for entry in manifest["arrays"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arr = np.frombuffer(payload[start : start + size * 8], dtype="<f8")
        params[entry["name"]] = arr.reshape(shape).copy()
    return params
