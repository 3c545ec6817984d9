"""Molecular graph parsing, JSON (de)serialization, dataset loading and splitting.

The SMILES support is a deliberate subset: organic-subset atoms, bracket
atoms carrying a bare element symbol, explicit bonds ``- = # :``, branches,
and ring closures (``1``-``9`` and ``%nn``). Stereo markers, charges,
isotopes and hydrogen counts are rejected with the byte offset of the
offending token.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AllRowsFailed,
    DanglingRingClosure,
    EmptySplit,
    IoError,
    SchemaError,
    UnbalancedBranch,
    UnsupportedToken,
)
from .periodic import AROMATIC_SYMBOLS, ATOMIC_NUMBER

BOND_TYPES = ("single", "double", "triple", "aromatic")

_BOND_SYMBOL = {"-": "single", "=": "double", "#": "triple", ":": "aromatic"}


@dataclass(frozen=True)
class Atom:
    atomic_number: int
    index: int

    def __post_init__(self):
        if not 1 <= self.atomic_number <= 118:
            raise ValueError(f"atomic_number {self.atomic_number} outside [1, 118]")


@dataclass(frozen=True)
class Bond:
    u: int
    v: int
    bond_type: str

    def __post_init__(self):
        if self.u == self.v:
            raise ValueError("self-loop bond")
        if self.bond_type not in BOND_TYPES:
            raise ValueError(f"unknown bond type {self.bond_type!r}")

    @property
    def key(self):
        return (min(self.u, self.v), max(self.u, self.v))


@dataclass
class MolGraph:
    nodes: list[Atom]
    edges: list[Bond]
    name: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if len(self.nodes) < 1:
            raise ValueError("graph needs at least one node")
        n = len(self.nodes)
        seen = set()
        for b in self.edges:
            if not (0 <= b.u < n and 0 <= b.v < n):
                raise ValueError(f"edge ({b.u},{b.v}) references missing node")
            if b.key in seen:
                raise ValueError(f"duplicate edge {b.key}")
            seen.add(b.key)

    @property
    def num_nodes(self):
        return len(self.nodes)

    @property
    def num_edges(self):
        return len(self.edges)

    def degrees(self):
        deg = [0] * self.num_nodes
        for b in self.edges:
            deg[b.u] += 1
            deg[b.v] += 1
        return deg

    def adjacency(self):
        """Neighbor lists as (neighbor index, bond type) pairs."""
        adj = [[] for _ in range(self.num_nodes)]
        for b in self.edges:
            adj[b.u].append((b.v, b.bond_type))
            adj[b.v].append((b.u, b.bond_type))
        return adj

    def structurally_equal(self, other):
        return (
            [a.atomic_number for a in self.nodes]
            == [a.atomic_number for a in other.nodes]
            and sorted((b.key, b.bond_type) for b in self.edges)
            == sorted((b.key, b.bond_type) for b in other.edges)
        )


# ---------------------------------------------------------------------------
# SMILES parsing


def _read_atom(text, pos):
    """Return (symbol, aromatic, next_pos) for the atom starting at pos."""
    ch = text[pos]
    if ch == "[":
        end = text.find("]", pos)
        if end < 0:
            raise UnbalancedBranch("unterminated bracket atom", pos)
        body = text[pos + 1 : end]
        if body in AROMATIC_SYMBOLS:
            return AROMATIC_SYMBOLS[body], True, end + 1
        if body in ATOMIC_NUMBER:
            return body, False, end + 1
        raise UnsupportedToken(f"unsupported bracket atom [{body}]", pos)
    # two-letter organic subset first
    if text[pos : pos + 2] in ("Cl", "Br"):
        return text[pos : pos + 2], False, pos + 2
    if ch in "BCNOPSFI":
        return ch, False, pos + 1
    if ch in "bcnops":
        return AROMATIC_SYMBOLS[ch], True, pos + 1
    raise UnsupportedToken(f"unexpected character {ch!r}", pos)


def parse_smiles(text: str) -> MolGraph:
    """Parse a subset-grammar SMILES string into a MolGraph."""
    if not text:
        raise UnsupportedToken("empty SMILES", 0)
    atoms = []  # (atomic_number, aromatic)
    bonds = {}  # (u, v) -> bond type
    stack = []
    prev = None  # index of the atom a new bond attaches to
    pending_bond = None  # explicit bond symbol awaiting its right-hand atom
    pending_pos = 0
    ring_open = {}  # closure label -> (atom index, explicit bond, offset)

    def add_bond(u, v, explicit, pos):
        if u == v:
            raise UnsupportedToken("ring closure forms a self-loop", pos)
        key = (min(u, v), max(u, v))
        if key in bonds:
            raise UnsupportedToken("duplicate bond", pos)
        if explicit is not None:
            t = explicit
        elif atoms[u][1] and atoms[v][1]:
            t = "aromatic"
        else:
            t = "single"
        bonds[key] = t

    pos = 0
    while pos < len(text):
        ch = text[pos]
        if ch == "(":
            if prev is None:
                raise UnbalancedBranch("branch before any atom", pos)
            stack.append(prev)
            pos += 1
        elif ch == ")":
            if not stack:
                raise UnbalancedBranch("unmatched ')'", pos)
            prev = stack.pop()
            pos += 1
        elif ch in _BOND_SYMBOL:
            if pending_bond is not None:
                raise UnsupportedToken("two consecutive bond symbols", pos)
            pending_bond = _BOND_SYMBOL[ch]
            pending_pos = pos
            pos += 1
        elif ch.isdigit() or ch == "%":
            if ch == "%":
                label = text[pos + 1 : pos + 3]
                if len(label) != 2 or not label.isdigit():
                    raise UnsupportedToken("'%' needs two digits", pos)
                nxt = pos + 3
            else:
                label = ch
                nxt = pos + 1
            if prev is None:
                raise DanglingRingClosure("ring closure before any atom", pos)
            if label in ring_open:
                other, open_bond, _ = ring_open.pop(label)
                explicit = pending_bond if pending_bond is not None else open_bond
                add_bond(other, prev, explicit, pos)
            else:
                ring_open[label] = (prev, pending_bond, pos)
            pending_bond = None
            pos = nxt
        else:
            symbol, aromatic, nxt = _read_atom(text, pos)
            atoms.append((ATOMIC_NUMBER[symbol], aromatic))
            idx = len(atoms) - 1
            if prev is not None:
                add_bond(prev, idx, pending_bond, pos)
            elif pending_bond is not None:
                raise UnsupportedToken("bond symbol before any atom", pending_pos)
            pending_bond = None
            prev = idx
            pos = nxt

    if stack:
        raise UnbalancedBranch("unclosed '('", len(text))
    if ring_open:
        label, (_, _, opened_at) = next(iter(ring_open.items()))
        raise DanglingRingClosure(f"ring closure {label} never closed", opened_at)
    if pending_bond is not None:
        raise UnsupportedToken("trailing bond symbol", pending_pos)

    return MolGraph(
        nodes=[Atom(z, i) for i, (z, _) in enumerate(atoms)],
        edges=[Bond(u, v, t) for (u, v), t in sorted(bonds.items())],
    )


# ---------------------------------------------------------------------------
# JSON graph schema


def graph_to_obj(g: MolGraph) -> dict:
    obj = {
        "nodes": [{"z": a.atomic_number} for a in g.nodes],
        "edges": [{"u": b.u, "v": b.v, "t": b.bond_type} for b in g.edges],
    }
    if g.name is not None:
        obj["name"] = g.name
    return obj


def graph_from_obj(obj: dict, path: str = "$") -> MolGraph:
    if not isinstance(obj, dict):
        raise SchemaError("expected object", path)
    if "nodes" not in obj or not isinstance(obj["nodes"], list):
        raise SchemaError("missing or invalid 'nodes'", f"{path}.nodes")
    if "edges" not in obj or not isinstance(obj["edges"], list):
        raise SchemaError("missing or invalid 'edges'", f"{path}.edges")
    nodes = []
    for i, nd in enumerate(obj["nodes"]):
        z = nd.get("z") if isinstance(nd, dict) else None
        if not isinstance(z, int) or not 1 <= z <= 118:
            raise SchemaError("node 'z' must be an int in [1,118]", f"{path}.nodes[{i}].z")
        nodes.append(Atom(z, i))
    edges = []
    for i, ed in enumerate(obj["edges"]):
        epath = f"{path}.edges[{i}]"
        if not isinstance(ed, dict):
            raise SchemaError("expected edge object", epath)
        u, v, t = ed.get("u"), ed.get("v"), ed.get("t")
        if not isinstance(u, int) or not isinstance(v, int):
            raise SchemaError("edge endpoints must be ints", epath)
        if u == v:
            raise SchemaError("self-loop edge", epath)
        if t not in BOND_TYPES:
            raise SchemaError(f"unknown bond type {t!r}", f"{epath}.t")
        edges.append(Bond(u, v, t))
    name = obj.get("name")
    if name is not None and not isinstance(name, str):
        raise SchemaError("'name' must be a string", f"{path}.name")
    try:
        return MolGraph(nodes=nodes, edges=edges, name=name)
    except ValueError as e:
        raise SchemaError(str(e), path) from e


def write_graph_json(g: MolGraph) -> bytes:
    return json.dumps(graph_to_obj(g), separators=(",", ":")).encode()


def read_graph_json(data: bytes) -> MolGraph:
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON: {e.msg}", "$") from e
    return graph_from_obj(obj)


# ---------------------------------------------------------------------------
# Datasets


@dataclass
class LoadReport:
    total_rows: int = 0
    parsed: int = 0
    skipped: list[tuple[int, str]] = field(default_factory=list)

    def summary(self):
        return (
            f"{self.parsed}/{self.total_rows} rows parsed, "
            f"{len(self.skipped)} skipped"
        )


@dataclass
class Dataset:
    records: list[tuple[MolGraph, list[float | None]]]
    task_count: int
    report: LoadReport | None = None

    def __post_init__(self):
        for g, labels in self.records:
            if len(labels) != self.task_count:
                raise ValueError("label vector length != task_count")

    def __len__(self):
        return len(self.records)

    def graphs(self):
        return [g for g, _ in self.records]


def load_dataset(path, fmt: str = "csv-smiles") -> Dataset:
    if fmt == "csv-smiles":
        return _load_csv(path)
    if fmt == "jsonl":
        return _load_jsonl(path)
    raise IoError(f"unknown dataset format {fmt!r}")


def _load_csv(path) -> Dataset:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise IoError(f"{path}: empty file")
            if "smiles" not in header:
                raise IoError(f"{path}: no 'smiles' column")
            si = header.index("smiles")
            label_cols = [i for i in range(len(header)) if i != si]
            report = LoadReport()
            records = []
            for rownum, row in enumerate(reader, start=2):
                report.total_rows += 1
                try:
                    g = parse_smiles(row[si])
                except Exception as e:
                    report.skipped.append((rownum, str(e)))
                    continue
                labels = []
                for i in label_cols:
                    cell = row[i].strip() if i < len(row) else ""
                    labels.append(float(cell) if cell else None)
                records.append((g, labels))
                report.parsed += 1
    except OSError as e:
        raise IoError(str(e)) from e
    if report.total_rows and not records:
        raise AllRowsFailed(f"{path}: every row failed to parse")
    return Dataset(records=records, task_count=len(label_cols), report=report)


def _load_jsonl(path) -> Dataset:
    report = LoadReport()
    records = []
    task_count = 0
    try:
        with open(path, encoding="utf-8") as fh:
            for rownum, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                report.total_rows += 1
                try:
                    obj = json.loads(line)
                    g = graph_from_obj(obj)
                except Exception as e:
                    report.skipped.append((rownum, str(e)))
                    continue
                labels = obj.get("labels", []) if isinstance(obj, dict) else []
                labels = [None if x is None else float(x) for x in labels]
                task_count = max(task_count, len(labels))
                records.append((g, labels))
                report.parsed += 1
    except OSError as e:
        raise IoError(str(e)) from e
    if report.total_rows and not records:
        raise AllRowsFailed(f"{path}: every row failed to parse")
    # pad shorter label vectors with explicit missing markers
    records = [(g, ls + [None] * (task_count - len(ls))) for g, ls in records]
    return Dataset(records=records, task_count=task_count, report=report)


def _largest_remainder_counts(n, fractions):
    ideal = [f * n for f in fractions]
    counts = [int(np.floor(x)) for x in ideal]
    rem = n - sum(counts)
    order = sorted(range(len(fractions)), key=lambda i: ideal[i] - counts[i], reverse=True)
    for i in order[:rem]:
        counts[i] += 1
    return counts


def random_stratified_split(dataset: Dataset, fractions, seed):
    """Split into (train, valid, test) index lists, stratified when the labels
    are binary single-task, plain random otherwise. Deterministic per seed."""
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must sum to 1")
    n = len(dataset)
    rng = np.random.default_rng(seed)

    stratify = None
    if dataset.task_count == 1:
        labels = [ls[0] for _, ls in dataset.records]
        if all(l in (0.0, 1.0) for l in labels):
            stratify = labels

    parts = [[], [], []]
    if stratify is None:
        perm = rng.permutation(n)
        counts = _largest_remainder_counts(n, fractions)
        at = 0
        for p, c in enumerate(counts):
            parts[p] = sorted(int(i) for i in perm[at : at + c])
            at += c
    else:
        for cls in (0.0, 1.0):
            idx = np.array([i for i, l in enumerate(stratify) if l == cls], dtype=int)
            perm = idx[rng.permutation(len(idx))]
            counts = _largest_remainder_counts(len(idx), fractions)
            at = 0
            for p, c in enumerate(counts):
                parts[p].extend(int(i) for i in perm[at : at + c])
                at += c
        parts = [sorted(p) for p in parts]

    for p, frac in zip(parts, fractions):
        if frac > 0 and not p:
            raise EmptySplit(f"fraction {frac} produced an empty part (n={n})")
    return tuple(parts)
