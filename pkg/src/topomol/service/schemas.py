"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class ParseRequest(BaseModel):
    smiles: str


class GraphNode(BaseModel):
    z: int


class GraphEdge(BaseModel):
    u: int
    v: int
    t: str


class GraphResponse(BaseModel):
    nodes: list[GraphNode]
    edges: list[GraphEdge]
    name: str | None = None


class FingerprintRequest(BaseModel):
    smiles: list[str]
    filters: str = "atom"  # preset name: atom | hks | degree | ahd
    resolution: int = 16
    sigma: float | None = None


class FingerprintResponse(BaseModel):
    width: int
    rows: list[list[float]]


class DiagramRequest(BaseModel):
    smiles: str
    filter: str = "atomic_number"
    hks_t: float = 0.1


class DiagramPoint(BaseModel):
    birth: float
    death: float
    dim: int
    kind: str


class DiagramResponse(BaseModel):
    points: list[DiagramPoint]
    filter_tag: str


class TdlRequest(BaseModel):
    z: list[list[float]]
    fingerprints: list[list[float]]
    tau: float = Field(0.1, gt=0)


class ScalarResponse(BaseModel):
    value: float


class TdlGradRequest(BaseModel):
    z: list[list[float]]
    fingerprints: list[list[float]]
    tau: float = Field(0.1, gt=0)
    n: int
    i: int


class VectorResponse(BaseModel):
    vector: list[float]


class TaeRequest(BaseModel):
    h: list[list[float]]
    fingerprints: list[list[float]]


class NtxentRequest(BaseModel):
    z_i: list[list[float]]
    z_j: list[list[float]]
    tau: float = Field(0.1, gt=0)


class HealthResponse(BaseModel):
    status: str
    version: str
