"""FastAPI service exposing the pure computations: SMILES parsing,
fingerprinting, persistence diagrams, and loss evaluation. Training stays in
the CLI; everything served here is stateless and deterministic.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException

from .. import __version__
from ..errors import TopomolError
from ..filtration import FILTER_PRESETS, FilterKind
from ..losses import ntxent_loss, tae_loss, tdl_gradient_analytic, tdl_loss
from ..molio import graph_to_obj, parse_smiles
from ..vectorize import diagram_for_graph, fingerprint_corpus
from . import schemas as S

app = FastAPI(title="topomol", version=__version__)


def _bad_request(e: Exception):
    return HTTPException(status_code=400, detail=f"{type(e).__name__}: {e}")


@app.get("/health", response_model=S.HealthResponse)
def health():
    return S.HealthResponse(status="ok", version=__version__)


@app.post("/parse", response_model=S.GraphResponse)
def parse(req: S.ParseRequest):
    try:
        return graph_to_obj(parse_smiles(req.smiles))
    except TopomolError as e:
        raise _bad_request(e)


@app.post("/fingerprint", response_model=S.FingerprintResponse)
def fingerprint(req: S.FingerprintRequest):
    if req.filters not in FILTER_PRESETS:
        raise HTTPException(status_code=400, detail=f"unknown filter preset {req.filters!r}")
    try:
        graphs = [parse_smiles(s) for s in req.smiles]
        fps, _ = fingerprint_corpus(
            graphs, FILTER_PRESETS[req.filters], resolution=req.resolution, sigma=req.sigma
        )
    except (TopomolError, ValueError) as e:
        raise _bad_request(e)
    rows = [[float(v) for v in fp.values] for fp in fps]
    return S.FingerprintResponse(width=len(rows[0]) if rows else 0, rows=rows)


@app.post("/diagram", response_model=S.DiagramResponse)
def diagram(req: S.DiagramRequest):
    try:
        kind = FilterKind(req.filter, req.hks_t) if req.filter == "hks" else FilterKind(req.filter)
        d = diagram_for_graph(parse_smiles(req.smiles), kind)
    except (TopomolError, ValueError) as e:
        raise _bad_request(e)
    return S.DiagramResponse(
        points=[
            S.DiagramPoint(birth=p.birth, death=p.death, dim=p.dim, kind=p.kind)
            for p in sorted(d.points, key=lambda p: (p.dim, p.kind, p.birth, p.death))
        ],
        filter_tag=d.filter_tag,
    )


@app.post("/loss/tdl", response_model=S.ScalarResponse)
def loss_tdl(req: S.TdlRequest):
    try:
        return S.ScalarResponse(value=tdl_loss(np.array(req.z), np.array(req.fingerprints), req.tau))
    except (TopomolError, ValueError) as e:
        raise _bad_request(e)


@app.post("/loss/tdl-grad", response_model=S.VectorResponse)
def loss_tdl_grad(req: S.TdlGradRequest):
    try:
        g = tdl_gradient_analytic(np.array(req.z), np.array(req.fingerprints), req.tau, req.n, req.i)
    except (TopomolError, ValueError) as e:
        raise _bad_request(e)
    return S.VectorResponse(vector=[float(v) for v in g])


@app.post("/loss/tae", response_model=S.ScalarResponse)
def loss_tae(req: S.TaeRequest):
    try:
        return S.ScalarResponse(value=tae_loss(np.array(req.h), np.array(req.fingerprints)))
    except (TopomolError, ValueError) as e:
        raise _bad_request(e)


@app.post("/loss/ntxent", response_model=S.ScalarResponse)
def loss_ntxent(req: S.NtxentRequest):
    try:
        return S.ScalarResponse(value=ntxent_loss(np.array(req.z_i), np.array(req.z_j), req.tau))
    except (TopomolError, ValueError) as e:
        raise _bad_request(e)
