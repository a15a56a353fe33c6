import dataclasses
import json
from functools import lru_cache
from typing import List, Optional

from dotenv import load_dotenv
from fastapi import Depends, FastAPI, HTTPException, Response
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel
from sse_starlette.sse import EventSourceResponse

from unirecover.bench import ExperimentConfig, ExperimentKind, RunArchive, build_lattice, iter_experiment
from unirecover.config import get_settings
from unirecover.cubature import max_exact_cross
from unirecover.discretization import certify_collection
from unirecover.errors import MissingCertificateError, UnirecoverError
from unirecover.function_classes import parse_function_spec, samples_function
from unirecover.lattices import as_point_set
from unirecover.recovery import certified_budget, universal_cheb_recover, universal_vp_recover

load_dotenv()

app = FastAPI(title="unirecover")
settings = get_settings()

app.add_middleware(
    CORSMiddleware,
    allow_origins=settings.cors_origins,
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


class ExactnessRequest(BaseModel):
    m: int
    h: List[int]
    d: int
    nmax: Optional[int] = None


class RecoverRequest(BaseModel):
    lattice: str
    function: Optional[str] = None
    samples: Optional[List[float]] = None
    mode: str = "vp"
    budget: Optional[int] = None


class CertifyRequest(BaseModel):
    points: str
    n: int
    d: int
    probes: Optional[int] = None
    seed: Optional[int] = None
    exact: bool = False


@lru_cache()
def get_archive() -> RunArchive:
    return RunArchive()


@app.get("/health")
async def health():
    return {"status": "ok"}


@app.post("/cubature/exactness")
def cubature_exactness(request: ExactnessRequest):
    try:
        cert = max_exact_cross(request.m, request.h, request.d, request.nmax)
    except ValueError as e:
        raise HTTPException(status_code=422, detail=str(e))
    return {**cert.model_dump(), "gamma_hat": cert.gamma_hat}


@app.post("/recover")
def recover(request: RecoverRequest):
    if (request.function is None) == (request.samples is None):
        raise HTTPException(status_code=422, detail="Give exactly one of function or samples")
    if request.mode not in ("vp", "cheb"):
        raise HTTPException(status_code=422, detail=f"Unknown mode {request.mode!r}")
    try:
        lattice = build_lattice(request.lattice)
        d = as_point_set(lattice).dim
        if request.samples is not None:
            f = samples_function(request.samples, d)
        else:
            f = parse_function_spec(request.function, d)
        budget = request.budget if request.budget is not None else certified_budget(lattice)
        if budget is None:
            raise ValueError(f"{request.lattice} certifies no shape; give a budget")
        if request.mode == "vp":
            result = universal_vp_recover(lattice, f, budget)
        else:
            result = universal_cheb_recover(lattice, f, budget)
    except (ValueError, UnirecoverError) as e:
        raise HTTPException(status_code=422, detail=str(e))
    return Response(result.summary().model_dump_json(), media_type="application/json")


@app.post("/discretize/certify")
def discretize_certify(request: CertifyRequest):
    try:
        points = build_lattice(request.points)
        report = certify_collection(
            points, request.n, request.d, request.probes, seed=request.seed, exact=request.exact
        )
    except ValueError as e:
        raise HTTPException(status_code=422, detail=str(e))
    return Response(report.model_dump_json(), media_type="application/json")


def stream_rows(config: ExperimentConfig):
    try:
        for record in iter_experiment(config):
            yield {"data": record.model_dump_json()}
    except (ValueError, MissingCertificateError) as e:
        yield {"event": "error", "data": json.dumps({"error": str(e)})}
        return
    yield {"event": "done", "data": json.dumps({"kind": config.kind.value})}


@app.post("/bench/{kind}")
async def bench(kind: ExperimentKind, config: ExperimentConfig):
    if config.kind != kind:
        raise HTTPException(status_code=422, detail=f"Config kind {config.kind.value} != {kind.value}")
    return EventSourceResponse(stream_rows(config), media_type="text/event-stream")


@app.get("/runs")
def list_runs(kind: Optional[str] = None, archive: RunArchive = Depends(get_archive)):
    return archive.list_runs(kind)


@app.get("/runs/{run_id}")
def get_run(run_id: str, archive: RunArchive = Depends(get_archive)):
    try:
        run = archive.get_run(run_id)
        rows = archive.get_rows(run_id)
    except ValueError as e:
        raise HTTPException(status_code=404, detail=str(e))
    payload = {"run": dataclasses.asdict(run), "rows": [row.content for row in rows]}
    return Response(json.dumps(payload, default=str), media_type="application/json")
