"""FastAPI service wrapping the core package."""

from __future__ import annotations

import json
from importlib import resources

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import workflows
from ..errors import HybredError
from ..systemspec import spec_from_dict
from .schemas import (
    CompareRequest,
    CompareResponse,
    ReduceRequest,
    ReduceResponse,
    SimulateRequest,
    SimulateResponse,
    VerifyRequest,
    VerifyResponse,
)

FIXTURE_NAMES = ("paper_sec5", "paper_sec5_kicked")


def load_fixture(name: str) -> dict:
    if name not in FIXTURE_NAMES:
        raise KeyError(name)
    text = resources.files("hybred.fixtures").joinpath(f"{name}.json").read_text()
    return json.loads(text)


def create_app() -> FastAPI:
    app = FastAPI(
        title="hybred",
        description="Simulation, symmetry verification, and momentum-map "
        "reduction of simple hybrid Hamiltonian systems.",
        version="0.1.0",
    )

    @app.exception_handler(HybredError)
    async def hybred_error_handler(request, exc: HybredError):
        return JSONResponse(
            status_code=400,
            content={"error": {"type": type(exc).__name__, "message": str(exc)}},
        )

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.get("/fixtures")
    def fixtures():
        return {"names": list(FIXTURE_NAMES)}

    @app.get("/fixtures/{name}")
    def fixture(name: str):
        try:
            return load_fixture(name)
        except KeyError:
            return JSONResponse(
                status_code=404,
                content={"error": {"type": "NotFound", "message": f"no fixture {name!r}"}},
            )

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest):
        spec = spec_from_dict(req.spec)
        return workflows.simulate(spec, x0=req.x0, T=req.T, h=req.h, method=req.method)

    @app.post("/verify", response_model=VerifyResponse)
    def verify(req: VerifyRequest):
        spec = spec_from_dict(req.spec)
        return {"report": workflows.verify(spec, seed=req.seed)}

    @app.post("/reduce", response_model=ReduceResponse)
    def reduce(req: ReduceRequest):
        spec = spec_from_dict(req.spec)
        return {"summary": workflows.reduce_level(spec, req.mu, seed=req.seed)}

    @app.post("/compare", response_model=CompareResponse)
    def compare(req: CompareRequest):
        spec = spec_from_dict(req.spec)
        return workflows.compare(
            spec,
            x0=req.x0,
            T=req.T,
            h=req.h,
            seed=req.seed,
            tol_state=req.tol_state,
            tol_time=req.tol_time,
        )

    return app
