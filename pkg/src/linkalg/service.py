"""HTTP service exposing exploration, checking, simulation, bisimulation and traces."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import ValidationError

from . import api
from .scenarios import SCENARIOS

app = FastAPI(title="linkalg", version="0.1.0")


def _run(handler, req):
    try:
        return handler(req)
    except api.ResourceError as exc:
        raise HTTPException(status_code=422, detail={"kind": "resource", "message": str(exc)}) from exc
    except (api.ConfigError, api.ModelError, ValidationError, KeyError) as exc:
        raise HTTPException(status_code=400, detail={"kind": "config", "message": str(exc)}) from exc


@app.get("/health")
def health() -> dict:
    return {"status": "ok"}


@app.get("/scenarios")
def scenarios() -> list[str]:
    return sorted(SCENARIOS)


@app.post("/explore", response_model=api.ExploreResponse)
def explore(req: api.ExploreRequest):
    return _run(api.handle_explore, req)


@app.post("/check", response_model=api.CheckResponse)
def check(req: api.CheckRequest):
    return _run(api.handle_check, req)


@app.post("/simulate", response_model=api.SimulateResponse)
def simulate(req: api.SimulateRequest):
    return _run(api.handle_simulate, req)


@app.post("/bisim", response_model=api.BisimResponse)
def bisim(req: api.BisimRequest):
    return _run(api.handle_bisim, req)


@app.post("/trace", response_model=api.TraceResponse)
def trace(req: api.TraceRequest):
    return _run(api.handle_trace, req)


@app.post("/replay", response_model=api.ReplayResponse)
def replay(req: api.ReplayRequest):
    return _run(api.handle_replay, req)


def main() -> None:  # pragma: no cover - thin wrapper around uvicorn
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(description="run the linkalg HTTP service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    args = parser.parse_args()
    uvicorn.run(app, host=args.host, port=args.port)
