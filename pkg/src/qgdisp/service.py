"""HTTP service exposing the experiments; the CLI's ``--server`` mode talks to it."""

from __future__ import annotations

import base64
from typing import Any

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from . import __version__
from .config import Experiment, build_config, config_reference
from .errors import ConfigurationError
from .experiments import timed_run


class ExperimentRequest(BaseModel):
    config: dict[str, Any] = {}
    seed: int | None = None


class ExperimentResponse(BaseModel):
    experiment: str
    exit_code: int
    message: str
    files: dict[str, str]
    manifest: str


class HealthResponse(BaseModel):
    status: str
    version: str


app = FastAPI(title="qgdisp", version=__version__)


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.get("/config/reference")
def reference() -> dict[str, str]:
    return {"markdown": config_reference()}


@app.post("/experiments/{name}", response_model=ExperimentResponse)
def run(name: Experiment, req: ExperimentRequest) -> ExperimentResponse:
    data = dict(req.config)
    try:
        cfg = build_config(data, experiment=name.value, seed=req.seed)
    except ConfigurationError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from None
    res, manifest = timed_run(cfg)
    files = {k: base64.b64encode(v).decode() for k, v in res.files.items()}
    return ExperimentResponse(experiment=res.experiment, exit_code=res.exit_code, message=res.message, files=files, manifest=manifest)
