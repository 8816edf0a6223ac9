"""HTTP service wrapping the simulator.

Stateless: every run is a pure function of the posted document, so the
service can be scaled or restarted freely. ``POST /v1/run`` returns the
report in canonical serialization; equal config and seed give byte-identical
response bodies.
"""

from __future__ import annotations

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import ConfigError
from ..scenario import (
    builtin_speed_example,
    builtin_table1,
    canonical_bytes,
    parse_config,
    run_scenario,
)
from .models import (
    ErrorResponse,
    HealthResponse,
    RunRequest,
    SpeedExampleResponse,
    Table1Response,
    ValidateRequest,
    ValidateResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(
        title="syncsim",
        version=__version__,
        description="Deterministic sensor time-synchronization simulator",
    )

    @app.exception_handler(ConfigError)
    async def config_error_handler(_request: Request, exc: ConfigError) -> JSONResponse:
        return JSONResponse(
            status_code=400,
            content={"error": {"type": "config", "path": exc.path, "message": exc.message}},
        )

    @app.get("/healthz", response_model=HealthResponse)
    def healthz() -> HealthResponse:
        return HealthResponse(version=__version__)

    @app.get("/v1/table1", response_model=Table1Response)
    def table1() -> dict:
        return builtin_table1()

    @app.get("/v1/speed-example", response_model=SpeedExampleResponse)
    def speed_example() -> dict:
        return builtin_speed_example()

    @app.post(
        "/v1/validate",
        response_model=ValidateResponse,
        responses={400: {"model": ErrorResponse}},
    )
    def validate(request: ValidateRequest) -> ValidateResponse:
        config = parse_config(request.config)
        return ValidateResponse(valid=True, normalized=config.echo)

    @app.post(
        "/v1/run",
        responses={
            200: {"content": {"application/json": {}}, "description": "Canonical report"},
            400: {"model": ErrorResponse},
        },
    )
    def run(request: RunRequest) -> Response:
        config = parse_config(request.config)
        if request.seed is not None:
            config = config.with_seed(request.seed)
        result = run_scenario(config)
        return Response(content=canonical_bytes(result.report), media_type="application/json")

    return app


app = create_app()
