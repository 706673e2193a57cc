"""FastAPI status surface for a running aggregator."""

from __future__ import annotations

import logging

import uvicorn
from fastapi import FastAPI

from esafl import __version__
from esafl.api import status_router
from esafl.api.status import set_aggregator
from esafl.config.settings import Settings, get_settings, set_settings
from esafl.engine.aggregator import AggregatorState

logger = logging.getLogger(__name__)


def create_app(
    aggregator: AggregatorState | None = None,
    settings: Settings | None = None,
) -> FastAPI:
    """Create the status application.

    Args:
        aggregator: Aggregator to report on; routes answer 503 until one is set.
        settings: Optional settings. Uses default settings if not provided.

    Returns:
        Configured FastAPI application
    """
    if settings:
        set_settings(settings)
    else:
        settings = get_settings()
    if aggregator is not None:
        set_aggregator(aggregator)

    app = FastAPI(
        title="ESAFL aggregator",
        description="Read-only round status of a federated aggregation run",
        version=__version__,
    )
    app.include_router(status_router, prefix="/api")

    @app.get("/api/health")
    async def health_check() -> dict[str, str]:
        """Global health check endpoint."""
        return {"status": "healthy", "service": "esafl"}

    return app


async def serve_status(app: FastAPI, host: str, port: int, log_level: str = "INFO") -> None:
    """Run uvicorn inside the current event loop until cancelled."""
    config = uvicorn.Config(app, host=host, port=port, log_level=log_level.lower())
    server = uvicorn.Server(config)
    logger.info(f"Status surface on http://{host}:{port}/api/health")
    await server.serve()
