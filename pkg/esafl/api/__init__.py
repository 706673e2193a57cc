"""HTTP routes for the aggregator status surface."""

from esafl.api.status import router as status_router

__all__ = ["status_router"]
