"""Read-only round status routes for the aggregator.

Only round numbers, counts and byte totals are exposed; ciphertext bodies
and key material never leave the aggregator through this surface.
"""

from __future__ import annotations

import logging
from datetime import datetime

from fastapi import APIRouter, Depends, HTTPException, Query
from pydantic import BaseModel, Field

from esafl.engine.aggregator import AggregatorState, RoundStatus

logger = logging.getLogger(__name__)

router = APIRouter(prefix="/rounds", tags=["rounds"])


# =============================================================================
# Response Models
# =============================================================================


class RoundSummary(BaseModel):
    """Public summary of one round."""

    round: int
    state: str
    received: int
    expected: int
    ciphertexts: int
    length: int | None = None
    uplink_bytes: int
    downlink_bytes: int
    aggregate_ms: float
    opened_at: datetime
    closed_at: datetime | None = None
    abort_reason: str | None = None


class RoundHistory(BaseModel):
    rounds: list[RoundSummary] = Field(default_factory=list)
    total_uplink_bytes: int = 0
    total_downlink_bytes: int = 0


def _summary(status: RoundStatus) -> RoundSummary:
    return RoundSummary(
        round=status.round_index,
        state=status.state.value,
        received=status.received,
        expected=status.expected,
        ciphertexts=status.ciphertexts,
        length=status.length,
        uplink_bytes=status.uplink_bytes,
        downlink_bytes=status.downlink_bytes,
        aggregate_ms=status.aggregate_ms,
        opened_at=status.opened_at,
        closed_at=status.closed_at,
        abort_reason=status.abort_reason,
    )


# =============================================================================
# Aggregator registry
# =============================================================================

_aggregator: AggregatorState | None = None


def get_aggregator() -> AggregatorState:
    """Aggregator whose state the routes report."""
    if _aggregator is None:
        raise HTTPException(status_code=503, detail="No aggregator is running")
    return _aggregator


def set_aggregator(aggregator: AggregatorState | None) -> None:
    global _aggregator
    _aggregator = aggregator


# =============================================================================
# Routes
# =============================================================================


@router.get("/current", response_model=RoundSummary)
async def get_current_round(
    aggregator: AggregatorState = Depends(get_aggregator),
) -> RoundSummary:
    """The open round."""
    return _summary(aggregator.current)


@router.get("/history", response_model=RoundHistory)
async def get_round_history(
    limit: int = Query(100, ge=1, le=10000),
    aggregator: AggregatorState = Depends(get_aggregator),
) -> RoundHistory:
    """Closed rounds, most recent last."""
    closed = aggregator.history[-limit:]
    return RoundHistory(
        rounds=[_summary(status) for status in closed],
        total_uplink_bytes=sum(s.uplink_bytes for s in aggregator.history),
        total_downlink_bytes=sum(s.downlink_bytes for s in aggregator.history),
    )
