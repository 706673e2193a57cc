"""Aggregator state machine with a per-round barrier.

The aggregator holds only public parameters. It buffers RoundSubmit messages
keyed by (round, client), sums the ciphertexts position-wise exactly once
when all expected clients have submitted, and then opens the next round.
Transport code (in-process hub or TCP server) drives it.
"""

from __future__ import annotations

import logging
import time
from collections.abc import Iterable
from dataclasses import dataclass, field
from datetime import UTC, datetime
from enum import StrEnum

from esafl.scheme.eshe import Ciphertext, eval_add
from esafl.scheme.errors import (
    DuplicateSubmissionError,
    EsaflError,
    MalformedMessageError,
    StaleRoundError,
    UnknownClientError,
)
from esafl.scheme.params import SchemeParams, ciphertext_count
from esafl.wire.messages import AbortReason, RoundResult, RoundSubmit, result_frame_size

logger = logging.getLogger(__name__)

_REJECTION_REASONS: dict[type[EsaflError], AbortReason] = {
    DuplicateSubmissionError: AbortReason.DUPLICATE_SUBMISSION,
    StaleRoundError: AbortReason.STALE_ROUND,
    UnknownClientError: AbortReason.UNKNOWN_CLIENT,
}


def rejection_reason(error: EsaflError) -> AbortReason:
    """Abort reason reported to a client whose submission was refused."""
    return _REJECTION_REASONS.get(type(error), AbortReason.MALFORMED)


class RoundState(StrEnum):
    """Lifecycle of one round at the aggregator."""

    COLLECTING = "collecting"
    AGGREGATED = "aggregated"
    ABORTED = "aborted"


@dataclass
class RoundStatus:
    """Public bookkeeping of one round (no ciphertext bodies)."""

    round_index: int
    expected: int
    received: int = 0
    state: RoundState = RoundState.COLLECTING
    length: int | None = None
    ciphertexts: int = 0
    uplink_bytes: int = 0
    downlink_bytes: int = 0
    aggregate_ms: float = 0.0
    opened_at: datetime = field(default_factory=lambda: datetime.now(UTC))
    closed_at: datetime | None = None
    abort_reason: str | None = None


class AggregatorState:
    """Barrier aggregation over one cohort."""

    def __init__(
        self,
        params: SchemeParams,
        client_ids: Iterable[int] | None = None,
        start_round: int = 1,
    ) -> None:
        self.params = params
        ids = client_ids if client_ids is not None else range(params.num_clients)
        self.expected = frozenset(ids)
        if len(self.expected) != params.num_clients:
            raise ValueError(
                f"cohort of {len(self.expected)} clients, parameters expect {params.num_clients}"
            )
        self.current_round = start_round
        self._received: dict[tuple[int, int], RoundSubmit] = {}
        self.history: list[RoundStatus] = []
        self.current = RoundStatus(start_round, len(self.expected))

    @property
    def pending_clients(self) -> frozenset[int]:
        """Clients that have not yet submitted for the open round."""
        done = {client for (t, client) in self._received if t == self.current_round}
        return self.expected - done

    def received_bodies(self) -> list[Ciphertext]:
        """Everything the aggregator currently observes of the open round."""
        return [ct for submit in self._received.values() for ct in submit.ciphertexts]

    def submit(self, msg: RoundSubmit, wire_bytes: int = 0) -> RoundResult | None:
        """Buffer one submission; returns the RoundResult when the barrier fires.

        Raises:
            UnknownClientError, StaleRoundError, DuplicateSubmissionError:
                the submission is rejected and the buffer is unchanged.
            MalformedMessageError: the ciphertext list disagrees with L or
                with earlier submissions of the round.
        """
        if msg.client_id not in self.expected:
            raise UnknownClientError(f"client {msg.client_id} is not in the cohort")
        if msg.round_index != self.current_round:
            raise StaleRoundError(
                f"client {msg.client_id} submitted for round {msg.round_index}, "
                f"round {self.current_round} is open"
            )
        key = (msg.round_index, msg.client_id)
        if key in self._received:
            raise DuplicateSubmissionError(
                f"client {msg.client_id} already submitted for round {msg.round_index}"
            )
        if len(msg.ciphertexts) != ciphertext_count(msg.length, self.params):
            raise MalformedMessageError(
                f"length {msg.length} does not match {len(msg.ciphertexts)} ciphertexts"
            )
        if self.current.length is not None and msg.length != self.current.length:
            raise MalformedMessageError(
                f"client {msg.client_id} sent length {msg.length}, round uses {self.current.length}"
            )
        if any(ct.round_index != msg.round_index or ct.agg_count != 1 for ct in msg.ciphertexts):
            raise MalformedMessageError("submission carries foreign or pre-aggregated ciphertexts")

        self._received[key] = msg
        self.current.length = msg.length
        self.current.ciphertexts = len(msg.ciphertexts)
        self.current.received += 1
        self.current.uplink_bytes += wire_bytes
        logger.debug(
            f"Round {msg.round_index}: {self.current.received}/{len(self.expected)} submissions"
        )
        if self.pending_clients:
            return None
        return self._fire()

    def _fire(self) -> RoundResult:
        t = self.current_round
        submits = [self._received[(t, client)] for client in sorted(self.expected)]
        started = time.perf_counter()
        sums = tuple(
            eval_add([submit.ciphertexts[i] for submit in submits], self.params)
            for i in range(self.current.ciphertexts)
        )
        result = RoundResult(t, len(self.expected), self.current.length or 0, sums)
        self.current.aggregate_ms = (time.perf_counter() - started) * 1000
        self.current.downlink_bytes = len(self.expected) * result_frame_size(len(sums), self.params)
        self.current.state = RoundState.AGGREGATED
        logger.info(
            f"Round {t} aggregated: {len(sums)} ciphertexts from {len(submits)} clients "
            f"in {self.current.aggregate_ms:.1f} ms"
        )
        self._close_round()
        return result

    def abort(self, reason: str) -> RoundStatus:
        """Abort the open round, dropping its buffered submissions."""
        self.current.state = RoundState.ABORTED
        self.current.abort_reason = reason
        aborted = self.current
        logger.warning(f"Round {aborted.round_index} aborted: {reason}")
        self._close_round()
        return aborted

    def _close_round(self) -> None:
        t = self.current_round
        self.current.closed_at = datetime.now(UTC)
        self.history.append(self.current)
        for key in [k for k in self._received if k[0] == t]:
            del self._received[key]
        self.current_round = t + 1
        self.current = RoundStatus(self.current_round, len(self.expected))
