"""Asyncio TCP aggregator.

Each client keeps one connection open for the whole run and sends one
RoundSubmit per round, then waits for the RoundResult (or an Abort). The
round timer starts with the first submission of a round; when it expires
every connected client receives Abort(TIMEOUT) and the run ends.
"""

from __future__ import annotations

import asyncio
import logging
from collections.abc import Iterable

from esafl.config.settings import Settings, get_settings
from esafl.engine.aggregator import AggregatorState, rejection_reason
from esafl.scheme.errors import SubmissionRejectedError, WireError
from esafl.scheme.params import SchemeParams
from esafl.wire.frames import Frame, read_frame, write_frame
from esafl.wire.messages import Abort, AbortReason, RoundSubmit, deserialize, to_frame

logger = logging.getLogger(__name__)


class AggregatorServer:
    """TCP front end of an :class:`AggregatorState`."""

    def __init__(
        self,
        params: SchemeParams,
        settings: Settings | None = None,
        client_ids: Iterable[int] | None = None,
        rounds: int | None = None,
    ) -> None:
        """Initialize the server.

        Args:
            params: Public parameters; the aggregator never sees keys.
            settings: Optional settings. Uses global settings if not provided.
            client_ids: Expected cohort (default 0..N-1).
            rounds: Stop after this many aggregated rounds (None: run until closed).
        """
        self.settings = settings or get_settings()
        self.params = params
        self.aggregator = AggregatorState(params, client_ids)
        self.rounds = rounds
        self.finished = asyncio.Event()
        self.abort_reason: AbortReason | None = None
        self._server: asyncio.Server | None = None
        self._connections: dict[int, asyncio.StreamWriter] = {}
        self._waiting: set[int] = set()
        self._timer: asyncio.Task[None] | None = None

    @property
    def port(self) -> int:
        if self._server is None or not self._server.sockets:
            raise RuntimeError("server is not listening")
        return int(self._server.sockets[0].getsockname()[1])

    async def start(self, host: str | None = None, port: int | None = None) -> None:
        """Start listening (port 0 picks an ephemeral port)."""
        self._server = await asyncio.start_server(
            self._handle,
            host if host is not None else self.settings.host,
            port if port is not None else self.settings.port,
        )
        logger.info(
            f"Aggregator listening on port {self.port} for {len(self.aggregator.expected)} clients"
        )

    async def wait_finished(self) -> None:
        await self.finished.wait()

    async def close(self) -> None:
        if self._timer:
            self._timer.cancel()
        for writer in list(self._connections.values()):
            writer.close()
        self._connections.clear()
        if self._server is not None:
            self._server.close()
            await self._server.wait_closed()
            self._server = None
        self.finished.set()
        logger.info("Aggregator stopped")

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
        client_id: int | None = None
        try:
            while not self.finished.is_set():
                frame = await read_frame(reader, self.settings.max_frame_bytes)
                if frame is None:
                    break
                msg = deserialize(frame, self.params)
                if not isinstance(msg, RoundSubmit):
                    await self._send(writer, self._malformed())
                    break
                client_id = msg.client_id
                await self._on_submit(msg, frame, writer)
        except WireError as e:
            logger.warning(f"Dropping connection of client {client_id}: {e}")
            try:
                await self._send(writer, self._malformed())
            except (ConnectionError, WireError):
                pass
        except ConnectionError as e:
            logger.warning(f"Connection of client {client_id} lost: {e}")
        except Exception:
            logger.exception(f"Error handling client {client_id}")
        finally:
            if client_id is not None and self._connections.get(client_id) is writer:
                del self._connections[client_id]
            writer.close()

    async def _on_submit(
        self, msg: RoundSubmit, frame: Frame, writer: asyncio.StreamWriter
    ) -> None:
        try:
            result = self.aggregator.submit(msg, frame.size)
        except SubmissionRejectedError as e:
            logger.warning(f"Rejected submission: {e}")
            await self._send(writer, Abort(msg.round_index, rejection_reason(e)))
            return

        self._connections[msg.client_id] = writer
        self._waiting.add(msg.client_id)
        if result is None:
            if self._timer is None:
                self._timer = asyncio.create_task(self._round_timer(msg.round_index))
            return

        if self._timer:
            self._timer.cancel()
            self._timer = None
        out = to_frame(result, self.params)
        await self._broadcast(out)
        logger.info(
            f"Round {result.round_index} result sent to {len(self.aggregator.expected)} clients"
        )
        if self.rounds is not None and result.round_index >= self.rounds:
            self.finished.set()

    async def _round_timer(self, round_index: int) -> None:
        await asyncio.sleep(self.settings.round_timeout)
        if self.aggregator.current_round != round_index:
            return
        missing = sorted(self.aggregator.pending_clients)
        self.aggregator.abort(f"timeout after {self.settings.round_timeout}s, missing {missing}")
        self.abort_reason = AbortReason.TIMEOUT
        self._timer = None
        await self._broadcast(to_frame(Abort(round_index, AbortReason.TIMEOUT)))
        self.finished.set()

    async def _broadcast(self, frame: Frame) -> None:
        waiting = [self._connections[c] for c in sorted(self._waiting) if c in self._connections]
        self._waiting.clear()
        for writer in waiting:
            try:
                await write_frame(writer, frame)
            except ConnectionError as e:
                logger.warning(f"Broadcast to a client failed: {e}")

    async def _send(self, writer: asyncio.StreamWriter, msg: Abort) -> None:
        await write_frame(writer, to_frame(msg))

    def _malformed(self) -> Abort:
        return Abort(self.aggregator.current_round, AbortReason.MALFORMED)
