"""Asyncio TCP connection from a client to the aggregator."""

from __future__ import annotations

import asyncio
import logging

from esafl.config.settings import Settings, get_settings
from esafl.scheme.errors import RoundAbortedError, TruncatedFrameError
from esafl.wire.frames import Frame, read_frame, write_frame

logger = logging.getLogger(__name__)


class AggregatorConnection:
    """One client's long-lived connection; one request/response per round."""

    def __init__(self, host: str, port: int, settings: Settings | None = None) -> None:
        self.settings = settings or get_settings()
        self.host = host
        self.port = port
        self._reader: asyncio.StreamReader | None = None
        self._writer: asyncio.StreamWriter | None = None

    async def connect(self) -> None:
        self._reader, self._writer = await asyncio.open_connection(self.host, self.port)
        logger.debug(f"Connected to aggregator at {self.host}:{self.port}")

    async def close(self) -> None:
        if self._writer is not None:
            self._writer.close()
            try:
                await self._writer.wait_closed()
            except ConnectionError:
                pass
            self._writer = None
            self._reader = None

    async def __aenter__(self) -> AggregatorConnection:
        await self.connect()
        return self

    async def __aexit__(self, *exc: object) -> None:
        await self.close()

    async def exchange(self, frame: Frame, round_index: int) -> Frame:
        """Send one submission and wait for the aggregator's reply.

        The wait is bounded by twice the round timeout so a vanished
        aggregator cannot hang the client.
        """
        if self._reader is None or self._writer is None:
            raise RuntimeError("not connected")
        await write_frame(self._writer, frame)
        try:
            reply = await asyncio.wait_for(
                read_frame(self._reader, self.settings.max_frame_bytes),
                timeout=2 * self.settings.round_timeout,
            )
        except TimeoutError:
            raise RoundAbortedError(round_index, "no reply from aggregator") from None
        if reply is None:
            raise TruncatedFrameError("aggregator closed the connection")
        return reply
