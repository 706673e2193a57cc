"""Length-prefixed framing over reliable byte streams.

Frame layout: payload length (4 bytes, little-endian), message type (1 byte),
payload. The length counts payload bytes only.
"""

from __future__ import annotations

import asyncio
import logging
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import BinaryIO

from esafl.scheme.errors import (
    FrameTooLargeError,
    KeyExposureError,
    MalformedFrameError,
    TruncatedFrameError,
)

logger = logging.getLogger(__name__)

HEADER = struct.Struct("<IB")
HEADER_SIZE = HEADER.size
DEFAULT_MAX_FRAME = 256 * 1024 * 1024


class MsgType(IntEnum):
    """Registered message types."""

    KEY_ISSUE = 0x01
    ROUND_SUBMIT = 0x02
    ROUND_RESULT = 0x03
    ABORT = 0x7F


@dataclass(frozen=True)
class Frame:
    """One framed message."""

    msg_type: MsgType
    payload: bytes

    @property
    def length(self) -> int:
        return len(self.payload)

    @property
    def size(self) -> int:
        """Bytes on the wire, header included."""
        return HEADER_SIZE + len(self.payload)

    def to_bytes(self) -> bytes:
        return HEADER.pack(len(self.payload), int(self.msg_type)) + self.payload


def parse_header(header: bytes, max_bytes: int = DEFAULT_MAX_FRAME) -> tuple[int, MsgType]:
    """Validate a 5-byte header; returns (payload length, message type)."""
    length, raw_type = HEADER.unpack(header)
    if length > max_bytes:
        raise FrameTooLargeError(f"frame of {length} bytes exceeds cap of {max_bytes}")
    try:
        msg_type = MsgType(raw_type)
    except ValueError:
        raise MalformedFrameError(f"unknown message type 0x{raw_type:02x}") from None
    return length, msg_type


async def read_frame(
    reader: asyncio.StreamReader, max_bytes: int = DEFAULT_MAX_FRAME
) -> Frame | None:
    """Read one frame; returns None on a clean end of stream between frames."""
    try:
        header = await reader.readexactly(HEADER_SIZE)
    except asyncio.IncompleteReadError as exc:
        if not exc.partial:
            return None
        raise TruncatedFrameError("stream ended inside a frame header") from None
    length, msg_type = parse_header(header, max_bytes)
    try:
        payload = await reader.readexactly(length)
    except asyncio.IncompleteReadError as exc:
        raise TruncatedFrameError(
            f"stream ended after {len(exc.partial)} of {length} payload bytes"
        ) from None
    return Frame(msg_type, payload)


async def write_frame(
    writer: asyncio.StreamWriter, frame: Frame, *, confidential: bool = False
) -> None:
    """Write one frame and drain.

    KeyIssue frames are refused unless the caller vouches for a confidential
    transport; the open TCP transport never does.
    """
    if frame.msg_type is MsgType.KEY_ISSUE and not confidential:
        raise KeyExposureError("refusing to send key material over the open transport")
    writer.write(frame.to_bytes())
    await writer.drain()


def read_frame_sync(stream: BinaryIO, max_bytes: int = DEFAULT_MAX_FRAME) -> Frame | None:
    """Blocking variant for files and in-memory buffers."""
    header = _read_exactly(stream, HEADER_SIZE)
    if not header:
        return None
    if len(header) < HEADER_SIZE:
        raise TruncatedFrameError("stream ended inside a frame header")
    length, msg_type = parse_header(header, max_bytes)
    payload = _read_exactly(stream, length)
    if len(payload) < length:
        raise TruncatedFrameError(f"stream ended after {len(payload)} of {length} payload bytes")
    return Frame(msg_type, payload)


def write_frame_sync(stream: BinaryIO, frame: Frame) -> None:
    stream.write(frame.to_bytes())


def _read_exactly(stream: BinaryIO, count: int) -> bytes:
    chunks = []
    got = 0
    while got < count:
        chunk = stream.read(count - got)
        if not chunk:
            break
        chunks.append(chunk)
        got += len(chunk)
    return b"".join(chunks)
