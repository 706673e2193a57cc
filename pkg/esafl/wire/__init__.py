"""Framing and message encoding for client/aggregator traffic."""

from esafl.wire.frames import Frame, MsgType, read_frame, write_frame
from esafl.wire.messages import (
    Abort,
    AbortReason,
    KeyIssue,
    ProtocolMessage,
    RoundResult,
    RoundSubmit,
    deserialize,
    serialize,
    to_frame,
)

__all__ = [
    "Frame",
    "MsgType",
    "read_frame",
    "write_frame",
    "KeyIssue",
    "RoundSubmit",
    "RoundResult",
    "Abort",
    "AbortReason",
    "ProtocolMessage",
    "serialize",
    "deserialize",
    "to_frame",
]
