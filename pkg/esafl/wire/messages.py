"""Protocol messages and their canonical byte encoding.

All integers are little-endian. Ring elements use the layout of
:meth:`RingElem.to_bytes`. A ciphertext is ``round (u64) | agg_count (u16) |
body``. Message payloads:

* KeyIssue    client_id u32 | profile_len u32 | profile | h u32 |
              h x (index u32, sign i8) | dec_bound u16 | n x i16 | a0 | B
              (B in ceil(k/8) bytes)
* RoundSubmit t u64 | client_id u32 | L u64 | count u16 | count x ciphertext
* RoundResult t u64 | agg_count u16 | L u64 | count u16 | count x ciphertext
* Abort       t u64 | reason u8
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from esafl.config import profile
from esafl.scheme.eshe import Ciphertext
from esafl.scheme.errors import EsaflError, MalformedMessageError, ParameterError
from esafl.scheme.params import SchemeParams, ciphertext_count
from esafl.scheme.ring import RingElem, SmallPoly, SparseTernaryKey
from esafl.wire.frames import HEADER_SIZE, Frame, MsgType

_CT_HEADER = struct.Struct("<QH")
_SUBMIT_HEADER = struct.Struct("<QIQH")
_RESULT_HEADER = struct.Struct("<QHQH")
_ABORT = struct.Struct("<QB")
_KEY_ENTRY = struct.Struct("<Ib")


class AbortReason(IntEnum):
    """Reason codes carried by Abort."""

    TIMEOUT = 0x01
    DUPLICATE_SUBMISSION = 0x02
    STALE_ROUND = 0x03
    MALFORMED = 0x04
    SHUTDOWN = 0x05
    UNKNOWN_CLIENT = 0x06


@dataclass(frozen=True)
class KeyIssue:
    """Dealer -> client key delivery (confidential paths only)."""

    client_id: int
    params: SchemeParams
    enc_key: SparseTernaryKey
    dec_key: SmallPoly
    a0: RingElem
    seed: int


@dataclass(frozen=True)
class RoundSubmit:
    """Client -> aggregator: one client's ciphertexts for round t."""

    round_index: int
    client_id: int
    length: int
    ciphertexts: tuple[Ciphertext, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class RoundResult:
    """Aggregator -> clients: the aggregated ciphertexts for round t."""

    round_index: int
    agg_count: int
    length: int
    ciphertexts: tuple[Ciphertext, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class Abort:
    """Either side aborts the current round."""

    round_index: int
    reason: AbortReason


ProtocolMessage = KeyIssue | RoundSubmit | RoundResult | Abort


# -- sizes -----------------------------------------------------------------


def ciphertext_wire_size(params: SchemeParams) -> int:
    return _CT_HEADER.size + params.ciphertext_bytes


def submit_frame_size(count: int, params: SchemeParams) -> int:
    """Closed-form bytes on the wire for a RoundSubmit carrying ``count`` ciphertexts."""
    return HEADER_SIZE + _SUBMIT_HEADER.size + count * ciphertext_wire_size(params)


def result_frame_size(count: int, params: SchemeParams) -> int:
    return HEADER_SIZE + _RESULT_HEADER.size + count * ciphertext_wire_size(params)


# -- encoding --------------------------------------------------------------


def _ciphertext_bytes(ct: Ciphertext) -> bytes:
    return _CT_HEADER.pack(ct.round_index, ct.agg_count) + ct.body.to_bytes()


def _check_count(length: int, count: int, params: SchemeParams) -> None:
    expected = ciphertext_count(length, params)
    if count != expected:
        raise MalformedMessageError(
            f"length {length} needs {expected} ciphertexts, message carries {count}"
        )


def serialize(msg: ProtocolMessage, params: SchemeParams | None = None) -> bytes:
    """Canonical payload bytes of ``msg`` (frame header excluded)."""
    if isinstance(msg, KeyIssue):
        text = profile.dumps(msg.params).encode("ascii")
        entries = sorted(
            [(i, 1) for i in msg.enc_key.plus] + [(i, -1) for i in msg.enc_key.minus]
        )
        parts = [struct.pack("<II", msg.client_id, len(text)), text,
                 struct.pack("<I", len(entries))]
        parts.extend(_KEY_ENTRY.pack(index, sign) for index, sign in entries)
        parts.append(struct.pack("<H", msg.dec_key.bound))
        parts.append(msg.dec_key.coeffs.astype("<i2").tobytes())
        parts.append(msg.a0.to_bytes())
        parts.append(msg.seed.to_bytes((msg.params.seed_bits_k + 7) // 8, "little"))
        return b"".join(parts)
    if isinstance(msg, RoundSubmit | RoundResult):
        if params is not None:
            _check_count(msg.length, len(msg.ciphertexts), params)
        if isinstance(msg, RoundSubmit):
            head = _SUBMIT_HEADER.pack(msg.round_index, msg.client_id, msg.length,
                                       len(msg.ciphertexts))
        else:
            head = _RESULT_HEADER.pack(msg.round_index, msg.agg_count, msg.length,
                                       len(msg.ciphertexts))
        return head + b"".join(_ciphertext_bytes(ct) for ct in msg.ciphertexts)
    if isinstance(msg, Abort):
        return _ABORT.pack(msg.round_index, int(msg.reason))
    raise TypeError(f"not a protocol message: {type(msg).__name__}")


_TYPE_OF = {
    KeyIssue: MsgType.KEY_ISSUE,
    RoundSubmit: MsgType.ROUND_SUBMIT,
    RoundResult: MsgType.ROUND_RESULT,
    Abort: MsgType.ABORT,
}


def to_frame(msg: ProtocolMessage, params: SchemeParams | None = None) -> Frame:
    return Frame(_TYPE_OF[type(msg)], serialize(msg, params))


# -- decoding --------------------------------------------------------------


class _Cursor:
    """Bounds-checked reader over a payload."""

    def __init__(self, data: bytes) -> None:
        self._data = data
        self._pos = 0

    def take(self, count: int) -> bytes:
        if count < 0 or self._pos + count > len(self._data):
            raise MalformedMessageError(
                f"payload too short: need {count} bytes at offset {self._pos}"
            )
        chunk = self._data[self._pos:self._pos + count]
        self._pos += count
        return chunk

    def unpack(self, fmt: struct.Struct) -> tuple[int, ...]:
        return fmt.unpack(self.take(fmt.size))

    def finish(self) -> None:
        if self._pos != len(self._data):
            raise MalformedMessageError(f"{len(self._data) - self._pos} trailing bytes")


def _read_ciphertexts(
    cursor: _Cursor, count: int, params: SchemeParams
) -> tuple[Ciphertext, ...]:
    cts = []
    for _ in range(count):
        round_index, agg_count = cursor.unpack(_CT_HEADER)
        body = RingElem.from_bytes(cursor.take(params.ciphertext_bytes), params.n, params.log_q)
        cts.append(Ciphertext(body=body, round_index=round_index, agg_count=agg_count))
    return tuple(cts)


def _read_key_issue(cursor: _Cursor) -> KeyIssue:
    client_id, text_len = cursor.unpack(struct.Struct("<II"))
    try:
        params = profile.loads(cursor.take(text_len).decode("ascii"))
    except (UnicodeDecodeError, ParameterError) as exc:
        raise MalformedMessageError(f"bad parameter profile: {exc}") from None
    (weight,) = cursor.unpack(struct.Struct("<I"))
    if weight > params.n:
        raise MalformedMessageError(f"key weight {weight} exceeds n={params.n}")
    plus, minus = set(), set()
    for _ in range(weight):
        index, sign = cursor.unpack(_KEY_ENTRY)
        if sign not in (1, -1):
            raise MalformedMessageError(f"key sign {sign} is not +-1")
        (plus if sign == 1 else minus).add(index)
    (bound,) = cursor.unpack(struct.Struct("<H"))
    dec = np.frombuffer(cursor.take(2 * params.n), dtype="<i2").astype(np.int64)
    a0 = RingElem.from_bytes(cursor.take(params.ciphertext_bytes), params.n, params.log_q)
    seed = int.from_bytes(cursor.take((params.seed_bits_k + 7) // 8), "little")
    try:
        enc_key = SparseTernaryKey(frozenset(plus), frozenset(minus), params.n)
        dec_key = SmallPoly(dec, bound)
    except ValueError as exc:
        raise MalformedMessageError(f"bad key material: {exc}") from None
    if seed >> params.seed_bits_k:
        raise MalformedMessageError("seed exceeds seed_bits_k")
    return KeyIssue(client_id, params, enc_key, dec_key, a0, seed)


def deserialize(frame: Frame, params: SchemeParams | None = None) -> ProtocolMessage:
    """Parse a frame payload. Never reads past the payload; errors are WireErrors.

    ``params`` is required for RoundSubmit/RoundResult (ring geometry).
    """
    cursor = _Cursor(frame.payload)
    try:
        msg: ProtocolMessage
        if frame.msg_type is MsgType.KEY_ISSUE:
            msg = _read_key_issue(cursor)
        elif frame.msg_type is MsgType.ABORT:
            round_index, reason = cursor.unpack(_ABORT)
            try:
                msg = Abort(round_index, AbortReason(reason))
            except ValueError:
                raise MalformedMessageError(f"unknown abort reason {reason}") from None
        elif frame.msg_type in (MsgType.ROUND_SUBMIT, MsgType.ROUND_RESULT):
            if params is None:
                raise MalformedMessageError("ring parameters are required to parse ciphertexts")
            if frame.msg_type is MsgType.ROUND_SUBMIT:
                round_index, client_id, length, count = cursor.unpack(_SUBMIT_HEADER)
                cts = _read_ciphertexts(cursor, count, params)
                msg = RoundSubmit(round_index, client_id, length, cts)
            else:
                round_index, agg_count, length, count = cursor.unpack(_RESULT_HEADER)
                cts = _read_ciphertexts(cursor, count, params)
                msg = RoundResult(round_index, agg_count, length, cts)
            _check_count(length, count, params)
            if any(ct.round_index != round_index for ct in cts):
                raise MalformedMessageError("ciphertext round differs from message round")
        else:
            raise MalformedMessageError(f"unhandled message type {frame.msg_type!r}")
        cursor.finish()
        return msg
    except EsaflError:
        raise
    except (struct.error, ValueError, OverflowError) as exc:
        raise MalformedMessageError(str(exc)) from None
