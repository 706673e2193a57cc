"""Tests for framing and the protocol message codec."""

from __future__ import annotations

import asyncio
import io

import numpy as np
import pytest

from esafl import golden
from esafl.scheme.eshe import Ciphertext
from esafl.scheme.errors import (
    FrameTooLargeError,
    KeyExposureError,
    MalformedFrameError,
    MalformedMessageError,
    TruncatedFrameError,
    WireError,
)
from esafl.scheme.ring import RingElem
from esafl.wire.frames import (
    HEADER_SIZE,
    Frame,
    MsgType,
    parse_header,
    read_frame,
    read_frame_sync,
    write_frame,
    write_frame_sync,
)
from esafl.wire.messages import (
    Abort,
    AbortReason,
    RoundResult,
    RoundSubmit,
    deserialize,
    result_frame_size,
    serialize,
    submit_frame_size,
    to_frame,
)

from .conftest import make_issues, make_keys, make_params, make_submit, make_tiny_params


def golden_messages():
    data = golden.load("wire")
    params = make_tiny_params()
    body = RingElem.from_ints(data["body"], params.log_q)
    sub = data["round_submit"]
    res = data["round_result"]
    submit = RoundSubmit(
        sub["round_index"], sub["client_id"], sub["length"],
        (Ciphertext(body, sub["round_index"], 1),),
    )
    result = RoundResult(
        res["round_index"], res["agg_count"], res["length"],
        (Ciphertext(body, res["round_index"], res["agg_count"]),),
    )
    abort = Abort(data["abort"]["round_index"], AbortReason(data["abort"]["reason"]))
    return params, data, submit, result, abort


def reader_with(data: bytes) -> asyncio.StreamReader:
    reader = asyncio.StreamReader()
    reader.feed_data(data)
    reader.feed_eof()
    return reader


class _SinkWriter:
    """Just enough of StreamWriter for write_frame."""

    def __init__(self) -> None:
        self.buffer = bytearray()

    def write(self, data: bytes) -> None:
        self.buffer += data

    async def drain(self) -> None:
        return None


class TestGoldenFrames:
    def test_round_submit_bytes(self):
        params, data, submit, _, _ = golden_messages()
        assert to_frame(submit, params).to_bytes().hex() == data["round_submit"]["frame"]

    def test_round_result_bytes(self):
        params, data, _, result, _ = golden_messages()
        assert to_frame(result, params).to_bytes().hex() == data["round_result"]["frame"]

    def test_abort_bytes(self):
        _, data, _, _, abort = golden_messages()
        assert to_frame(abort).to_bytes().hex() == data["abort"]["frame"]

    def test_golden_frames_parse(self):
        params, data, submit, result, abort = golden_messages()
        for name, expected in (("round_submit", submit), ("round_result", result),
                               ("abort", abort)):
            frame = read_frame_sync(io.BytesIO(bytes.fromhex(data[name]["frame"])))
            assert frame is not None
            assert deserialize(frame, params) == expected


class TestMessages:
    def test_key_issue_roundtrip(self, params):
        issue = make_issues(params)[1]
        frame = to_frame(issue)
        assert frame.msg_type is MsgType.KEY_ISSUE
        assert deserialize(frame) == issue

    def test_submit_roundtrip(self, params):
        submit = make_submit(params, make_keys(params), client_id=2, round_index=5, length=900)
        assert len(submit.ciphertexts) == 2
        assert deserialize(to_frame(submit, params), params) == submit

    def test_submit_size_is_closed_form(self, params):
        submit = make_submit(params, make_keys(params), client_id=0, length=900)
        assert to_frame(submit, params).size == submit_frame_size(2, params)

    def test_result_size_is_closed_form(self, params):
        submit = make_submit(params, make_keys(params), client_id=0, length=10)
        result = RoundResult(1, 3, 10, submit.ciphertexts)
        assert to_frame(result, params).size == result_frame_size(1, params)

    def test_count_must_match_length(self, params):
        submit = make_submit(params, make_keys(params), client_id=0, length=10)
        bad = RoundSubmit(1, 0, 900, submit.ciphertexts)
        with pytest.raises(MalformedMessageError, match="needs 2"):
            serialize(bad, params)
        with pytest.raises(MalformedMessageError, match="needs 2"):
            deserialize(to_frame(bad), params)

    def test_ciphertext_round_must_match(self, params):
        submit = make_submit(params, make_keys(params), client_id=0, round_index=2, length=10)
        moved = RoundSubmit(3, 0, 10, submit.ciphertexts)
        with pytest.raises(MalformedMessageError, match="round"):
            deserialize(to_frame(moved, params), params)

    def test_trailing_bytes(self):
        frame = Frame(MsgType.ABORT, to_frame(Abort(1, AbortReason.TIMEOUT)).payload + b"\x00")
        with pytest.raises(MalformedMessageError, match="trailing"):
            deserialize(frame)

    def test_unknown_abort_reason(self):
        with pytest.raises(MalformedMessageError, match="reason"):
            deserialize(Frame(MsgType.ABORT, bytes(8) + b"\x99"))

    def test_ciphertexts_need_params(self, params):
        submit = make_submit(params, make_keys(params), client_id=0, length=10)
        with pytest.raises(MalformedMessageError, match="parameters"):
            deserialize(to_frame(submit, params))

    def test_short_payload(self, params):
        submit = make_submit(params, make_keys(params), client_id=0, length=10)
        payload = to_frame(submit, params).payload
        with pytest.raises(MalformedMessageError):
            deserialize(Frame(MsgType.ROUND_SUBMIT, payload[:-1]), params)

    def test_fuzzed_frames_only_raise_wire_errors(self, params):
        rng = np.random.default_rng(77)
        keys = make_keys(params)
        templates = [
            to_frame(make_submit(params, keys, client_id=1, length=40), params),
            to_frame(Abort(4, AbortReason.STALE_ROUND)),
            to_frame(make_issues(params)[0]),
        ]
        for _ in range(300):
            template = templates[int(rng.integers(len(templates)))]
            payload = bytearray(template.payload)
            for _flip in range(int(rng.integers(1, 4))):
                payload[int(rng.integers(len(payload)))] = int(rng.integers(256))
            if rng.random() < 0.3:
                payload = payload[: int(rng.integers(len(payload)))]
            try:
                deserialize(Frame(template.msg_type, bytes(payload)), params)
            except WireError:
                pass


class TestFraming:
    def test_header_layout(self):
        frame = Frame(MsgType.ROUND_RESULT, b"abc")
        assert frame.to_bytes() == b"\x03\x00\x00\x00\x03abc"
        assert frame.size == HEADER_SIZE + 3

    def test_unknown_type(self):
        with pytest.raises(MalformedFrameError, match="0x55"):
            parse_header(b"\x00\x00\x00\x00\x55")

    def test_size_cap(self):
        with pytest.raises(FrameTooLargeError):
            parse_header(b"\x00\x01\x00\x00\x02", max_bytes=255)

    @pytest.mark.asyncio
    async def test_read_frames_in_sequence(self):
        first = to_frame(Abort(1, AbortReason.TIMEOUT))
        second = Frame(MsgType.ROUND_SUBMIT, b"xyz")
        reader = reader_with(first.to_bytes() + second.to_bytes())
        assert await read_frame(reader) == first
        assert await read_frame(reader) == second
        assert await read_frame(reader) is None

    @pytest.mark.asyncio
    async def test_truncated_header(self):
        with pytest.raises(TruncatedFrameError, match="header"):
            await read_frame(reader_with(b"\x05\x00"))

    @pytest.mark.asyncio
    async def test_truncated_payload(self):
        data = to_frame(Abort(1, AbortReason.TIMEOUT)).to_bytes()
        with pytest.raises(TruncatedFrameError, match="payload"):
            await read_frame(reader_with(data[:-2]))

    @pytest.mark.asyncio
    async def test_oversized_frame_rejected_before_payload(self):
        reader = reader_with(b"\xff\xff\xff\x00\x02")
        with pytest.raises(FrameTooLargeError):
            await read_frame(reader, max_bytes=1024)

    @pytest.mark.asyncio
    async def test_key_issue_refused_on_open_transport(self, params):
        writer = _SinkWriter()
        frame = to_frame(make_issues(params)[0])
        with pytest.raises(KeyExposureError):
            await write_frame(writer, frame)  # type: ignore[arg-type]
        assert not writer.buffer
        await write_frame(writer, frame, confidential=True)  # type: ignore[arg-type]
        assert bytes(writer.buffer) == frame.to_bytes()

    def test_sync_roundtrip(self):
        stream = io.BytesIO()
        frames = [to_frame(Abort(i, AbortReason.SHUTDOWN)) for i in range(3)]
        for frame in frames:
            write_frame_sync(stream, frame)
        stream.seek(0)
        assert [read_frame_sync(stream) for _ in range(3)] == frames
        assert read_frame_sync(stream) is None

    def test_sync_truncation(self):
        data = to_frame(Abort(1, AbortReason.TIMEOUT)).to_bytes()
        with pytest.raises(TruncatedFrameError):
            read_frame_sync(io.BytesIO(data[:3]))
        with pytest.raises(TruncatedFrameError):
            read_frame_sync(io.BytesIO(data[:-1]))


class TestAbort:
    def test_reason_codes(self):
        assert [int(r) for r in AbortReason] == [1, 2, 3, 4, 5, 6]

    def test_params_do_not_matter(self):
        abort = Abort(9, AbortReason.UNKNOWN_CLIENT)
        assert deserialize(to_frame(abort), make_params()) == abort
