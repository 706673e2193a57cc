"""Tests for the aggregator barrier and its rejection paths."""

from __future__ import annotations

import numpy as np
import pytest

from esafl.engine.aggregator import AggregatorState, RoundState
from esafl.scheme.codec import codec_error_bound, dcd_unpk
from esafl.scheme.errors import (
    DuplicateSubmissionError,
    MalformedMessageError,
    StaleRoundError,
    UnknownClientError,
)
from esafl.scheme.eshe import Ciphertext, decrypt, eval_add
from esafl.scheme.prg import round_public
from esafl.wire.messages import RoundSubmit, result_frame_size, to_frame

from .conftest import make_keys, make_submit


@pytest.fixture
def keys(params):
    return make_keys(params)


def submits_for(params, keys, round_index, length=8):
    return [
        make_submit(params, keys, client, round_index=round_index, length=length)
        for client in range(params.num_clients)
    ]


class TestBarrier:
    def test_fires_once_all_clients_submit(self, params, keys):
        agg = AggregatorState(params)
        subs = submits_for(params, keys, 1)
        assert agg.submit(subs[0]) is None
        assert agg.submit(subs[2]) is None
        assert agg.pending_clients == frozenset({1})
        result = agg.submit(subs[1])
        assert result is not None
        assert (result.round_index, result.agg_count, result.length) == (1, 3, 8)
        assert agg.current_round == 2
        assert agg.history[-1].state is RoundState.AGGREGATED

    def test_result_is_position_wise_sum(self, params, keys):
        agg = AggregatorState(params)
        subs = submits_for(params, keys, 1, length=900)
        result = None
        for sub in subs:
            result = agg.submit(sub)
        assert result is not None
        assert len(result.ciphertexts) == 2
        for position, ct in enumerate(result.ciphertexts):
            expected = eval_add([s.ciphertexts[position] for s in subs], params)
            assert ct.body == expected.body
            assert ct.agg_count == params.num_clients

    def test_result_decrypts_to_plain_sum(self, params, keys):
        agg = AggregatorState(params, start_round=2)
        result = None
        for sub in submits_for(params, keys, 2):
            result = agg.submit(sub)
        assert result is not None
        a_t = round_public(2, keys.seed, keys.a0, params)
        got = dcd_unpk(
            [decrypt(a_t, keys.dec_key, result.ciphertexts[0], params)],
            params.num_clients, 8, params,
        )
        # make_submit draws its reals first from default_rng([seed, client, round])
        truth = sum(
            np.random.default_rng([0, client, 2]).uniform(0.0, 1.0, size=8)
            for client in range(params.num_clients)
        )
        assert np.abs(got - truth).max() <= codec_error_bound(params, params.num_clients)

    def test_rounds_advance(self, params, keys):
        agg = AggregatorState(params)
        for t in (1, 2, 3):
            for sub in submits_for(params, keys, t):
                agg.submit(sub)
        assert [s.round_index for s in agg.history] == [1, 2, 3]
        assert agg.current_round == 4
        assert agg.pending_clients == agg.expected

    def test_custom_cohort(self, params, keys):
        agg = AggregatorState(params, client_ids=[0, 1, 2])
        assert agg.expected == frozenset({0, 1, 2})
        with pytest.raises(ValueError, match="cohort"):
            AggregatorState(params, client_ids=[0, 1])


class TestRejections:
    def test_unknown_client(self, params, keys):
        agg = AggregatorState(params)
        stranger = make_submit(params, keys, 0)
        stranger = RoundSubmit(1, 9, stranger.length, stranger.ciphertexts)
        with pytest.raises(UnknownClientError):
            agg.submit(stranger)
        assert agg.current.received == 0

    def test_stale_round(self, params, keys):
        agg = AggregatorState(params, start_round=3)
        with pytest.raises(StaleRoundError):
            agg.submit(make_submit(params, keys, 0, round_index=2))
        with pytest.raises(StaleRoundError):
            agg.submit(make_submit(params, keys, 0, round_index=4))

    def test_duplicate_leaves_buffer_unchanged(self, params, keys):
        agg = AggregatorState(params)
        first = make_submit(params, keys, 0, seed=1)
        agg.submit(first)
        with pytest.raises(DuplicateSubmissionError):
            agg.submit(make_submit(params, keys, 0, seed=2))
        assert agg.current.received == 1
        assert [ct.body for ct in agg.received_bodies()] == [first.ciphertexts[0].body]

    def test_length_disagrees_with_count(self, params, keys):
        agg = AggregatorState(params)
        sub = make_submit(params, keys, 0, length=8)
        with pytest.raises(MalformedMessageError):
            agg.submit(RoundSubmit(1, 0, 900, sub.ciphertexts))

    def test_length_disagrees_with_round(self, params, keys):
        agg = AggregatorState(params)
        agg.submit(make_submit(params, keys, 0, length=8))
        with pytest.raises(MalformedMessageError, match="round uses 8"):
            agg.submit(make_submit(params, keys, 1, length=9))

    def test_pre_aggregated_ciphertext(self, params, keys):
        agg = AggregatorState(params)
        sub = make_submit(params, keys, 0)
        ct = sub.ciphertexts[0]
        inflated = Ciphertext(ct.body, ct.round_index, agg_count=2)
        with pytest.raises(MalformedMessageError, match="pre-aggregated"):
            agg.submit(RoundSubmit(1, 0, sub.length, (inflated,)))


class TestAbort:
    def test_abort_drops_buffer_and_opens_next_round(self, params, keys):
        agg = AggregatorState(params)
        agg.submit(make_submit(params, keys, 0))
        status = agg.abort("timeout")
        assert status.state is RoundState.ABORTED
        assert status.abort_reason == "timeout"
        assert status.closed_at is not None
        assert agg.history[-1] is status
        assert agg.current_round == 2
        assert agg.received_bodies() == []

    def test_late_submission_after_abort_is_stale(self, params, keys):
        agg = AggregatorState(params)
        agg.abort("timeout")
        with pytest.raises(StaleRoundError):
            agg.submit(make_submit(params, keys, 0, round_index=1))


class TestAccounting:
    def test_byte_counters(self, params, keys):
        agg = AggregatorState(params)
        subs = submits_for(params, keys, 1)
        sizes = [to_frame(sub, params).size for sub in subs]
        for sub, size in zip(subs, sizes):
            agg.submit(sub, wire_bytes=size)
        status = agg.history[-1]
        assert status.uplink_bytes == sum(sizes)
        assert status.downlink_bytes == params.num_clients * result_frame_size(1, params)
        assert status.ciphertexts == 1
        assert status.length == 8

    def test_aggregator_sees_only_ciphertexts(self, params, keys):
        agg = AggregatorState(params)
        subs = submits_for(params, keys, 1)
        for sub in subs[:2]:
            agg.submit(sub)
        observed = agg.received_bodies()
        assert len(observed) == 2
        assert all(isinstance(ct, Ciphertext) for ct in observed)
        assert {ct.agg_count for ct in observed} == {1}
