"""Tests for key files and trace output."""

from __future__ import annotations

import os
import stat
import tempfile

import pytest

from esafl.config import profile
from esafl.models.bench import BenchReport, TimingRow, TrafficFigures
from esafl.models.training import RoundTrace, TrainingTrace
from esafl.scheme.errors import MalformedMessageError
from esafl.store.keystore import (
    AGGREGATOR_FILE,
    PARAMS_FILE,
    client_key_path,
    read_key_issue,
    read_key_set,
    write_key_set,
)
from esafl.store.trace import (
    BENCH_COLUMNS,
    TRACE_COLUMNS,
    read_trace_rows,
    write_bench,
    write_loss_curve,
    write_trace,
)

from .conftest import make_issues, make_params


def make_trace(rounds: int = 3) -> TrainingTrace:
    return TrainingTrace(
        profile="test",
        rounds=[
            RoundTrace(
                round=t,
                loss_plain=1.0 / t,
                loss_enc=1.0 / t + 1e-6,
                max_model_diff=1e-6,
                max_aggregate_diff=1e-5,
                ciphertexts=1,
                uplink_bytes=100 * t,
                downlink_bytes=200 * t,
                wall_ms_encrypt=1.5,
                wall_ms_decrypt=2.5,
                wall_ms_aggregate=0.5,
            )
            for t in range(1, rounds + 1)
        ],
    )


class TestKeystore:
    def test_roundtrip(self, tmp_path, params):
        issues = make_issues(params)
        paths = write_key_set(tmp_path / "keys", params, issues)
        assert len(paths) == 2 + params.num_clients
        loaded_params, loaded = read_key_set(tmp_path / "keys")
        assert loaded_params == params
        assert loaded == issues

    def test_key_files_are_owner_only(self, tmp_path, params):
        write_key_set(tmp_path, params, make_issues(params))
        for client in range(params.num_clients):
            mode = stat.S_IMODE(client_key_path(tmp_path, client).stat().st_mode)
            assert mode == 0o600

    def test_aggregator_profile_holds_no_keys(self, tmp_path, params):
        write_key_set(tmp_path, params, make_issues(params))
        assert profile.load(tmp_path / AGGREGATOR_FILE) == params
        assert (tmp_path / AGGREGATOR_FILE).read_bytes() == (tmp_path / PARAMS_FILE).read_bytes()

    def test_same_seed_same_bytes(self, tmp_path, params):
        write_key_set(tmp_path / "a", params, make_issues(params, seed=3))
        write_key_set(tmp_path / "b", params, make_issues(params, seed=3))
        for client in range(params.num_clients):
            first = client_key_path(tmp_path / "a", client).read_bytes()
            second = client_key_path(tmp_path / "b", client).read_bytes()
            assert first == second

    def test_subset(self, tmp_path, params):
        write_key_set(tmp_path, params, make_issues(params))
        _, loaded = read_key_set(tmp_path, client_ids=[2])
        assert [i.client_id for i in loaded] == [2]

    def test_failed_write_leaves_nothing(self, tmp_path, params, monkeypatch):
        real_mkstemp = tempfile.mkstemp
        calls = {"count": 0}

        def flaky_mkstemp(*args, **kwargs):
            calls["count"] += 1
            if calls["count"] == 3:
                raise OSError("disk full")
            return real_mkstemp(*args, **kwargs)

        monkeypatch.setattr(tempfile, "mkstemp", flaky_mkstemp)
        with pytest.raises(OSError, match="disk full"):
            write_key_set(tmp_path, params, make_issues(params))
        assert list(tmp_path.iterdir()) == []

    def test_failed_install_keeps_previous_set(self, tmp_path, params, monkeypatch):
        write_key_set(tmp_path, params, make_issues(params, seed=1))
        before = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
        real_replace = os.replace
        failing = client_key_path(tmp_path, 1)
        state = {"failed": False}

        def flaky_replace(src, dst):
            if not state["failed"] and str(dst) == str(failing):
                state["failed"] = True
                raise OSError("rename failed")
            return real_replace(src, dst)

        monkeypatch.setattr(os, "replace", flaky_replace)
        with pytest.raises(OSError, match="rename failed"):
            write_key_set(tmp_path, params, make_issues(params, seed=2))
        after = {p.name: p.read_bytes() for p in tmp_path.iterdir()}
        assert after == before

    def test_rewrite_replaces_whole_set(self, tmp_path, params):
        write_key_set(tmp_path, params, make_issues(params, seed=1))
        write_key_set(tmp_path, params, make_issues(params, seed=2))
        _, loaded = read_key_set(tmp_path)
        assert loaded == make_issues(params, seed=2)
        assert not [p for p in tmp_path.iterdir() if p.name.startswith(".")]

    def test_mismatched_key_file(self, tmp_path, params):
        write_key_set(tmp_path, params, make_issues(params))
        other = make_params(n=32)
        write_key_set(tmp_path / "other", other, make_issues(other))
        client_key_path(tmp_path, 1).write_bytes(
            client_key_path(tmp_path / "other", 1).read_bytes()
        )
        with pytest.raises(MalformedMessageError, match="other parameters"):
            read_key_set(tmp_path)

    def test_empty_key_file(self, tmp_path):
        path = tmp_path / "client-0.key"
        path.write_bytes(b"")
        with pytest.raises(MalformedMessageError, match="empty"):
            read_key_issue(path)

    def test_trailing_data_in_key_file(self, tmp_path, params):
        write_key_set(tmp_path, params, make_issues(params))
        path = client_key_path(tmp_path, 0)
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(MalformedMessageError, match="exactly one"):
            read_key_issue(path)


class TestTraceFiles:
    def test_csv_columns_and_rows(self, tmp_path):
        path = write_trace(make_trace(), tmp_path / "out" / "trace.csv")
        rows = read_trace_rows(path)
        assert list(rows[0]) == TRACE_COLUMNS
        assert [int(r["round"]) for r in rows] == [1, 2, 3]
        assert [int(r["uplink_bytes"]) for r in rows] == [100, 200, 300]

    def test_empty_trace_has_header(self, tmp_path):
        path = write_trace(TrainingTrace(), tmp_path / "trace.csv")
        assert path.read_text().strip() == ",".join(TRACE_COLUMNS)

    def test_loss_curve(self, tmp_path):
        path = write_loss_curve(make_trace(2), tmp_path / "loss.dat")
        lines = path.read_text().splitlines()
        assert lines[0].startswith("#")
        fields = lines[2].split()
        assert fields[0] == "2"
        assert float(fields[1]) == pytest.approx(0.5)

    def test_bench_rows(self, tmp_path, params):
        figures = TrafficFigures(
            packed=True, slots_T=params.slots_T, capacity=768, ciphertext_count=1,
            bytes_per_ciphertext=params.ciphertext_bytes, uplink_bytes=1, downlink_bytes=1,
        )
        report = BenchReport(
            profile="test", length=8, num_clients=3, log_q0=16, plain_bytes=64, packed=figures,
            timings=[
                TimingRow(rep=i, encrypt_ms=1, aggregate_ms=2, decrypt_ms=3) for i in range(2)
            ],
        )
        rows = read_trace_rows(write_bench(report, tmp_path / "bench.csv"))
        assert list(rows[0]) == BENCH_COLUMNS
        assert [r["rep"] for r in rows] == ["0", "1"]
        assert rows[0]["packed"] == "1"
        assert rows[0]["ciphertexts"] == "1"

    def test_bench_rows_carry_decode_error(self, tmp_path, params):
        figures = TrafficFigures(
            packed=False, slots_T=2, capacity=32, ciphertext_count=3,
            bytes_per_ciphertext=params.ciphertext_bytes, uplink_bytes=1, downlink_bytes=1,
        )
        report = BenchReport(
            profile="test", length=80, num_clients=3, log_q0=16, plain_bytes=640,
            packed=figures.model_copy(update={"packed": True, "ciphertext_count": 1}),
            measured=figures,
            timings=[TimingRow(rep=0, encrypt_ms=1, aggregate_ms=2, decrypt_ms=3,
                               error_mean=2.5e-5, error_max=1e-4)],
        )
        (row,) = read_trace_rows(write_bench(report, tmp_path / "bench.csv"))
        assert float(row["error_mean"]) == pytest.approx(2.5e-5)
        assert float(row["error_max"]) == pytest.approx(1e-4)
        assert row["packed"] == "0"
        assert row["ciphertexts"] == "3"
