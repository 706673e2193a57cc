"""Demo training runs: in-process, a local TCP cohort, or either side of a split run."""

from __future__ import annotations

import asyncio
import contextlib
import logging
from collections.abc import AsyncIterator
from pathlib import Path

import numpy as np

from esafl.config.settings import Settings
from esafl.engine.trainer import run_training_async, serve_aggregator
from esafl.models.training import ExecutionMode, TrainConfig, TrainingTrace
from esafl.scheme.errors import ParameterError, RoundAbortedError
from esafl.scheme.params import SchemeParams
from esafl.store.keystore import read_key_set
from esafl.store.trace import write_loss_curve, write_trace
from esafl.transport.server import AggregatorServer
from esafl.wire.messages import KeyIssue

logger = logging.getLogger(__name__)

TRACE_FILE = "trace.csv"
LOSS_FILE = "loss.dat"


def parse_endpoint(text: str) -> tuple[str, int]:
    """Split ``host:port``; a bare port means localhost."""
    host, _, port = text.rpartition(":")
    try:
        number = int(port)
    except ValueError:
        raise ParameterError("endpoint host:port", f"{text!r}") from None
    if not 0 <= number < 1 << 16:
        raise ParameterError("port in [0, 65535]", f"{text!r}")
    return host or "127.0.0.1", number


@contextlib.asynccontextmanager
async def _status_surface(
    server: AggregatorServer, settings: Settings, port: int | None
) -> AsyncIterator[None]:
    """Serve the read-only status API next to ``server`` while the block runs."""
    if port is None:
        yield
        return
    # Imported here so runs without a status port never load FastAPI.
    from esafl.server import create_app, serve_status

    app = create_app(server.aggregator, settings)
    task = asyncio.create_task(serve_status(app, settings.host, port, settings.log_level))
    try:
        yield
    finally:
        task.cancel()
        with contextlib.suppress(asyncio.CancelledError):
            await task


def _load_issues(
    params: SchemeParams, keys_dir: Path | None, client_ids: list[int] | None
) -> list[KeyIssue] | None:
    if keys_dir is None:
        return None
    key_params, issues = read_key_set(keys_dir, client_ids)
    if key_params != params:
        raise ParameterError(
            "key files match the profile", f"{keys_dir} was dealt for different parameters"
        )
    logger.info(f"Loaded {len(issues)} client keys from {keys_dir}")
    return issues


async def _demo_async(
    params: SchemeParams,
    config: TrainConfig,
    settings: Settings,
    profile_name: str,
    issues: list[KeyIssue] | None,
    connect: tuple[str, int] | None,
    status_port: int | None,
) -> TrainingTrace:
    if config.mode is not ExecutionMode.TCP or connect is not None or status_port is None:
        return await run_training_async(
            config, params, issues=issues, settings=settings,
            profile_name=profile_name, connect=connect,
        )

    run_settings = settings.model_copy(update={"round_timeout": config.round_timeout})
    server = await serve_aggregator(params, run_settings, config.rounds, config.host, config.port)
    try:
        async with _status_surface(server, run_settings, status_port):
            return await run_training_async(
                config, params, issues=issues, settings=settings,
                profile_name=profile_name, server=server,
            )
    finally:
        await server.close()


def cmd_demo(
    params: SchemeParams,
    config: TrainConfig,
    *,
    settings: Settings,
    out_dir: Path,
    profile_name: str = "",
    keys_dir: Path | None = None,
    client_ids: list[int] | None = None,
    connect: tuple[str, int] | None = None,
    status_port: int | None = None,
) -> TrainingTrace:
    """Run a training demo and write ``trace.csv`` and ``loss.dat`` to ``out_dir``.

    Args:
        keys_dir: Key directory from ``keygen``; keys are dealt from the
            config seed when omitted.
        client_ids: With ``keys_dir``, run only these clients (the rest
            are expected elsewhere, e.g. another ``--connect`` process).
        connect: Join an external aggregator instead of starting one.
        status_port: Serve the status API next to a locally started TCP aggregator.
    """
    issues = _load_issues(params, keys_dir, client_ids)
    trace = asyncio.run(
        _demo_async(params, config, settings, profile_name, issues, connect, status_port)
    )
    write_trace(trace, out_dir / TRACE_FILE)
    write_loss_curve(trace, out_dir / LOSS_FILE)
    return trace


def cmd_listen(
    params: SchemeParams,
    settings: Settings,
    rounds: int | None,
    endpoint: tuple[str, int],
    status_port: int | None = None,
) -> AggregatorServer:
    """Run only the aggregator until ``rounds`` rounds are aggregated or a round aborts.

    Raises:
        RoundAbortedError: if a round timed out.
    """

    async def listen() -> AggregatorServer:
        server = await serve_aggregator(params, settings, rounds, *endpoint)
        try:
            async with _status_surface(server, settings, status_port):
                await server.wait_finished()
        finally:
            await server.close()
        return server

    server = asyncio.run(listen())
    if server.abort_reason is not None:
        aborted = server.aggregator.history[-1]
        reason = aborted.abort_reason or server.abort_reason.name
        raise RoundAbortedError(aborted.round_index, reason)
    return server


def format_summary(trace: TrainingTrace) -> str:
    """A few lines on convergence and agreement with the plaintext reference."""
    lines = [f"rounds completed: {trace.completed_rounds}"]
    if trace.rounds:
        last = trace.rounds[-1]
        model = np.asarray(trace.final_model)
        truth = np.asarray(trace.ground_truth)
        lines += [
            f"loss (encrypted / plaintext): {last.loss_enc:.3e} / {last.loss_plain:.3e}",
            f"max |w_enc - w_plain|: {max(r.max_model_diff for r in trace.rounds):.3e}",
            f"max |w - w*|: {float(np.max(np.abs(model - truth))):.3e}",
            f"traffic up / down: {trace.uplink_bytes} / {trace.downlink_bytes} bytes",
        ]
    lines.append(f"client models identical: {'yes' if trace.models_identical else 'NO'}")
    if trace.aborted:
        lines.append(f"aborted: {trace.aborted}")
    return "\n".join(lines)
