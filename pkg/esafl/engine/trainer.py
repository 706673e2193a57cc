"""Federated training orchestration.

A run deals keys once, then repeats rounds: every client computes its
weighted gradient, encrypts it under a^t and submits; the aggregator sums
once all N have arrived; every client decrypts the same aggregate and
applies w := w - eta * G / N. A plaintext FedAvg reference runs in lockstep
on the same minibatches so each round can be checked against it.
"""

from __future__ import annotations

import asyncio
import logging
import time
from dataclasses import dataclass
from typing import TYPE_CHECKING, Protocol

import numpy as np
import numpy.typing as npt

from esafl.config.settings import Settings, get_settings
from esafl.engine.aggregator import AggregatorState, rejection_reason
from esafl.engine.client import (
    ClientState,
    apply_update,
    decrypt_result,
    encrypt_update,
    local_gradient,
)
from esafl.engine.workload import LinearRegressionTask, make_task, minibatch, mse_gradient, mse_loss
from esafl.models.training import ExecutionMode, KeyDealMode, RoundTrace, TrainConfig, TrainingTrace
from esafl.scheme.eshe import keygen
from esafl.scheme.errors import (
    EsaflError,
    MalformedMessageError,
    ParameterError,
    RoundAbortedError,
    SubmissionRejectedError,
    WireError,
)
from esafl.scheme.params import SchemeParams, ciphertext_count
from esafl.scheme.ring import SmallPoly
from esafl.wire.frames import Frame
from esafl.wire.messages import (
    Abort,
    AbortReason,
    KeyIssue,
    RoundResult,
    RoundSubmit,
    deserialize,
    to_frame,
)

if TYPE_CHECKING:
    from esafl.transport.server import AggregatorServer

logger = logging.getLogger(__name__)


class ClientLink(Protocol):
    """A client's path to the aggregator: one submission in, one reply out."""

    async def exchange(self, frame: Frame, round_index: int) -> Frame: ...


# =============================================================================
# Key dealing
# =============================================================================


def keydeal(params: SchemeParams, rng: np.random.Generator) -> list[KeyIssue]:
    """Trusted-dealer initialization: one KeyIssue per client.

    The aggregator is handed nothing here; it is built from params alone.

    Raises:
        ParameterError: if the joint key is not the exact sum of the client keys.
    """
    material = keygen(params, rng)
    if SmallPoly.from_keys(material.enc_keys) != material.dec_key:
        raise ParameterError("s = sum(s_i)", "joint key does not match the client keys")
    issues = [
        KeyIssue(
            client_id=i,
            params=params,
            enc_key=key,
            dec_key=material.dec_key,
            a0=material.a0,
            seed=material.seed,
        )
        for i, key in enumerate(material.enc_keys)
    ]
    logger.info(f"Dealt keys to {len(issues)} clients")
    return issues


def build_cohort(
    config: TrainConfig,
    issues: list[KeyIssue],
    task: LinearRegressionTask,
) -> list[ClientState]:
    """Clients with identical zero-initialized models."""
    weights = config.resolved_weights()
    model = np.zeros(task.dim)
    seeds = np.random.SeedSequence(config.seed).spawn(config.num_clients + 1)[1:]
    return [
        ClientState.from_key_issue(
            issue,
            model,
            task.datasets[issue.client_id],
            weight=weights[issue.client_id],
            rng=np.random.default_rng(seeds[issue.client_id]),
        )
        for issue in issues
    ]


# =============================================================================
# In-process channel
# =============================================================================


class InProcessHub:
    """In-memory stand-in for the TCP aggregator with the same barrier.

    Every exchange goes through the wire encoding so byte counts match tcp
    mode. Rejections and round timeouts are answered with Abort frames the
    way the TCP server answers them.
    """

    def __init__(self, aggregator: AggregatorState, round_timeout: float | None = None) -> None:
        self.aggregator = aggregator
        self.params = aggregator.params
        self.round_timeout = round_timeout
        self._waiters: dict[int, asyncio.Future[Frame]] = {}
        self._timer: asyncio.Task[None] | None = None

    async def exchange(self, frame: Frame, round_index: int) -> Frame:
        try:
            msg = deserialize(frame, self.params)
            if not isinstance(msg, RoundSubmit):
                raise MalformedMessageError(f"expected RoundSubmit, got {type(msg).__name__}")
            result = self.aggregator.submit(msg, frame.size)
        except (SubmissionRejectedError, WireError) as e:
            logger.warning(f"Rejected submission: {e}")
            return to_frame(Abort(round_index, rejection_reason(e)))

        waiter: asyncio.Future[Frame] = asyncio.get_running_loop().create_future()
        self._waiters[msg.client_id] = waiter
        if result is None:
            if self._timer is None and self.round_timeout is not None:
                self._timer = asyncio.create_task(
                    self._round_timer(msg.round_index, self.round_timeout)
                )
            return await waiter

        if self._timer is not None:
            self._timer.cancel()
            self._timer = None
        self._resolve(to_frame(result, self.params))
        return await waiter

    async def _round_timer(self, round_index: int, timeout: float) -> None:
        await asyncio.sleep(timeout)
        self._timer = None
        if self.aggregator.current_round != round_index:
            return
        missing = sorted(self.aggregator.pending_clients)
        self.aggregator.abort(f"timeout after {timeout}s, missing {missing}")
        self._resolve(to_frame(Abort(round_index, AbortReason.TIMEOUT)))

    def _resolve(self, out: Frame) -> None:
        for pending in self._waiters.values():
            if not pending.done():
                pending.set_result(out)
        self._waiters.clear()


# =============================================================================
# Plaintext reference
# =============================================================================


@dataclass
class PlainReference:
    """FedAvg without encryption on the same data and minibatches."""

    model: npt.NDArray[np.float64]
    task: LinearRegressionTask
    config: TrainConfig

    def step(self, round_index: int) -> npt.NDArray[np.float64]:
        """One plaintext round; returns the exact clipped aggregate it applied."""
        weights = self.config.resolved_weights()
        total = np.zeros_like(self.model)
        for client_id, dataset in enumerate(self.task.datasets):
            batch = minibatch(dataset, self.config.batch_size, self.config.data_seed,
                              client_id, round_index)
            g = weights[client_id] * mse_gradient(self.model, batch.features, batch.targets)
            total += np.clip(g, -self.config.clip_bound, self.config.clip_bound)
        self.model = self.model - self.config.learning_rate * total / self.config.num_clients
        return total


# =============================================================================
# Rounds
# =============================================================================


@dataclass
class RoundOutcome:
    round_index: int
    aggregate: npt.NDArray[np.float64]
    expected: npt.NDArray[np.float64]
    models_identical: bool
    ciphertexts: int
    uplink_bytes: int
    downlink_bytes: int
    wall_ms_encrypt: float
    wall_ms_decrypt: float
    wall_ms_aggregate: float


async def run_round(
    clients: list[ClientState],
    links: dict[int, ClientLink],
    params: SchemeParams,
    config: TrainConfig,
    aggregator: AggregatorState | None = None,
) -> RoundOutcome:
    """One synchronous round over all ``clients``.

    Raises:
        RoundAbortedError: if the aggregator aborts the round.
        NoiseOverflowError: if a decrypted plaintext is outside the valid band.
    """
    t = clients[0].round_index
    if any(c.round_index != t for c in clients):
        raise RoundAbortedError(t, "clients disagree on the round index")

    expected = np.zeros(clients[0].model.shape)
    frames: dict[int, Frame] = {}
    started = time.perf_counter()
    for client in clients:
        gradient = local_gradient(client, config.batch_size, config.data_seed)
        expected += np.clip(gradient, -config.clip_bound, config.clip_bound)
        submit = encrypt_update(client, gradient, params, config.clip_bound)
        frames[client.client_id] = to_frame(submit, params)
    encrypt_ms = (time.perf_counter() - started) * 1000 / len(clients)
    ciphertexts = ciphertext_count(expected.size, params)

    replies = await asyncio.gather(
        *(links[c.client_id].exchange(frames[c.client_id], t) for c in clients)
    )

    started = time.perf_counter()
    aggregates = []
    for client, reply in zip(clients, replies, strict=True):
        msg = deserialize(reply, params)
        if isinstance(msg, Abort):
            raise RoundAbortedError(msg.round_index, msg.reason.name.lower())
        if not isinstance(msg, RoundResult):
            raise RoundAbortedError(t, f"unexpected {type(msg).__name__} from aggregator")
        aggregates.append(decrypt_result(client, msg, params, config.clip_bound))
    decrypt_ms = (time.perf_counter() - started) * 1000 / len(clients)

    for client, aggregate in zip(clients, aggregates, strict=True):
        apply_update(client, aggregate, config.learning_rate, params.num_clients)
    reference = clients[0].model.tobytes()
    identical = all(c.model.tobytes() == reference for c in clients)
    if not identical:
        logger.warning(f"Round {t}: client models diverged")

    last = aggregator.history[-1] if aggregator and aggregator.history else None
    return RoundOutcome(
        round_index=t,
        aggregate=aggregates[0],
        expected=expected,
        models_identical=identical,
        ciphertexts=ciphertexts,
        uplink_bytes=sum(f.size for f in frames.values()),
        downlink_bytes=sum(r.size for r in replies),
        wall_ms_encrypt=encrypt_ms,
        wall_ms_decrypt=decrypt_ms,
        wall_ms_aggregate=last.aggregate_ms if last and last.round_index == t else 0.0,
    )


async def _train(
    config: TrainConfig,
    params: SchemeParams,
    clients: list[ClientState],
    links: dict[int, ClientLink],
    task: LinearRegressionTask,
    aggregator: AggregatorState | None,
    trace: TrainingTrace,
) -> None:
    reference = PlainReference(np.zeros(task.dim), task, config)
    # the exact aggregate is only known locally when every client runs here
    full_cohort = len(clients) == params.num_clients
    for _ in range(config.rounds):
        outcome = await run_round(clients, links, params, config, aggregator)
        reference.step(outcome.round_index)
        model = clients[0].model
        trace.rounds.append(
            RoundTrace(
                round=outcome.round_index,
                loss_plain=mse_loss(reference.model, task),
                loss_enc=mse_loss(model, task),
                max_model_diff=float(np.max(np.abs(model - reference.model), initial=0.0)),
                max_aggregate_diff=(
                    float(np.max(np.abs(outcome.aggregate - outcome.expected), initial=0.0))
                    if full_cohort
                    else float("nan")
                ),
                ciphertexts=outcome.ciphertexts,
                uplink_bytes=outcome.uplink_bytes,
                downlink_bytes=outcome.downlink_bytes,
                wall_ms_encrypt=outcome.wall_ms_encrypt,
                wall_ms_decrypt=outcome.wall_ms_decrypt,
                wall_ms_aggregate=outcome.wall_ms_aggregate,
            )
        )
        trace.models_identical = trace.models_identical and outcome.models_identical
        trace.final_model = model.tolist()
        trace.plain_model = reference.model.tolist()
        if outcome.round_index % 20 == 0:
            logger.info(
                f"Round {outcome.round_index}: loss_enc={trace.rounds[-1].loss_enc:.3e} "
                f"loss_plain={trace.rounds[-1].loss_plain:.3e}"
            )


async def run_training_async(
    config: TrainConfig,
    params: SchemeParams,
    *,
    issues: list[KeyIssue] | None = None,
    settings: Settings | None = None,
    profile_name: str = "",
    connect: tuple[str, int] | None = None,
    server: AggregatorServer | None = None,
) -> TrainingTrace:
    """Run ``config.rounds`` rounds; failures end the run with a partial trace.

    Args:
        issues: Pre-dealt key material (e.g. loaded from key files); dealt
            here from ``config.seed`` when omitted. Passing a subset runs
            only those clients.
        connect: In tcp mode, an external aggregator to join instead of
            starting one in this process.
        server: In tcp mode, an already listening aggregator owned by the
            caller (e.g. one also exposed through the status surface).
    """
    if config.key_deal is KeyDealMode.DISTRIBUTED:
        raise ParameterError(
            "trusted-dealer key generation", "distributed key generation is not available"
        )
    if config.num_clients != params.num_clients:
        raise ParameterError(
            "config N = params N", f"config has {config.num_clients}, params {params.num_clients}"
        )
    settings = settings or get_settings()
    task = make_task(config.dim, config.sample_counts(), config.data_noise, config.data_seed)
    if issues is None:
        issues = keydeal(params, np.random.default_rng(config.seed))
    clients = build_cohort(config, issues, task)
    trace = TrainingTrace(
        profile=profile_name,
        initial_model=clients[0].model.tolist(),
        final_model=clients[0].model.tolist(),
        plain_model=clients[0].model.tolist(),
        ground_truth=task.ground_truth.tolist(),
    )
    logger.info(
        f"Training {config.rounds} rounds with {len(clients)} local clients ({config.mode}) "
        f"at n={params.n}"
    )

    try:
        if config.mode is ExecutionMode.IN_PROCESS:
            aggregator = AggregatorState(params)
            hub = InProcessHub(aggregator, config.round_timeout)
            links: dict[int, ClientLink] = {c.client_id: hub for c in clients}
            await _train(config, params, clients, links, task, aggregator, trace)
        else:
            await _train_tcp(config, params, clients, task, settings, trace, connect, server)
    except EsaflError as e:
        trace.aborted = f"{type(e).__name__}: {e}"
        logger.warning(f"Training stopped after {trace.completed_rounds} rounds: {e}")
    return trace


async def _train_tcp(
    config: TrainConfig,
    params: SchemeParams,
    clients: list[ClientState],
    task: LinearRegressionTask,
    settings: Settings,
    trace: TrainingTrace,
    connect: tuple[str, int] | None,
    server: AggregatorServer | None,
) -> None:
    # Imported here: the transport layer depends on the engine, not the reverse.
    from esafl.transport.client import AggregatorConnection

    run_settings = settings.model_copy(update={"round_timeout": config.round_timeout})
    owned = server is None and connect is None
    if owned:
        server = await serve_aggregator(
            params, run_settings, config.rounds, config.host, config.port
        )
    host, port = connect if connect is not None else (config.host, config.port)
    if connect is None and server is not None:
        port = server.port
    connections = [AggregatorConnection(host, port, run_settings) for _ in clients]
    try:
        for connection in connections:
            await connection.connect()
        links: dict[int, ClientLink] = {
            c.client_id: conn for c, conn in zip(clients, connections, strict=True)
        }
        aggregator = server.aggregator if server else None
        await _train(config, params, clients, links, task, aggregator, trace)
    finally:
        for connection in connections:
            await connection.close()
        if owned and server is not None:
            await server.close()


async def serve_aggregator(
    params: SchemeParams,
    settings: Settings,
    rounds: int | None,
    host: str,
    port: int,
) -> AggregatorServer:
    """Start a TCP aggregator for ``rounds`` rounds and return it listening."""
    from esafl.transport.server import AggregatorServer

    server = AggregatorServer(params, settings, rounds=rounds)
    await server.start(host, port)
    return server


def run_training(
    config: TrainConfig,
    params: SchemeParams,
    *,
    issues: list[KeyIssue] | None = None,
    settings: Settings | None = None,
    profile_name: str = "",
    connect: tuple[str, int] | None = None,
    server: AggregatorServer | None = None,
) -> TrainingTrace:
    """Blocking wrapper around :func:`run_training_async`."""
    return asyncio.run(
        run_training_async(
            config,
            params,
            issues=issues,
            settings=settings,
            profile_name=profile_name,
            connect=connect,
            server=server,
        )
    )
