"""Client side of a round: train, normalize, encrypt; decrypt, decode, update."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from esafl.engine.workload import LocalDataset, minibatch, mse_gradient
from esafl.scheme.codec import check_zero_slot, dcd_unpk, ecd_pack
from esafl.scheme.eshe import decrypt, encrypt
from esafl.scheme.errors import AggregateCountError, RoundMismatchError
from esafl.scheme.params import SchemeParams
from esafl.scheme.prg import round_public
from esafl.scheme.ring import RingElem, SmallPoly, SparseTernaryKey
from esafl.wire.messages import KeyIssue, RoundResult, RoundSubmit

logger = logging.getLogger(__name__)


def normalize(g: npt.ArrayLike, clip_bound: float) -> npt.NDArray[np.float64]:
    """Clip to [-c, c] and map affinely onto [0, 1]."""
    values = np.clip(np.asarray(g, dtype=np.float64), -clip_bound, clip_bound)
    return np.clip((values + clip_bound) / (2.0 * clip_bound), 0.0, 1.0)


def denormalize(
    total: npt.ArrayLike, count: int, clip_bound: float
) -> npt.NDArray[np.float64]:
    """Invert :func:`normalize` for a sum of ``count`` normalized vectors."""
    return 2.0 * clip_bound * np.asarray(total, dtype=np.float64) - count * clip_bound


@dataclass
class ClientState:
    """One federated client: local model, data and key material.

    ``dec_key`` is the joint key s shared by the whole cohort.
    """

    client_id: int
    model: npt.NDArray[np.float64]
    dataset: LocalDataset
    enc_key: SparseTernaryKey
    dec_key: SmallPoly
    a0: RingElem
    seed: int
    weight: float = 1.0
    round_index: int = 1
    rng: np.random.Generator = field(default_factory=np.random.default_rng)

    @classmethod
    def from_key_issue(
        cls,
        issue: KeyIssue,
        model: npt.NDArray[np.float64],
        dataset: LocalDataset,
        *,
        weight: float = 1.0,
        rng: np.random.Generator | None = None,
    ) -> ClientState:
        return cls(
            client_id=issue.client_id,
            model=np.array(model, dtype=np.float64),
            dataset=dataset,
            enc_key=issue.enc_key,
            dec_key=issue.dec_key,
            a0=issue.a0,
            seed=issue.seed,
            weight=weight,
            rng=rng if rng is not None else np.random.default_rng(),
        )

    def public_poly(self, params: SchemeParams) -> RingElem:
        return round_public(self.round_index, self.seed, self.a0, params)


def local_gradient(
    client: ClientState, batch_size: int | None = None, data_seed: int = 0
) -> npt.NDArray[np.float64]:
    """alpha_i times the MSE gradient of the client's minibatch for this round."""
    batch = minibatch(client.dataset, batch_size, data_seed, client.client_id, client.round_index)
    return client.weight * mse_gradient(client.model, batch.features, batch.targets)


def encrypt_update(
    client: ClientState,
    gradient: npt.ArrayLike,
    params: SchemeParams,
    clip_bound: float,
) -> RoundSubmit:
    """Normalize, encode, pack and encrypt one gradient under a^t."""
    values = normalize(gradient, clip_bound)
    plains = ecd_pack(values, params)
    a_t = client.public_poly(params)
    cts = tuple(
        encrypt(a_t, client.enc_key, plain, params, client.rng, client.round_index,
                client_tag=client.client_id)
        for plain in plains
    )
    logger.debug(
        f"Client {client.client_id} encrypted {values.size} reals into {len(cts)} "
        f"ciphertexts for round {client.round_index}"
    )
    return RoundSubmit(client.round_index, client.client_id, int(values.size), cts)


def decrypt_result(
    client: ClientState, result: RoundResult, params: SchemeParams, clip_bound: float
) -> npt.NDArray[np.float64]:
    """Recover the aggregate gradient G = sum of clipped alpha_i * g_i.

    Raises:
        RoundMismatchError: if the result is for another round.
        AggregateCountError: if it does not hold all N contributions.
        NoiseOverflowError: if a plaintext falls outside the honest-sum band.
    """
    if result.round_index != client.round_index:
        raise RoundMismatchError(
            f"result for round {result.round_index}, client is at {client.round_index}"
        )
    if result.agg_count != params.num_clients:
        raise AggregateCountError(
            f"result aggregates {result.agg_count} of {params.num_clients} clients"
        )
    a_t = client.public_poly(params)
    plains = []
    for ct in result.ciphertexts:
        plain = decrypt(a_t, client.dec_key, ct, params)
        check_zero_slot(plain, params.num_clients, params)
        plains.append(plain)
    total = dcd_unpk(plains, params.num_clients, result.length, params)
    return denormalize(total, params.num_clients, clip_bound)


def apply_update(
    client: ClientState, aggregate: npt.NDArray[np.float64], learning_rate: float, num_clients: int
) -> None:
    """w := w - eta * G / N, then advance to the next round."""
    client.model = client.model - learning_rate * aggregate / num_clients
    client.round_index += 1
