"""Multi-key additively homomorphic encryption with one-step decryption.

Client i encrypts under its own ternary key s_i; the aggregator adds the N
ciphertexts of a round; anyone holding s = sum(s_i) removes a^t * s from the
full aggregate and reads the plaintext sum in R_p. Partial sums, or sums
mixing rounds, leave a residual a * s_j term that masks the result.
"""

from __future__ import annotations

import logging
import warnings
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from esafl.scheme.codec import PackedPlain
from esafl.scheme.errors import (
    AggregateCountError,
    CodecError,
    DimensionMismatchError,
    PartialAggregateWarning,
    RoundMismatchError,
)
from esafl.scheme.params import SchemeParams, ceil_log2
from esafl.scheme.ring import (
    RingElem,
    SmallPoly,
    SparseTernaryKey,
    add,
    lift_and_scale_error,
    mod_p,
    mul_small,
    mul_sparse,
    sample_gaussian,
    sample_ternary,
    sample_uniform,
    sub,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KeyMaterial:
    """Everything the trusted dealer produces for one training run."""

    enc_keys: tuple[SparseTernaryKey, ...]
    dec_key: SmallPoly
    a0: RingElem
    seed: int


@dataclass(frozen=True)
class Ciphertext:
    """A single ring element tagged with its round and contribution count."""

    body: RingElem
    round_index: int
    agg_count: int = 1
    client_tag: int | None = None


def keygen(params: SchemeParams, rng: np.random.Generator) -> KeyMaterial:
    """N ternary keys, their exact sum, a uniform a^0 and a k-bit seed B."""
    enc_keys = tuple(
        sample_ternary(rng, params.n, params.ternary_weight) for _ in range(params.num_clients)
    )
    dec_key = SmallPoly.from_keys(enc_keys)
    a0 = sample_uniform(rng, params.n, params.log_q)
    seed_bytes = rng.bytes((params.seed_bits_k + 7) // 8)
    seed = int.from_bytes(seed_bytes, "little") & ((1 << params.seed_bits_k) - 1)
    logger.debug(f"Generated key material for {params.num_clients} clients at n={params.n}")
    return KeyMaterial(enc_keys=enc_keys, dec_key=dec_key, a0=a0, seed=seed)


def encrypt(
    a_t: RingElem,
    key: SparseTernaryKey,
    message: PackedPlain,
    params: SchemeParams,
    rng: np.random.Generator,
    round_index: int,
    *,
    client_tag: int | None = None,
    error: SmallPoly | None = None,
) -> Ciphertext:
    """c = [a^t * s_i + p * e + m]_q.

    Args:
        error: Test hook replacing the freshly sampled Gaussian error.
    """
    if message.n != params.n:
        raise DimensionMismatchError(f"plaintext has {message.n} coefficients, expected {params.n}")
    if message.n and max(message.coeffs) >= params.p:
        raise CodecError("plaintext coefficient >= p")
    if error is None:
        error = sample_gaussian(rng, params.n, params.gaussian_sigma)
    body = add(
        add(mul_sparse(a_t, key), lift_and_scale_error(error, params.log_p, params.log_q)),
        message.to_ring(params.log_q),
    )
    return Ciphertext(body=body, round_index=round_index, agg_count=1, client_tag=client_tag)


def eval_add(
    cts: Sequence[Ciphertext],
    params: SchemeParams,
    *,
    allow_mixed_rounds: bool = False,
) -> Ciphertext:
    """Sum ciphertexts of one round.

    Args:
        allow_mixed_rounds: Unsafe test hook permitting a spanning-round sum,
            which decrypts to noise.
    """
    if not cts:
        raise AggregateCountError("nothing to aggregate")
    rounds = {ct.round_index for ct in cts}
    if len(rounds) > 1 and not allow_mixed_rounds:
        raise RoundMismatchError(f"ciphertexts span rounds {sorted(rounds)}")
    total = sum(ct.agg_count for ct in cts)
    if total > params.num_clients:
        raise AggregateCountError(f"{total} contributions exceed N={params.num_clients}")
    body = cts[0].body
    for ct in cts[1:]:
        body = add(body, ct.body)
    return Ciphertext(body=body, round_index=cts[0].round_index, agg_count=total)


def decrypt(
    a_t: RingElem,
    dec_key: SmallPoly,
    ct: Ciphertext,
    params: SchemeParams,
    *,
    allow_partial: bool = False,
) -> PackedPlain:
    """M = [[C - a^t * s]_q]_p for a full aggregate.

    Args:
        allow_partial: Test hook; decrypts an incomplete aggregate with a
            warning instead of raising. The output is then unrelated to any sum.
    """
    if ct.agg_count != params.num_clients:
        if not allow_partial:
            raise AggregateCountError(
                f"aggregate holds {ct.agg_count} of {params.num_clients} contributions"
            )
        warnings.warn(
            f"decrypting a partial aggregate ({ct.agg_count}/{params.num_clients})",
            PartialAggregateWarning,
            stacklevel=2,
        )
    masked = sub(ct.body, mul_small(a_t, dec_key))
    return PackedPlain.from_ring(mod_p(masked, params.log_p), params)


def noise_margin(params: SchemeParams) -> int:
    """Spare bits between the aggregate noise and the q/p headroom."""
    return (params.log_q - params.log_p) - ceil_log2(params.num_clients * params.error_bound)
