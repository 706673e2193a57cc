"""Per-round public polynomial derivation.

Every client expands the shared secret seed ``B`` and the round counter ``t``
into the same polynomial a^t without talking to anyone. The expansion is
ChaCha20 (32-byte key, all-zero 12-byte nonce, block counter 0); coefficient
i is read from keystream bytes [i * w, (i + 1) * w) with w = ceil(log_q / 8),
little-endian, masked to log_q bits.
"""

from __future__ import annotations

from dataclasses import dataclass

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms

from esafl.scheme.errors import SeedRangeError
from esafl.scheme.params import SchemeParams
from esafl.scheme.ring import RingElem

KEY_BYTES = 32
# cryptography's ChaCha20 nonce is the 4-byte little-endian block counter
# followed by the 12-byte nonce.
_COUNTER_AND_NONCE = bytes(16)


@dataclass(frozen=True)
class RoundSeed:
    """Secret seed B and the round counter t, both k-bit values."""

    secret: int
    round_index: int
    bits: int = 64

    def __post_init__(self) -> None:
        _check_range("B", self.secret, self.bits)
        _check_range("t", self.round_index, self.bits)

    def next(self) -> RoundSeed:
        return RoundSeed(self.secret, self.round_index + 1, self.bits)


def _check_range(name: str, value: int, bits: int) -> None:
    if not 0 <= value < 1 << bits:
        raise SeedRangeError(f"{name}={value} does not fit in {bits} bits")


def derive_seed(t: int, secret: int, bits: int) -> bytes:
    """Expansion key: (t XOR B) as ceil(k/8) little-endian bytes, zero-padded to 32."""
    if not 0 < bits <= 8 * KEY_BYTES:
        raise SeedRangeError(f"seed length {bits} outside (0, {8 * KEY_BYTES}]")
    _check_range("t", t, bits)
    _check_range("B", secret, bits)
    packed = (t ^ secret).to_bytes((bits + 7) // 8, "little")
    return packed.ljust(KEY_BYTES, b"\x00")


def keystream(key: bytes, length: int) -> bytes:
    """First ``length`` bytes of the ChaCha20 keystream under ``key``."""
    encryptor = Cipher(algorithms.ChaCha20(key, _COUNTER_AND_NONCE), mode=None).encryptor()
    return encryptor.update(bytes(length)) + encryptor.finalize()


def prpg(t: int, secret: int, params: SchemeParams) -> RingElem:
    """Pseudorandom public polynomial a^t for round ``t``."""
    key = derive_seed(t, secret, params.seed_bits_k)
    stream = keystream(key, params.n * params.coeff_bytes)
    return RingElem.from_stream(stream, params.n, params.log_q)


def round_public(t: int, secret: int, a0: RingElem, params: SchemeParams) -> RingElem:
    """Public polynomial used in round ``t``: the dealer's a^0 for t in {0, 1}."""
    if t < 0:
        raise SeedRangeError(f"round index {t} is negative")
    if t <= 1:
        return a0
    return prpg(t, secret, params)
