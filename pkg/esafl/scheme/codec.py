"""Real vectors <-> packed plaintext polynomials.

Two layers:

* encode/decode map up to n/2 reals (one per complex slot, or n with two per
  slot) to an integer polynomial through the inverse canonical embedding,
  scaled by ``delta`` and offset-coded into ``log_q0`` unsigned bits;
* pack/unpack concatenate T - 1 such polynomials coefficient-wise into one
  polynomial of R_p, each field ``pad + log_q0`` bits wide, slot 1 in the
  highest bits and the lowest slot left zero.

Slot roots follow the usual ordering zeta^(5^j), j = 0 .. n/2 - 1, with
zeta = exp(i * pi / n). Rounding is half-to-even everywhere.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import numpy.typing as npt

from esafl.scheme.errors import CodecError, NoiseOverflowError, SlotOverflowError
from esafl.scheme.params import SchemeParams, capacity, ciphertext_count
from esafl.scheme.ring import RingElem

RealVector = npt.NDArray[np.float64]


@dataclass(frozen=True, eq=False)
class EncodedPoly:
    """Offset-coded integer polynomial; coefficients fit in ``bits`` bits."""

    coeffs: npt.NDArray[np.int64]
    delta: int
    bits: int

    def __post_init__(self) -> None:
        if self.coeffs.size and (
            int(self.coeffs.min()) < 0 or int(self.coeffs.max()) >= 1 << self.bits
        ):
            raise SlotOverflowError(f"encoded coefficient outside [0, 2^{self.bits})")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EncodedPoly):
            return NotImplemented
        return bool(np.array_equal(self.coeffs, other.coeffs))

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class PackedPlain:
    """Plaintext polynomial in R_p whose coefficients hold T bit slots."""

    coeffs: np.ndarray  # object dtype, Python ints < 2^log_p
    slots_T: int
    pad: int
    log_q0: int
    log_p: int

    @property
    def n(self) -> int:
        return int(self.coeffs.shape[0])

    @classmethod
    def from_ring(cls, elem: RingElem, params: SchemeParams) -> PackedPlain:
        if elem.log_q != params.log_p:
            raise CodecError(f"expected an element of R_p (2^{params.log_p}), got 2^{elem.log_q}")
        return cls(elem.coeffs, params.slots_T, params.pad, params.log_q0, params.log_p)

    def to_ring(self, log_q: int) -> RingElem:
        """Lift into R_q (coefficients are already < p < q)."""
        return RingElem(self.coeffs.copy(), log_q)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PackedPlain):
            return NotImplemented
        return (
            (self.slots_T, self.pad, self.log_q0, self.log_p)
            == (other.slots_T, other.pad, other.log_q0, other.log_p)
            and bool(np.all(self.coeffs == other.coeffs))
        )

    __hash__ = None  # type: ignore[assignment]


# -- canonical embedding ---------------------------------------------------


@lru_cache(maxsize=16)
def _embedding_tables(n: int) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.complex128]]:
    """Slot permutation and twist factors for the length-n/2 FFT."""
    half = n // 2
    roots = np.empty(half, dtype=np.int64)
    r = 1
    for j in range(half):
        roots[j] = r
        r = r * 5 % (2 * n)
    # 5^j = 1 (mod 4), so (r - 1) / 4 is a permutation of [0, n/2)
    index = (roots - 1) // 4
    twist = np.exp(1j * np.pi * np.arange(half) / n)
    return index, twist


def embed(coeffs: npt.ArrayLike, n: int) -> npt.NDArray[np.complex128]:
    """phi: evaluate a real polynomial at the n/2 slot roots."""
    c = np.asarray(coeffs, dtype=np.float64)
    half = n // 2
    index, twist = _embedding_tables(n)
    folded = (c[:half] + 1j * c[half:]) * twist
    values = half * np.fft.ifft(folded)
    return values[index]


def embed_inverse(slots: npt.ArrayLike, n: int) -> npt.NDArray[np.float64]:
    """phi^-1: the real polynomial whose slot values are ``slots``."""
    z = np.asarray(slots, dtype=np.complex128)
    half = n // 2
    index, twist = _embedding_tables(n)
    ordered = np.empty(half, dtype=np.complex128)
    ordered[index] = z
    folded = np.fft.fft(ordered) / half * np.conj(twist)
    return np.concatenate([folded.real, folded.imag])


# -- encode / decode -------------------------------------------------------


def _check_reals(values: npt.ArrayLike) -> RealVector:
    array = np.asarray(values, dtype=np.float64)
    if array.ndim != 1:
        raise CodecError("expected a 1-d real vector")
    if not np.all(np.isfinite(array)):
        raise CodecError("non-finite input")
    if array.size and (array.min() < 0.0 or array.max() > 1.0):
        raise CodecError("inputs must lie in [0, 1]; normalize first")
    return array


def _to_slots(chunk: RealVector, params: SchemeParams) -> npt.NDArray[np.complex128]:
    half = params.num_slots
    if params.reals_per_slot == 1:
        return chunk.astype(np.complex128)
    return chunk[:half] + 1j * chunk[half:]


def _from_slots(z: npt.NDArray[np.complex128], params: SchemeParams) -> RealVector:
    if params.reals_per_slot == 1:
        return z.real.copy()
    return np.concatenate([z.real, z.imag])


def encode(chunk: npt.ArrayLike, params: SchemeParams) -> EncodedPoly:
    """Encode up to ``params.reals_per_poly`` reals in [0, 1]."""
    values = _check_reals(chunk)
    if values.size > params.reals_per_poly:
        raise CodecError(f"chunk of {values.size} exceeds {params.reals_per_poly} slots")
    padded = np.zeros(params.reals_per_poly)
    padded[: values.size] = values

    coeffs = embed_inverse(_to_slots(padded, params), params.n)
    scaled = np.rint(coeffs * params.delta).astype(np.int64) + params.offset
    return EncodedPoly(scaled, params.delta, params.log_q0)


def decode(poly: EncodedPoly | npt.ArrayLike, count: int, params: SchemeParams) -> RealVector:
    """Decode a sum of ``count`` encodings back to reals (length reals_per_poly)."""
    if count < 1:
        raise CodecError(f"count must be >= 1, got {count}")
    coeffs = np.asarray(poly.coeffs if isinstance(poly, EncodedPoly) else poly, dtype=np.int64)
    if coeffs.shape != (params.n,):
        raise CodecError(f"expected {params.n} coefficients, got {coeffs.shape}")
    if coeffs.size and (coeffs.min() < 0 or coeffs.max() >= 1 << params.slot_bits):
        raise SlotOverflowError(
            f"coefficient exceeds the {params.slot_bits}-bit slot (overflow or wrong count)"
        )
    signed = (coeffs - count * params.offset).astype(np.float64)
    return _from_slots(embed(signed, params.n) / params.delta, params)


# -- pack / unpack ---------------------------------------------------------


def pack(polys: Sequence[EncodedPoly], params: SchemeParams) -> PackedPlain:
    """Concatenate T - 1 encoded polynomials into one plaintext of R_p."""
    if len(polys) != params.data_slots:
        raise CodecError(f"pack needs exactly {params.data_slots} polynomials, got {len(polys)}")
    acc = np.zeros(params.n, dtype=object)
    for i, poly in enumerate(polys, start=1):
        if poly.coeffs.shape != (params.n,):
            raise CodecError(f"polynomial {i} has {poly.coeffs.shape[0]} coefficients")
        if poly.coeffs.size and (
            int(poly.coeffs.min()) < 0 or int(poly.coeffs.max()) >= 1 << params.log_q0
        ):
            raise SlotOverflowError(f"polynomial {i} exceeds {params.log_q0} bits")
        acc = acc + (poly.coeffs.astype(object) << params.slot_bits * (params.slots_T - i))
    return PackedPlain(acc, params.slots_T, params.pad, params.log_q0, params.log_p)


def unpack(packed: PackedPlain, params: SchemeParams) -> list[EncodedPoly]:
    """Split every coefficient into its T fields (slot 1 first, zero slot last)."""
    width = params.slot_bits
    mask = (1 << width) - 1
    fields = []
    for i in range(1, params.slots_T + 1):
        shifted = np.bitwise_and(packed.coeffs >> width * (params.slots_T - i), mask)
        fields.append(EncodedPoly(shifted.astype(np.int64), params.delta, width))
    return fields


def check_zero_slot(packed: PackedPlain, count: int, params: SchemeParams) -> None:
    """Reject a plaintext outside the band an honest ``count``-way sum can produce.

    Raises:
        NoiseOverflowError: if the zero slot is non-zero or a field exceeds
            count * (2^log_q0 - 1).
    """
    fields = unpack(packed, params)
    if np.any(fields[-1].coeffs != 0):
        raise NoiseOverflowError("zero slot is populated; aggregate is not a valid sum")
    limit = count * ((1 << params.log_q0) - 1)
    for i, field in enumerate(fields[:-1], start=1):
        if int(field.coeffs.max(initial=0)) > limit:
            raise NoiseOverflowError(f"slot {i} exceeds the {count}-way sum band")


# -- full pipeline ---------------------------------------------------------


def ecd_pack(g: npt.ArrayLike, params: SchemeParams) -> list[PackedPlain]:
    """Chunk, encode and pack a normalized vector; ceil(L / capacity) plaintexts."""
    values = _check_reals(g)
    length = values.size
    if length == 0:
        return []
    per_poly = params.reals_per_poly
    chunks = -(-length // per_poly)
    padded = np.zeros(chunks * per_poly)
    padded[:length] = values
    encoded = [encode(padded[c * per_poly:(c + 1) * per_poly], params) for c in range(chunks)]

    zero = EncodedPoly(np.zeros(params.n, dtype=np.int64), params.delta, params.log_q0)
    batch = params.data_slots
    plains = []
    for start in range(0, chunks, batch):
        group = encoded[start:start + batch]
        group += [zero] * (batch - len(group))
        plains.append(pack(group, params))
    return plains


def dcd_unpk(
    plains: Sequence[PackedPlain], count: int, length: int, params: SchemeParams
) -> RealVector:
    """Inverse of ecd_pack for a sum of ``count`` contributions, truncated to ``length``."""
    if length < 0:
        raise CodecError(f"negative length {length}")
    expected = ciphertext_count(length, params)
    if len(plains) != expected:
        raise CodecError(
            f"length {length} needs {expected} plaintexts at capacity "
            f"{capacity(params)}, got {len(plains)}"
        )
    if length == 0:
        return np.zeros(0)
    pieces = []
    for plain in plains:
        for field in unpack(plain, params)[:-1]:
            pieces.append(decode(field, count, params))
    return np.concatenate(pieces)[:length]


def ep_eval(
    plains_by_client: Sequence[Sequence[PackedPlain]], params: SchemeParams
) -> list[PackedPlain]:
    """Position-wise sum of N packed sequences in R_p."""
    if not plains_by_client:
        raise CodecError("nothing to aggregate")
    if len(plains_by_client) > 1 << params.pad:
        raise CodecError(
            f"{len(plains_by_client)} summands exceed the 2^{params.pad} carry budget"
        )
    length = len(plains_by_client[0])
    if any(len(seq) != length for seq in plains_by_client):
        raise CodecError("plaintext sequences differ in length")
    mask = params.p_mask
    geometry = (params.slots_T, params.pad, params.log_q0, params.n)
    result = []
    for position in range(length):
        column = [seq[position] for seq in plains_by_client]
        if any((p.slots_T, p.pad, p.log_q0, p.n) != geometry for p in column):
            raise CodecError("plaintext geometry mismatch")
        total = np.bitwise_and(np.sum([p.coeffs for p in column], axis=0), mask)
        result.append(
            PackedPlain(np.asarray(total, dtype=object), params.slots_T, params.pad,
                        params.log_q0, params.log_p)
        )
    return result


def codec_error_bound(params: SchemeParams, count: int = 1) -> float:
    """Worst-case |decoded - true| per real for a sum of ``count`` encodings.

    Each coefficient carries at most 1/2 of rounding error and a slot sums n
    of them, so one encoding is off by at most n / (2 * delta).
    """
    return count * params.n / (2 * params.delta)
