"""Scheme parameters and derived packing geometry.

A :class:`SchemeParams` instance is the single source of truth every party
loads (from the same profile) before a training run. It is immutable and
validated on construction.
"""

from __future__ import annotations

import math
from typing import Any

from pydantic import BaseModel, Field, ValidationError, model_validator

from esafl.scheme.errors import ParameterError

DEFAULT_SIGMA = math.sqrt(1.22)


def ceil_log2(value: int) -> int:
    """Smallest b with 2**b >= value (0 for value <= 1)."""
    return max(value - 1, 0).bit_length()


class SchemeParams(BaseModel):
    """Public parameters of the homomorphic scheme and the packing layer."""

    n: int = Field(default=1 << 15, ge=2, description="Ring dimension (power of two)")
    log_q: int = Field(default=478, gt=0, description="Ciphertext modulus bits, q = 2^log_q")
    log_p: int = Field(default=460, gt=0, description="Plaintext modulus bits, p = 2^log_p")
    log_q0: int = Field(default=16, ge=2, description="Per-slot message precision in bits")
    num_clients: int = Field(default=9, ge=2, description="Number of clients N")
    ternary_weight: int = Field(default=64, ge=0, description="Hamming weight h of each key")
    gaussian_sigma: float = Field(default=DEFAULT_SIGMA, gt=0, description="Error std deviation")
    pad: int = Field(default=0, ge=0, description="Carry bits above each slot")
    slots_T: int = Field(default=0, ge=0, description="Bit slots per packed coefficient")
    seed_bits_k: int = Field(default=64, gt=0, le=256, description="Bit length of seed B")
    reals_per_slot: int = Field(default=1, ge=1, le=2, description="Reals per complex slot")

    model_config = {"frozen": True, "extra": "forbid"}

    @model_validator(mode="after")
    def check_constraints(self) -> SchemeParams:
        """Validate the mutual constraints between parameters."""
        if self.n & (self.n - 1):
            raise ParameterError("n is a power of two", f"n={self.n}")
        if self.log_p >= self.log_q:
            raise ParameterError("log_p < log_q", f"log_p={self.log_p}, log_q={self.log_q}")
        if self.ternary_weight > self.n:
            raise ParameterError("ternary_weight <= n", f"h={self.ternary_weight}, n={self.n}")
        if self.pad < ceil_log2(self.num_clients):
            raise ParameterError(
                "pad >= ceil(log2(num_clients))",
                f"pad={self.pad}, N={self.num_clients}",
            )
        if self.slots_T < 2:
            raise ParameterError("slots_T >= 2", f"slots_T={self.slots_T}")
        if self.slot_bits > 62:
            raise ParameterError("pad + log_q0 <= 62", f"slot width {self.slot_bits}")
        if self.slots_T * self.slot_bits > self.log_p:
            raise ParameterError(
                "slots_T * (pad + log_q0) <= log_p",
                f"{self.slots_T} * {self.slot_bits} > {self.log_p}",
            )
        if self.num_clients * self.error_bound >= 1 << (self.log_q - self.log_p):
            raise ParameterError(
                "num_clients * ceil(6 * sigma) < 2^(log_q - log_p)",
                f"{self.num_clients} * {self.error_bound}",
            )
        return self

    # -- derived quantities -------------------------------------------------

    @property
    def q(self) -> int:
        return 1 << self.log_q

    @property
    def p(self) -> int:
        return 1 << self.log_p

    @property
    def q_mask(self) -> int:
        return (1 << self.log_q) - 1

    @property
    def p_mask(self) -> int:
        return (1 << self.log_p) - 1

    @property
    def coeff_bytes(self) -> int:
        """Serialized bytes per ring coefficient."""
        return (self.log_q + 7) // 8

    @property
    def slot_bits(self) -> int:
        return self.pad + self.log_q0

    @property
    def error_bound(self) -> int:
        """Tail-truncation bound of the error sampler."""
        return math.ceil(6 * self.gaussian_sigma)

    @property
    def delta(self) -> int:
        """Fixed-point scaling factor of the encoder."""
        return 1 << (self.log_q0 - 2)

    @property
    def offset(self) -> int:
        """Offset added to each signed encoded coefficient."""
        return 1 << (self.log_q0 - 1)

    @property
    def num_slots(self) -> int:
        """Complex slots per encoded polynomial."""
        return self.n // 2

    @property
    def reals_per_poly(self) -> int:
        return self.num_slots * self.reals_per_slot

    @property
    def data_slots(self) -> int:
        """Bit slots carrying data (the lowest slot stays zero)."""
        return self.slots_T - 1

    @property
    def ciphertext_bytes(self) -> int:
        """Serialized ring-element body size of one ciphertext."""
        return self.n * self.coeff_bytes


def _build(fields: dict[str, Any]) -> SchemeParams:
    try:
        return SchemeParams(**fields)
    except ValidationError as exc:
        for error in exc.errors():
            cause = (error.get("ctx") or {}).get("error")
            if isinstance(cause, ParameterError):
                raise cause from None
        raise ParameterError("field constraints", str(exc)) from None


def setup(
    n: int = 1 << 15,
    log_q: int = 478,
    log_p: int = 460,
    log_q0: int = 16,
    num_clients: int = 9,
    **overrides: Any,
) -> SchemeParams:
    """Build validated parameters, deriving pad and slots_T unless overridden.

    Raises:
        ParameterError: naming the violated invariant.
    """
    for name, value in (("n", n), ("log_q", log_q), ("log_p", log_p), ("log_q0", log_q0),
                        ("num_clients", num_clients)):
        if value <= 0:
            raise ParameterError(f"{name} > 0", f"{name}={value}")

    pad = overrides.pop("pad", None)
    slots_t = overrides.pop("slots_T", None)
    if pad is None:
        pad = ceil_log2(num_clients)
    if slots_t is None:
        slots_t = log_p // (log_q0 + pad)

    return _build(
        {
            "n": n,
            "log_q": log_q,
            "log_p": log_p,
            "log_q0": log_q0,
            "num_clients": num_clients,
            "pad": pad,
            "slots_T": slots_t,
            **overrides,
        }
    )


def capacity(params: SchemeParams) -> int:
    """Real messages carried by one packed plaintext (and so one ciphertext)."""
    return params.data_slots * params.reals_per_poly


def ciphertext_count(length: int, params: SchemeParams) -> int:
    """Ciphertexts needed for a gradient vector of ``length`` reals."""
    return -(-length // capacity(params)) if length > 0 else 0


def unpacked(params: SchemeParams) -> SchemeParams:
    """The same parameters without packing: one data slot per coefficient."""
    return _build({**params.model_dump(), "slots_T": 2})
