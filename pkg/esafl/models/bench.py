"""Benchmark and traffic-estimate models."""

from __future__ import annotations

from pydantic import BaseModel, Field


class TimingRow(BaseModel):
    """One benchmark repetition."""

    rep: int
    encrypt_ms: float = Field(..., description="Encode, pack and encrypt one client's vector")
    aggregate_ms: float = Field(..., description="Sum N clients' ciphertexts")
    decrypt_ms: float = Field(..., description="Decrypt, check, unpack and decode the aggregate")
    error_mean: float = Field(default=0.0, description="Mean |decrypted - true aggregate|")
    error_max: float = Field(default=0.0, description="Max |decrypted - true aggregate|")


class Quantiles(BaseModel):
    p50: float
    p90: float
    max: float


class ErrorStats(BaseModel):
    """|decrypted aggregate - true aggregate| over all reals."""

    mean: float
    max: float
    bound: float = Field(..., description="Worst-case codec bound for this configuration")


class TrafficFigures(BaseModel):
    """Closed-form traffic of one configuration (packed or unpacked)."""

    packed: bool
    slots_T: int
    capacity: int = Field(..., description="Reals per ciphertext")
    ciphertext_count: int
    bytes_per_ciphertext: int = Field(..., description="Serialized ring-element body")
    uplink_bytes: int = Field(..., description="One client's RoundSubmit frame")
    downlink_bytes: int = Field(..., description="One RoundResult frame")


class BenchReport(BaseModel):
    """Traffic estimate plus (for bench runs) timings and error magnitudes."""

    profile: str
    shape: str | None = None
    length: int = Field(..., ge=0, description="Gradient count L")
    num_clients: int
    log_q0: int
    plain_bytes: int = Field(..., description="8 bytes per gradient, one direction")
    packed: TrafficFigures
    unpacked: TrafficFigures | None = None
    measured: TrafficFigures | None = Field(
        default=None, description="Configuration the timings and errors were measured with"
    )
    timings: list[TimingRow] = Field(default_factory=list)
    encrypt_ms: Quantiles | None = None
    aggregate_ms: Quantiles | None = None
    decrypt_ms: Quantiles | None = None
    error: ErrorStats | None = None
    measured_uplink_bytes: int | None = Field(
        default=None, description="Serializer output size of the measured RoundSubmit"
    )
