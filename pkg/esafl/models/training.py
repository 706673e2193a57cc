"""Training-run models for ESAFL.

These models describe a federated training run and the per-round trace it
produces.
"""

from __future__ import annotations

from datetime import UTC, datetime
from enum import StrEnum

from pydantic import BaseModel, Field, model_validator


class ExecutionMode(StrEnum):
    """How clients reach the aggregator."""

    IN_PROCESS = "in_process"
    TCP = "tcp"


class KeyDealMode(StrEnum):
    """Who generates the key material."""

    TRUSTED_DEALER = "trusted_dealer"
    # Reserved; dealer-free generation needs an MPC protocol we do not ship.
    DISTRIBUTED = "distributed"


class WeightScheme(StrEnum):
    """How the per-client aggregation weights are chosen."""

    UNIFORM = "uniform"
    DATASET = "dataset"


class TrainConfig(BaseModel):
    """Configuration of one synthetic federated training run."""

    rounds: int = Field(default=200, ge=0, description="Number of rounds M")
    learning_rate: float = Field(default=0.05, gt=0, description="Learning rate eta")
    clip_bound: float = Field(default=4.0, gt=0, description="Public clipping bound c")
    num_clients: int = Field(default=9, ge=2, description="Cohort size N")

    # Synthetic linear-regression task
    dim: int = Field(default=16, ge=1, description="Model dimension d")
    samples_per_client: int | list[int] = Field(
        default=64,
        description="Local dataset size |D_i|, shared or per client",
    )
    batch_size: int | None = Field(
        default=None, ge=1, description="Minibatch size (None: full local dataset)"
    )
    data_noise: float = Field(default=0.0, ge=0, description="Std-dev of label noise")
    data_seed: int = Field(default=0, ge=0, description="Seed of the ground truth and datasets")

    # Aggregation weights
    weight_scheme: WeightScheme = Field(default=WeightScheme.UNIFORM)
    weights: list[float] | None = Field(
        default=None, description="Explicit alpha_i; overrides weight_scheme"
    )

    # Execution
    seed: int = Field(default=0, ge=0, description="Seed of key generation and encryption noise")
    mode: ExecutionMode = Field(default=ExecutionMode.IN_PROCESS)
    key_deal: KeyDealMode = Field(default=KeyDealMode.TRUSTED_DEALER)
    host: str = Field(default="127.0.0.1")
    port: int = Field(default=0, ge=0, description="Aggregator port for tcp mode (0: ephemeral)")
    round_timeout: float = Field(default=60.0, gt=0)

    model_config = {"extra": "forbid"}

    @model_validator(mode="after")
    def check_cohort(self) -> TrainConfig:
        counts = self.sample_counts()
        if len(counts) != self.num_clients:
            raise ValueError(
                f"samples_per_client has {len(counts)} entries for {self.num_clients} clients"
            )
        if any(count < 1 for count in counts):
            raise ValueError("every client needs at least one sample")
        if self.weights is not None:
            if len(self.weights) != self.num_clients:
                raise ValueError(
                    f"weights has {len(self.weights)} entries for {self.num_clients} clients"
                )
            if any(alpha <= 0 for alpha in self.weights):
                raise ValueError("weights must be positive")
        return self

    def sample_counts(self) -> list[int]:
        if isinstance(self.samples_per_client, int):
            return [self.samples_per_client] * self.num_clients
        return list(self.samples_per_client)

    def resolved_weights(self) -> list[float]:
        """alpha_i per client."""
        if self.weights is not None:
            return list(self.weights)
        if self.weight_scheme is WeightScheme.DATASET:
            return [float(count) for count in self.sample_counts()]
        return [1.0] * self.num_clients


class RoundTrace(BaseModel):
    """Measurements of one round."""

    round: int
    loss_plain: float
    loss_enc: float
    max_model_diff: float = Field(..., description="max |w_enc - w_plain| after the update")
    max_aggregate_diff: float = Field(
        ..., description="max |decrypted aggregate - exact sum of submitted gradients|"
    )
    ciphertexts: int = Field(..., description="Ciphertexts per client submission")
    uplink_bytes: int
    downlink_bytes: int
    wall_ms_encrypt: float
    wall_ms_decrypt: float
    wall_ms_aggregate: float


class TrainingTrace(BaseModel):
    """Result of a training run; partial if a round failed."""

    started_at: datetime = Field(default_factory=lambda: datetime.now(UTC))
    profile: str = ""
    rounds: list[RoundTrace] = Field(default_factory=list)
    initial_model: list[float] = Field(default_factory=list)
    final_model: list[float] = Field(default_factory=list)
    plain_model: list[float] = Field(default_factory=list)
    ground_truth: list[float] = Field(default_factory=list)
    models_identical: bool = Field(
        default=True, description="All clients ended every round with bit-identical models"
    )
    aborted: str | None = Field(default=None, description="Failure that ended the run early")

    @property
    def completed_rounds(self) -> int:
        return len(self.rounds)

    @property
    def uplink_bytes(self) -> int:
        return sum(r.uplink_bytes for r in self.rounds)

    @property
    def downlink_bytes(self) -> int:
        return sum(r.downlink_bytes for r in self.rounds)
