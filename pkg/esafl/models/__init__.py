"""Pydantic models for ESAFL."""

from esafl.models.bench import (
    BenchReport,
    ErrorStats,
    Quantiles,
    TimingRow,
    TrafficFigures,
)
from esafl.models.training import (
    ExecutionMode,
    KeyDealMode,
    RoundTrace,
    TrainConfig,
    TrainingTrace,
    WeightScheme,
)

__all__ = [
    # Training
    "TrainConfig",
    "ExecutionMode",
    "KeyDealMode",
    "WeightScheme",
    "RoundTrace",
    "TrainingTrace",
    # Benchmarks
    "BenchReport",
    "TrafficFigures",
    "TimingRow",
    "Quantiles",
    "ErrorStats",
]
