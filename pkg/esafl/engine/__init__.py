"""Federated training engine: workload, clients, aggregator barrier, rounds."""

from esafl.engine.aggregator import AggregatorState
from esafl.engine.client import ClientState, denormalize, normalize
from esafl.engine.trainer import keydeal, run_round, run_training, run_training_async

__all__ = [
    "AggregatorState",
    "ClientState",
    "normalize",
    "denormalize",
    "keydeal",
    "run_round",
    "run_training",
    "run_training_async",
]
