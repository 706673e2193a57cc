"""TCP transport between clients and the aggregator."""

from esafl.transport.client import AggregatorConnection
from esafl.transport.server import AggregatorServer

__all__ = ["AggregatorConnection", "AggregatorServer"]
