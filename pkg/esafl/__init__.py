"""
ESAFL - encrypted secure aggregation for federated learning

Clients encrypt gradients under a multi-key RLWE scheme; an untrusted
aggregator sums ciphertexts; clients decrypt the sum in one step.
"""

__version__ = "0.1.0"

from esafl.config.settings import Settings

__all__ = ["__version__", "Settings"]
