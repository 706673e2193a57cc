"""File storage for ESAFL: key drops and run traces."""

from esafl.store.keystore import read_key_issue, read_key_set, write_key_set
from esafl.store.trace import write_bench, write_loss_curve, write_trace

__all__ = [
    "write_key_set",
    "read_key_set",
    "read_key_issue",
    "write_trace",
    "write_loss_curve",
    "write_bench",
]
