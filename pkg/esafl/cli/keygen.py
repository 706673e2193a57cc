"""Trusted-dealer key generation to a key directory."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from esafl.engine.trainer import keydeal
from esafl.scheme.params import SchemeParams
from esafl.store.keystore import write_key_set

logger = logging.getLogger(__name__)


def cmd_keygen(params: SchemeParams, out_dir: Path, seed: int) -> list[Path]:
    """Deal keys and write params.profile, aggregator.profile and client-<i>.key.

    The same seed always produces identical files.
    """
    issues = keydeal(params, np.random.default_rng(seed))
    return write_key_set(out_dir, params, issues)
