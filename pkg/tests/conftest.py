"""Shared test fixtures for ESAFL."""

from __future__ import annotations

from typing import Any

import numpy as np
import pytest

from esafl.api.status import set_aggregator
from esafl.config.settings import Settings, set_settings
from esafl.engine.trainer import keydeal
from esafl.models.training import TrainConfig
from esafl.scheme.codec import PackedPlain, ecd_pack
from esafl.scheme.eshe import Ciphertext, KeyMaterial, encrypt, keygen
from esafl.scheme.params import SchemeParams, setup
from esafl.scheme.prg import round_public
from esafl.wire.messages import KeyIssue, RoundSubmit


# ---------------------------------------------------------------------------
# Parameter factories
# ---------------------------------------------------------------------------


def make_params(
    n: int = 64,
    num_clients: int = 3,
    log_q0: int = 16,
    ternary_weight: int = 16,
    **overrides: Any,
) -> SchemeParams:
    """Production moduli at a small ring dimension."""
    return setup(
        n=n,
        log_q=478,
        log_p=460,
        log_q0=log_q0,
        num_clients=num_clients,
        ternary_weight=min(ternary_weight, n),
        **overrides,
    )


def make_tiny_params(**overrides: Any) -> SchemeParams:
    """The parameter set of the wire and PRG golden vectors."""
    fields: dict[str, Any] = {
        "n": 4, "log_q": 24, "log_p": 16, "log_q0": 4, "num_clients": 2, "ternary_weight": 2,
    }
    fields.update(overrides)
    return setup(**fields)


def make_full_params(**overrides: Any) -> SchemeParams:
    """The benchmark-scale profile (n = 2^15)."""
    fields: dict[str, Any] = {
        "n": 1 << 15, "log_q": 478, "log_p": 460, "log_q0": 16, "num_clients": 9,
    }
    fields.update(overrides)
    return setup(**fields)


# ---------------------------------------------------------------------------
# Key and message factories
# ---------------------------------------------------------------------------


def make_keys(params: SchemeParams, seed: int = 0) -> KeyMaterial:
    return keygen(params, np.random.default_rng(seed))


def make_issues(params: SchemeParams, seed: int = 0) -> list[KeyIssue]:
    return keydeal(params, np.random.default_rng(seed))


def make_plains(
    params: SchemeParams, rng: np.random.Generator, length: int | None = None
) -> list[list[PackedPlain]]:
    """One packed plaintext sequence of uniform [0, 1] reals per client."""
    size = params.reals_per_poly if length is None else length
    return [ecd_pack(rng.uniform(0.0, 1.0, size=size), params) for _ in range(params.num_clients)]


def make_ciphertexts(
    params: SchemeParams,
    keys: KeyMaterial,
    plains: list[list[PackedPlain]],
    round_index: int,
    rng: np.random.Generator,
) -> list[list[Ciphertext]]:
    """Encrypt every client's sequence under a^t; indexed [client][position]."""
    a_t = round_public(round_index, keys.seed, keys.a0, params)
    return [
        [encrypt(a_t, keys.enc_keys[i], plain, params, rng, round_index) for plain in sequence]
        for i, sequence in enumerate(plains)
    ]


def make_submit(
    params: SchemeParams,
    keys: KeyMaterial,
    client_id: int,
    round_index: int = 1,
    length: int = 8,
    seed: int = 0,
) -> RoundSubmit:
    rng = np.random.default_rng([seed, client_id, round_index])
    a_t = round_public(round_index, keys.seed, keys.a0, params)
    plains = ecd_pack(rng.uniform(0.0, 1.0, size=length), params)
    cts = tuple(
        encrypt(a_t, keys.enc_keys[client_id], plain, params, rng, round_index)
        for plain in plains
    )
    return RoundSubmit(round_index, client_id, length, cts)


def make_config(**overrides: Any) -> TrainConfig:
    """A short run over a small cohort."""
    fields: dict[str, Any] = {
        "rounds": 5,
        "num_clients": 3,
        "dim": 4,
        "samples_per_client": 16,
        "seed": 7,
        "round_timeout": 5.0,
    }
    fields.update(overrides)
    return TrainConfig(**fields)


# ---------------------------------------------------------------------------
# Fixtures
# ---------------------------------------------------------------------------


@pytest.fixture
def params() -> SchemeParams:
    return make_params()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _isolated_globals(tmp_path, monkeypatch):
    """Fresh settings and no registered aggregator for every test."""
    for name in ("ESAFL_PROFILE", "ESAFL_LOG_LEVEL", "ESAFL_DATA_DIR", "ESAFL_ROUND_TIMEOUT"):
        monkeypatch.delenv(name, raising=False)
    set_settings(Settings(data_dir=tmp_path / "data", round_timeout=5.0))
    set_aggregator(None)
    yield
    set_aggregator(None)
