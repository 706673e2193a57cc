"""Timing and error benchmark over synthetic gradient vectors."""

from __future__ import annotations

import logging
import time

import numpy as np

from esafl.cli.estimate import cmd_estimate, traffic
from esafl.engine.client import normalize
from esafl.engine.workload import SHAPE_PROFILES, synthetic_gradient
from esafl.models.bench import BenchReport, ErrorStats, Quantiles, TimingRow
from esafl.scheme.codec import check_zero_slot, codec_error_bound, dcd_unpk, ecd_pack
from esafl.scheme.eshe import decrypt, encrypt, eval_add, keygen
from esafl.scheme.errors import ParameterError
from esafl.scheme.params import SchemeParams, capacity, unpacked
from esafl.scheme.prg import round_public
from esafl.wire.messages import RoundSubmit, to_frame

logger = logging.getLogger(__name__)

BENCH_CLIP = 1.0
BENCH_ROUND = 2


def _quantiles(values: list[float]) -> Quantiles:
    data = np.asarray(values)
    return Quantiles(
        p50=float(np.percentile(data, 50)),
        p90=float(np.percentile(data, 90)),
        max=float(data.max()),
    )


def _one_rep(
    params: SchemeParams, length: int, rng: np.random.Generator
) -> tuple[TimingRow, np.ndarray, int]:
    """Encrypt N vectors, aggregate, decrypt; returns timings, |error| and submit size.

    Works one ciphertext position at a time, so only N plaintexts and one
    slice of each client's gradient are alive at once.
    """
    keys = keygen(params, rng)
    a_t = round_public(BENCH_ROUND, keys.seed, keys.a0, params)
    step = capacity(params)

    encrypt_s = 0.0
    aggregate_s = 0.0
    decrypt_s = 0.0
    error = np.empty(length)
    first_client = []
    for start in range(0, length, step):
        stop = min(start + step, length)
        truth = np.zeros(stop - start)
        cts = []
        for key in keys.enc_keys:
            values = normalize(synthetic_gradient(stop - start, BENCH_CLIP, rng), BENCH_CLIP)
            truth += values
            started = time.perf_counter()
            (plain,) = ecd_pack(values, params)
            cts.append(encrypt(a_t, key, plain, params, rng, BENCH_ROUND))
            encrypt_s += time.perf_counter() - started
        started = time.perf_counter()
        total = eval_add(cts, params)
        aggregate_s += time.perf_counter() - started
        first_client.append(cts[0])

        started = time.perf_counter()
        plain = decrypt(a_t, keys.dec_key, total, params)
        check_zero_slot(plain, params.num_clients, params)
        recovered = dcd_unpk([plain], params.num_clients, stop - start, params)
        decrypt_s += time.perf_counter() - started
        error[start:stop] = np.abs(recovered - truth)

    submit_bytes = to_frame(RoundSubmit(BENCH_ROUND, 0, length, tuple(first_client)), params).size
    row = TimingRow(
        rep=0,
        encrypt_ms=encrypt_s * 1000 / params.num_clients,
        aggregate_ms=aggregate_s * 1000,
        decrypt_ms=decrypt_s * 1000,
    )
    return row, error, submit_bytes


def cmd_bench(
    params: SchemeParams,
    shape: str | None = "fcn",
    reps: int = 1,
    seed: int = 0,
    *,
    length: int | None = None,
    profile_name: str = "",
    use_unpacked: bool = False,
) -> BenchReport:
    """Time encrypt/aggregate/decrypt over ``reps`` repetitions.

    Args:
        shape: One of the gradient shape profiles (fcn, alexnet, lstm).
        length: Explicit gradient count overriding ``shape``.
        use_unpacked: Run the unpacked configuration (T = 2) instead.
    """
    if length is None:
        if shape not in SHAPE_PROFILES:
            known = sorted(SHAPE_PROFILES)
            raise ParameterError("known shape profile", f"{shape!r} not in {known}")
        length = SHAPE_PROFILES[shape]
    if reps < 1:
        raise ParameterError("reps >= 1", f"reps={reps}")
    run_params = unpacked(params) if use_unpacked else params
    report = cmd_estimate(length, params, profile_name, shape)
    measured_figures = traffic(length, run_params)

    rng = np.random.default_rng(seed)
    rows: list[TimingRow] = []
    errors: list[np.ndarray] = []
    measured = 0
    for rep in range(reps):
        row, error, measured = _one_rep(run_params, length, rng)
        rows.append(row.model_copy(update={
            "rep": rep,
            "error_mean": float(error.mean()) if error.size else 0.0,
            "error_max": float(error.max(initial=0.0)),
        }))
        errors.append(error)
        logger.info(
            f"Rep {rep}: encrypt {row.encrypt_ms:.1f} ms/client, "
            f"aggregate {row.aggregate_ms:.1f} ms, decrypt {row.decrypt_ms:.1f} ms"
        )

    all_errors = np.concatenate(errors) if errors else np.zeros(0)
    return report.model_copy(
        update={
            "timings": rows,
            "encrypt_ms": _quantiles([r.encrypt_ms for r in rows]),
            "aggregate_ms": _quantiles([r.aggregate_ms for r in rows]),
            "decrypt_ms": _quantiles([r.decrypt_ms for r in rows]),
            "error": ErrorStats(
                mean=float(all_errors.mean()) if all_errors.size else 0.0,
                max=float(all_errors.max(initial=0.0)),
                bound=codec_error_bound(run_params, run_params.num_clients),
            ),
            "measured": measured_figures,
            "measured_uplink_bytes": measured,
        }
    )
