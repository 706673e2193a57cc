"""Self-test suites: ring oracle, PRG and codec vectors, scheme identities, wire format."""

from __future__ import annotations

import logging
import time
import warnings
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from esafl import golden
from esafl.scheme.codec import (
    EncodedPoly,
    PackedPlain,
    check_zero_slot,
    codec_error_bound,
    decode,
    ecd_pack,
    encode,
    ep_eval,
    pack,
    unpack,
)
from esafl.scheme.errors import EsaflError, NoiseOverflowError, RoundMismatchError
from esafl.scheme.eshe import Ciphertext, decrypt, encrypt, eval_add, keygen
from esafl.scheme.params import SchemeParams, capacity, setup
from esafl.scheme.prg import derive_seed, keystream, prpg, round_public
from esafl.scheme.ring import (
    RingElem,
    SmallPoly,
    add,
    mul_small,
    mul_sparse,
    sample_ternary,
    sample_uniform,
    sub,
)
from esafl.wire.frames import HEADER_SIZE, Frame, MsgType
from esafl.wire.messages import (
    Abort,
    AbortReason,
    RoundResult,
    RoundSubmit,
    deserialize,
    to_frame,
)

logger = logging.getLogger(__name__)

ORACLE_N = 16
ORACLE_LOG_Q = 40
ORACLE_WEIGHT = 5
MIN_MISMATCH = 0.999


class SelftestFailure(AssertionError):
    """A self-test expectation did not hold."""


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str = ""
    seconds: float = 0.0


@dataclass
class SuiteContext:
    params: SchemeParams
    trials: int
    rng: np.random.Generator
    vectors: Path | None = None


def _expect(condition: bool, message: str) -> None:
    if not condition:
        raise SelftestFailure(message)


def negacyclic_schoolbook(a: list[int], b: list[int], mask: int) -> list[int]:
    """O(n^2) product mod X^n + 1, reduced by ``mask``."""
    n = len(a)
    out = [0] * n
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            if i + j < n:
                out[i + j] += x * y
            else:
                out[i + j - n] -= x * y
    return [v & mask for v in out]


def _mismatch_fraction(got: PackedPlain, truth: PackedPlain) -> float:
    return float(np.mean(got.coeffs != truth.coeffs))


def _expect_overflow(plain: PackedPlain, count: int, params: SchemeParams, what: str) -> None:
    try:
        check_zero_slot(plain, count, params)
    except NoiseOverflowError:
        return
    raise SelftestFailure(f"{what} passed the zero-slot check")


# -- suites ----------------------------------------------------------------


def _ring_suite(ctx: SuiteContext) -> str:
    mask = (1 << ORACLE_LOG_Q) - 1
    rng = ctx.rng
    for _ in range(ctx.trials):
        a = sample_uniform(rng, ORACLE_N, ORACLE_LOG_Q)
        b = sample_uniform(rng, ORACLE_N, ORACLE_LOG_Q)
        keys = [sample_ternary(rng, ORACLE_N, ORACLE_WEIGHT) for _ in range(3)]

        expected = negacyclic_schoolbook(a.to_list(), keys[0].to_dense().tolist(), mask)
        _expect(mul_sparse(a, keys[0]).to_list() == expected, "mul_sparse differs from the oracle")

        joint = SmallPoly.from_keys(keys)
        expected = negacyclic_schoolbook(a.to_list(), joint.coeffs.tolist(), mask)
        _expect(mul_small(a, joint).to_list() == expected, "mul_small differs from the oracle")

        summed = [(x + y) & mask for x, y in zip(a.to_list(), b.to_list())]
        _expect(add(a, b).to_list() == summed, "add differs from the coefficient-wise sum")
        _expect(sub(add(a, b), b) == a, "sub does not invert add")
    return f"{ctx.trials} random products at n={ORACLE_N}"


def _prg_suite(ctx: SuiteContext) -> str:
    data = golden.load("prg", ctx.vectors)
    block = keystream(bytes(32), 64)
    _expect(block.hex() == data["chacha20_zero_key_block0"], "ChaCha20 block differs")
    for case in data.get("derived_key", []):
        key = derive_seed(case["t"], case["secret"], case["bits"])
        _expect(key.hex() == case["key"], f"derive_seed(t={case['t']}) differs from the vector")
        _expect(keystream(key, 64).hex() == case["block0"], "keyed ChaCha20 block differs")
    for case in data["prpg"]:
        got = prpg(case["t"], case["secret"], setup(**case["params"])).to_list()
        _expect(got == case["coeffs"], f"prpg(t={case['t']}) differs from the vector")

    if ctx.trials:
        params = ctx.params
        secret = int(ctx.rng.integers(0, 1 << min(62, params.seed_bits_k)))
        first = prpg(5, secret, params)
        _expect(first == prpg(5, secret, params), "prpg is not deterministic")
        shared = int(np.sum(first.coeffs == prpg(6, secret, params).coeffs))
        _expect(shared <= params.n // 100, "consecutive rounds share coefficients")
    return f"vectors ok, n={ctx.params.n}"


def _codec_suite(ctx: SuiteContext) -> str:
    data = golden.load("codec", ctx.vectors)
    for case in data["encode"]:
        got = encode(case["values"], setup(**case["params"])).coeffs.tolist()
        _expect(got == case["coeffs"], f"encode({case['values']}) differs from the vector")
    for case in data["pack"]:
        case_params = setup(**case["params"])
        polys = [
            EncodedPoly(np.asarray(f, dtype=np.int64), case_params.delta, case_params.log_q0)
            for f in case["fields"]
        ]
        packed = pack(polys, case_params)
        _expect(packed.coeffs.tolist() == case["packed"], "pack differs from the vector")
        fields = [p.coeffs.tolist() for p in unpack(packed, case_params)]
        _expect(fields[:-1] == case["fields"], "unpack does not invert pack")
        _expect(not any(fields[-1]), "zero slot is populated after pack")

    params = ctx.params
    bound = codec_error_bound(params)
    for _ in range(ctx.trials):
        values = ctx.rng.uniform(0.0, 1.0, size=params.reals_per_poly)
        error = float(np.max(np.abs(decode(encode(values, params), 1, params) - values)))
        _expect(error <= bound, f"roundtrip error {error:.3e} exceeds {bound:.3e}")
    return f"vectors ok, roundtrip bound {bound:.2e}"


def _eshe_suite(ctx: SuiteContext) -> str:
    if ctx.trials == 0:
        return "no trials"
    params, rng = ctx.params, ctx.rng
    keys = keygen(params, rng)
    length = min(capacity(params), params.reals_per_poly)
    for trial in range(ctx.trials):
        t = 2 + trial
        a_t = round_public(t, keys.seed, keys.a0, params)
        plains = [ecd_pack(rng.uniform(0, 1, size=length), params) for _ in keys.enc_keys]
        cts = [
            encrypt(a_t, key, plains[i][0], params, rng, t) for i, key in enumerate(keys.enc_keys)
        ]
        got = decrypt(a_t, keys.dec_key, eval_add(cts, params), params)
        _expect(got == ep_eval(plains, params)[0], f"homomorphic sum differs in trial {trial}")
    return f"{ctx.trials} exact aggregate decryptions"


def _negative_suite(ctx: SuiteContext) -> str:
    if ctx.trials == 0:
        return "no trials"
    params, rng = ctx.params, ctx.rng
    keys = keygen(params, rng)
    # rounds 0 and 1 share a^0, so the spanning pair is 2 and 3
    a_2 = round_public(2, keys.seed, keys.a0, params)
    a_3 = round_public(3, keys.seed, keys.a0, params)

    def encrypt_all(a_t: RingElem, t: int) -> tuple[list[Ciphertext], list[list[PackedPlain]]]:
        plains = [
            ecd_pack(rng.uniform(0, 1, size=params.reals_per_poly), params) for _ in keys.enc_keys
        ]
        cts = [encrypt(a_t, k, plains[i][0], params, rng, t) for i, k in enumerate(keys.enc_keys)]
        return cts, plains

    worst = 1.0
    for _ in range(ctx.trials):
        cts, plains = encrypt_all(a_2, 2)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            partial = decrypt(
                a_2, keys.dec_key, eval_add(cts[:-1], params), params, allow_partial=True
            )
        worst = min(worst, _mismatch_fraction(partial, ep_eval(plains[:-1], params)[0]))
        _expect_overflow(partial, params.num_clients - 1, params, "partial aggregate")

        later, _later_plains = encrypt_all(a_3, 3)
        mixed = cts[:-1] + later[-1:]
        try:
            eval_add(mixed, params)
            raise SelftestFailure("spanning-round aggregate was accepted")
        except RoundMismatchError:
            pass
        total = eval_add(mixed, params, allow_mixed_rounds=True)
        spanning = decrypt(a_2, keys.dec_key, total, params)
        worst = min(worst, _mismatch_fraction(spanning, ep_eval(plains, params)[0]))
        _expect_overflow(spanning, params.num_clients, params, "spanning-round aggregate")

    _expect(worst >= MIN_MISMATCH, f"only {worst:.2%} of coefficients differ from the sum")
    return f"{ctx.trials} partial and spanning-round aggregates rejected, >= {worst:.2%} garbled"


def _wire_suite(ctx: SuiteContext) -> str:
    data = golden.load("wire", ctx.vectors)
    params = setup(**data["params"])
    body = RingElem.from_ints(data["body"], params.log_q)

    case = data["round_submit"]
    ct = Ciphertext(body, case["round_index"], 1)
    submit = RoundSubmit(case["round_index"], case["client_id"], case["length"], (ct,))
    frame = to_frame(submit, params)
    _expect(frame.to_bytes().hex() == case["frame"], "RoundSubmit bytes differ")
    _expect(deserialize(frame, params) == submit, "RoundSubmit does not parse back")

    case = data["round_result"]
    ct = Ciphertext(body, case["round_index"], case["agg_count"])
    result = RoundResult(case["round_index"], case["agg_count"], case["length"], (ct,))
    frame = to_frame(result, params)
    _expect(frame.to_bytes().hex() == case["frame"], "RoundResult bytes differ")
    _expect(deserialize(frame, params) == result, "RoundResult does not parse back")

    case = data["abort"]
    abort = Abort(case["round_index"], AbortReason(case["reason"]))
    _expect(to_frame(abort).to_bytes().hex() == case["frame"], "Abort bytes differ")
    payload = bytes.fromhex(case["frame"])[HEADER_SIZE:]
    _expect(deserialize(Frame(MsgType.ABORT, payload)) == abort, "Abort does not parse back")
    return "golden frames ok"


SUITES: dict[str, Callable[[SuiteContext], str]] = {
    "ring": _ring_suite,
    "prg": _prg_suite,
    "codec": _codec_suite,
    "eshe": _eshe_suite,
    "negatives": _negative_suite,
    "wire": _wire_suite,
}


def cmd_selftest(
    params: SchemeParams,
    trials: int = 10,
    seed: int = 0,
    *,
    vectors: Path | None = None,
    suites: list[str] | None = None,
) -> list[SuiteResult]:
    """Run the self-test suites; a failure is reported per suite, never raised.

    Args:
        trials: Random trials per suite; 0 checks the golden vectors only.
        vectors: Directory of golden vector files replacing the packaged ones.
        suites: Subset of SUITES to run, in order.
    """
    if trials < 0:
        raise ValueError(f"trials must be >= 0, got {trials}")
    if trials == 0:
        logger.warning("No random trials requested; only golden vectors are checked")
    ctx = SuiteContext(params, trials, np.random.default_rng(seed), vectors)
    results = []
    for name in suites or list(SUITES):
        started = time.perf_counter()
        try:
            detail = SUITES[name](ctx)
            passed = True
        except (SelftestFailure, EsaflError, KeyError, ValueError, OSError) as e:
            detail = f"{type(e).__name__}: {e}"
            passed = False
        elapsed = time.perf_counter() - started
        results.append(SuiteResult(name, passed, detail, elapsed))
        status = "pass" if passed else "FAIL"
        logger.log(
            logging.INFO if passed else logging.ERROR,
            f"Suite {name}: {status} ({detail}) in {elapsed:.2f}s",
        )
    return results
