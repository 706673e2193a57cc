"""Tests for parameter setup, packing geometry, profiles and settings."""

from __future__ import annotations

import pytest

from esafl.config import profile
from esafl.config.settings import Settings, get_settings, set_settings
from esafl.scheme.errors import ParameterError
from esafl.scheme.params import capacity, ceil_log2, ciphertext_count, setup, unpacked

from .conftest import make_full_params, make_params


class TestSetup:
    def test_full_profile_geometry(self):
        params = make_full_params()
        assert params.pad == 4
        assert params.slots_T == 23
        assert params.slot_bits == 20
        assert params.delta == 1 << 14
        assert params.offset == 1 << 15
        assert capacity(params) == 22 * (1 << 14)

    def test_ciphertext_body_size(self):
        params = make_full_params()
        assert params.coeff_bytes == 60
        assert params.ciphertext_bytes == 32768 * 60
        assert params.ciphertext_bytes / (1024 * 1024) == pytest.approx(1.875)

    def test_pad_follows_cohort_size(self):
        assert make_params(num_clients=2).pad == 1
        assert make_params(num_clients=4).pad == 2
        assert make_params(num_clients=5).pad == 3

    def test_explicit_geometry_override(self):
        params = make_params(slots_T=2)
        assert params.slots_T == 2
        assert params.data_slots == 1

    def test_frozen(self):
        params = make_params()
        with pytest.raises(Exception):
            params.n = 128  # type: ignore[misc]

    @pytest.mark.parametrize(
        "fields, invariant",
        [
            ({"n": 96}, "power of two"),
            ({"log_p": 478}, "log_p < log_q"),
            ({"pad": 0, "num_clients": 3}, "pad >="),
            ({"slots_T": 1}, "slots_T >= 2"),
            ({"slots_T": 40}, r"slots_T \* \(pad"),
            ({"log_q": 470, "log_p": 466}, r"num_clients \* ceil"),
        ],
    )
    def test_constraint_violations(self, fields, invariant):
        base = {"n": 64, "log_q": 478, "log_p": 460, "log_q0": 16, "num_clients": 3,
                "ternary_weight": 8}
        base.update(fields)
        with pytest.raises(ParameterError, match=invariant):
            setup(**base)

    def test_non_positive_inputs(self):
        with pytest.raises(ParameterError, match="num_clients > 0"):
            setup(n=64, num_clients=0)

    def test_ceil_log2(self):
        assert [ceil_log2(v) for v in (1, 2, 3, 8, 9, 16, 17)] == [0, 1, 2, 3, 4, 4, 5]


class TestCiphertextCounts:
    @pytest.mark.parametrize(
        "length, packed, plain",
        [(101_770, 1, 7), (1_250_000, 4, 77), (4_020_000, 12, 246)],
    )
    def test_reference_workloads(self, length, packed, plain):
        params = make_full_params()
        assert ciphertext_count(length, params) == packed
        assert ciphertext_count(length, unpacked(params)) == plain

    def test_zero_length(self):
        assert ciphertext_count(0, make_full_params()) == 0

    def test_boundary(self):
        params = make_params()
        cap = capacity(params)
        assert ciphertext_count(cap, params) == 1
        assert ciphertext_count(cap + 1, params) == 2

    def test_unpacked_keeps_moduli(self):
        params = make_full_params()
        plain = unpacked(params)
        assert plain.slots_T == 2
        assert (plain.n, plain.log_q, plain.log_p, plain.pad) == (
            params.n, params.log_q, params.log_p, params.pad
        )


class TestProfile:
    def test_dumps_pins_every_field(self):
        text = profile.dumps(make_params())
        keys = {line.split("=")[0] for line in text.splitlines() if "=" in line}
        assert {"n", "log_q", "log_p", "log_q0", "pad", "slots_T", "seed_bits_k"} <= keys

    def test_loads_inverts_dumps(self):
        params = make_params(num_clients=5)
        assert profile.loads(profile.dumps(params)) == params

    def test_comments_and_blank_lines(self):
        text = (
            "# desk scale\n\nn=64\nlog_q=478\nlog_p=460\n"
            "log_q0=16\nnum_clients=3\nternary_weight=8\n"
        )
        params = profile.loads(text)
        assert params.n == 64
        assert params.pad == 2

    def test_unknown_key(self):
        with pytest.raises(ParameterError, match="unknown key"):
            profile.loads("n=64\nmodulus=7\n")

    def test_bad_value(self):
        with pytest.raises(ParameterError, match="bad value"):
            profile.loads("n=sixty-four\n")

    def test_builtin_profiles(self):
        assert profile.load("desk").n == 1 << 10
        assert profile.load("full") == make_full_params()

    def test_overrides_rederive_geometry(self, tmp_path):
        path = tmp_path / "p.profile"
        profile.save(make_params(num_clients=3), path)
        params = profile.load(path, {"num_clients": 9, "log_q0": 32})
        assert params.num_clients == 9
        assert params.pad == 4
        assert params.slots_T == 460 // 36

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParameterError, match="profile readable"):
            profile.load(tmp_path / "absent.profile")


class TestSettings:
    def test_defaults(self):
        settings = Settings()
        assert settings.profile == "desk"
        assert settings.round_timeout == 60.0
        assert settings.max_frame_bytes == 256 * 1024 * 1024

    def test_from_env(self, monkeypatch):
        monkeypatch.setenv("ESAFL_PROFILE", "full")
        monkeypatch.setenv("ESAFL_PORT", "5000")
        monkeypatch.setenv("ESAFL_ROUND_TIMEOUT", "2.5")
        settings = Settings.from_env()
        assert settings.profile == "full"
        assert settings.port == 5000
        assert settings.round_timeout == 2.5

    def test_extra_fields_rejected(self):
        with pytest.raises(Exception):
            Settings(unknown=1)  # type: ignore[call-arg]

    def test_global_registry(self):
        settings = Settings(port=1234)
        set_settings(settings)
        assert get_settings() is settings
