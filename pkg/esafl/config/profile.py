"""Flat key=value parameter profiles.

One ``key=value`` pair per line, ASCII, keys named as the SchemeParams
fields. Blank lines and ``#`` comments are ignored. Every field is written
on dump so a profile fully pins the parameters.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any

from esafl.scheme.errors import ParameterError
from esafl.scheme.params import SchemeParams, setup

logger = logging.getLogger(__name__)

_INT_FIELDS = {
    "n", "log_q", "log_p", "log_q0", "num_clients", "ternary_weight",
    "pad", "slots_T", "seed_bits_k", "reals_per_slot",
}
_FLOAT_FIELDS = {"gaussian_sigma"}

BUILTIN_PROFILES: dict[str, dict[str, Any]] = {
    # Correctness-test scale; security is irrelevant here.
    "desk": {"n": 1 << 10, "log_q": 478, "log_p": 460, "log_q0": 16, "num_clients": 9},
    # Benchmark scale (claimed 256-bit security for this parameter set).
    "full": {"n": 1 << 15, "log_q": 478, "log_p": 460, "log_q0": 16, "num_clients": 9},
}


def dumps(params: SchemeParams) -> str:
    """Serialize parameters as a key=value profile."""
    lines = [f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}"
             for key, value in params.model_dump().items()]
    return "\n".join(lines) + "\n"


def loads(text: str) -> SchemeParams:
    """Parse a key=value profile.

    Missing pad/slots_T are derived exactly as :func:`setup` does.

    Raises:
        ParameterError: on malformed lines, unknown keys or violated invariants.
    """
    fields: dict[str, Any] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParameterError("profile syntax", f"line {number}: expected key=value")
        key, _, value = (part.strip() for part in line.partition("="))
        try:
            if key in _INT_FIELDS:
                fields[key] = int(value)
            elif key in _FLOAT_FIELDS:
                fields[key] = float(value)
            else:
                raise ParameterError("profile keys", f"line {number}: unknown key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ParameterError):
                raise
            raise ParameterError("profile syntax", f"line {number}: bad value {value!r}") from exc
    return setup(**fields)


def load(source: str | Path, overrides: dict[str, Any] | None = None) -> SchemeParams:
    """Load a built-in profile by name or a profile file, applying overrides."""
    name = str(source)
    if name in BUILTIN_PROFILES:
        fields = dict(BUILTIN_PROFILES[name])
    else:
        path = Path(source)
        try:
            text = path.read_text(encoding="ascii")
        except OSError as exc:
            raise ParameterError("profile readable", f"{path}: {exc}") from exc
        fields = loads(text).model_dump()
        if overrides:
            # derived geometry must follow changed inputs
            if not {"pad", "slots_T"} & overrides.keys():
                fields.pop("pad")
                fields.pop("slots_T")
    fields.update(overrides or {})
    params = setup(**fields)
    logger.debug(f"Loaded profile {name}: n={params.n}, T={params.slots_T}, pad={params.pad}")
    return params


def save(params: SchemeParams, path: Path) -> None:
    path.write_text(dumps(params), encoding="ascii")
