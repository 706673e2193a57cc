"""Operator commands: keygen, estimate, selftest, demo, bench."""

from __future__ import annotations

from enum import IntEnum

from pydantic import ValidationError

from esafl.scheme.errors import (
    EsaflError,
    NoiseOverflowError,
    ParameterError,
    RoundAbortedError,
    SubmissionRejectedError,
    WireError,
)


class ExitCode(IntEnum):
    OK = 0
    TEST_FAILURE = 1
    CONFIG_ERROR = 2
    PROTOCOL_ABORT = 3


def exit_code_for(exc: BaseException) -> ExitCode:
    """Map a failure to the process exit code."""
    if isinstance(exc, ParameterError | NoiseOverflowError | ValidationError | OSError):
        return ExitCode.CONFIG_ERROR
    if isinstance(exc, WireError | RoundAbortedError | SubmissionRejectedError):
        return ExitCode.PROTOCOL_ABORT
    if isinstance(exc, EsaflError):
        return ExitCode.PROTOCOL_ABORT
    return ExitCode.TEST_FAILURE


__all__ = ["ExitCode", "exit_code_for"]
