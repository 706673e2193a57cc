"""Exception hierarchy for ESAFL.

Every error raised by the scheme, the wire layer and the federated engine
derives from :class:`EsaflError` so callers (and the CLI exit-code mapping)
can catch one base class.
"""

from __future__ import annotations


class EsaflError(Exception):
    """Base class for all ESAFL errors."""


class ParameterError(EsaflError, ValueError):
    """A scheme parameter constraint is violated."""

    def __init__(self, invariant: str, detail: str = "") -> None:
        self.invariant = invariant
        message = f"parameter constraint violated: {invariant}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class DimensionMismatchError(EsaflError, ValueError):
    """Ring operands have different dimensions."""


class ModulusMismatchError(EsaflError, ValueError):
    """Ring operands live in different coefficient rings."""


class SeedRangeError(EsaflError, ValueError):
    """Round counter or seed does not fit in the configured bit length."""


class CodecError(EsaflError, ValueError):
    """Encoding, packing or decoding input is invalid."""


class SlotOverflowError(CodecError):
    """A slot value exceeds its declared bit width."""


class RoundMismatchError(EsaflError):
    """Ciphertexts from different rounds were combined."""


class AggregateCountError(EsaflError):
    """An aggregate would exceed the number of clients."""


class PartialAggregateWarning(UserWarning):
    """Decryption of an aggregate that does not hold all N contributions."""


class NoiseOverflowError(EsaflError):
    """Decrypted plaintext falls outside the valid slot band (fatal)."""


class RoundAbortedError(EsaflError):
    """A federated round was aborted (timeout or peer abort)."""

    def __init__(self, round_index: int, reason: str) -> None:
        self.round_index = round_index
        self.reason = reason
        super().__init__(f"round {round_index} aborted: {reason}")


class SubmissionRejectedError(EsaflError):
    """The aggregator refused a round submission."""


class DuplicateSubmissionError(SubmissionRejectedError):
    """A client submitted twice for the same round."""


class StaleRoundError(SubmissionRejectedError):
    """A submission names a round other than the open one."""


class UnknownClientError(SubmissionRejectedError):
    """A submission from a client outside the expected cohort."""


class WireError(EsaflError):
    """Base class for framing and message codec failures."""

    code: int = 0x00


class MalformedFrameError(WireError):
    """Frame header is invalid (e.g. unknown message type)."""

    code = 0x01


class TruncatedFrameError(WireError):
    """Stream ended before a complete frame was read."""

    code = 0x02


class FrameTooLargeError(WireError):
    """Declared frame length exceeds the configured cap."""

    code = 0x03


class MalformedMessageError(WireError):
    """Frame payload does not parse as the declared message."""

    code = 0x04


class KeyExposureError(WireError):
    """Attempt to send key material over the open transport."""

    code = 0x05
