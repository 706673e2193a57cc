"""Closed-form ciphertext counts and traffic; no cryptography is executed."""

from __future__ import annotations

from esafl.models.bench import BenchReport, TrafficFigures
from esafl.scheme.errors import ParameterError
from esafl.scheme.params import SchemeParams, capacity, ciphertext_count, unpacked
from esafl.wire.messages import result_frame_size, submit_frame_size

PLAIN_BYTES_PER_GRADIENT = 8


def traffic(length: int, params: SchemeParams) -> TrafficFigures:
    count = ciphertext_count(length, params)
    return TrafficFigures(
        packed=params.slots_T > 2,
        slots_T=params.slots_T,
        capacity=capacity(params),
        ciphertext_count=count,
        bytes_per_ciphertext=params.ciphertext_bytes,
        uplink_bytes=submit_frame_size(count, params),
        downlink_bytes=result_frame_size(count, params),
    )


def cmd_estimate(
    length: int, params: SchemeParams, profile_name: str = "", shape: str | None = None
) -> BenchReport:
    """Packed and unpacked traffic for a gradient vector of ``length`` reals."""
    if length < 0:
        raise ParameterError("L >= 0", f"L={length}")
    return BenchReport(
        profile=profile_name,
        shape=shape,
        length=length,
        num_clients=params.num_clients,
        log_q0=params.log_q0,
        plain_bytes=PLAIN_BYTES_PER_GRADIENT * length,
        packed=traffic(length, params),
        unpacked=traffic(length, unpacked(params)),
    )


def format_report(report: BenchReport) -> str:
    """Human-readable summary in MiB."""
    mib = 1024 * 1024
    lines = [
        f"profile={report.profile or '-'} shape={report.shape or '-'} L={report.length} "
        f"N={report.num_clients} log_q0={report.log_q0}",
        f"  plain traffic      {report.plain_bytes / mib:10.2f} MiB",
    ]
    for figures in (report.packed, report.unpacked):
        if figures is None:
            continue
        label = "packed" if figures.packed else "unpacked"
        lines.append(
            f"  {label:<9} T={figures.slots_T:<3} #ct={figures.ciphertext_count:<5} "
            f"per-ct={figures.bytes_per_ciphertext / mib:.3f} MiB "
            f"up={figures.uplink_bytes / mib:.2f} MiB down={figures.downlink_bytes / mib:.2f} MiB"
        )
    if report.measured is not None:
        label = "packed" if report.measured.packed else "unpacked"
        lines.append(
            f"  measured  {label} T={report.measured.slots_T} "
            f"#ct={report.measured.ciphertext_count} up={report.measured.uplink_bytes} B"
        )
    if report.error is not None:
        lines.append(
            f"  |error| mean={report.error.mean:.3e} max={report.error.max:.3e} "
            f"(bound {report.error.bound:.3e})"
        )
    for name, quantiles in (
        ("encrypt", report.encrypt_ms),
        ("aggregate", report.aggregate_ms),
        ("decrypt", report.decrypt_ms),
    ):
        if quantiles is not None:
            lines.append(
                f"  {name:<9} p50={quantiles.p50:.1f} ms p90={quantiles.p90:.1f} ms "
                f"max={quantiles.max:.1f} ms"
            )
    return "\n".join(lines)
