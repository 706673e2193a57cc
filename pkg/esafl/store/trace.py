"""CSV output for training traces and benchmark reports."""

from __future__ import annotations

import csv
import logging
from pathlib import Path

from esafl.models.bench import BenchReport
from esafl.models.training import TrainingTrace

logger = logging.getLogger(__name__)

TRACE_COLUMNS = [
    "round",
    "loss_plain",
    "loss_enc",
    "max_model_diff",
    "uplink_bytes",
    "downlink_bytes",
    "wall_ms_encrypt",
    "wall_ms_decrypt",
    "wall_ms_aggregate",
]

BENCH_COLUMNS = [
    "rep",
    "packed",
    "ciphertexts",
    "encrypt_ms",
    "aggregate_ms",
    "decrypt_ms",
    "error_mean",
    "error_max",
]


def write_trace(trace: TrainingTrace, path: Path) -> Path:
    """One row per completed round."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=TRACE_COLUMNS)
        writer.writeheader()
        for row in trace.rounds:
            writer.writerow(row.model_dump(include=set(TRACE_COLUMNS)))
    logger.info(f"Wrote trace of {trace.completed_rounds} rounds to {path}")
    return path


def read_trace_rows(path: Path) -> list[dict[str, str]]:
    with path.open(newline="", encoding="utf-8") as handle:
        return list(csv.DictReader(handle))


def write_loss_curve(trace: TrainingTrace, path: Path) -> Path:
    """Whitespace-separated columns (round, loss_plain, loss_enc) for gnuplot."""
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["# round loss_plain loss_enc"]
    lines += [f"{r.round} {r.loss_plain:.9e} {r.loss_enc:.9e}" for r in trace.rounds]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_bench(report: BenchReport, path: Path) -> Path:
    """Timing and decode-error rows of a benchmark run."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=BENCH_COLUMNS)
        writer.writeheader()
        measured = report.measured or report.packed
        for row in report.timings:
            writer.writerow({
                **row.model_dump(),
                "packed": int(measured.packed),
                "ciphertexts": measured.ciphertext_count,
            })
    logger.info(f"Wrote {len(report.timings)} benchmark rows to {path}")
    return path
