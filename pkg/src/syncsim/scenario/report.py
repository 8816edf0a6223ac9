"""Report assembly and canonical serialization.

A report is a plain JSON-serializable dict; ``canonical_bytes`` renders it
with sorted keys so that equal runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import statistics
from pathlib import Path
from typing import Dict, List

from ..sensors import SampleRecord, stamp_residual_ns
from ..syncproto import OffsetErrorSeries, percentile_nearest_rank


def summary_stats(values: List[int]) -> dict:
    """count / mean / p50 / p95 / max over absolute values."""
    magnitudes = [abs(v) for v in values]
    return {
        "count": len(values),
        "mean_abs_ns": float(statistics.fmean(magnitudes)) if magnitudes else 0.0,
        "p50_abs_ns": float(statistics.median(magnitudes)) if magnitudes else 0.0,
        "p95_abs_ns": percentile_nearest_rank(magnitudes, 0.95),
        "max_abs_ns": max(magnitudes) if magnitudes else 0,
    }


def canonical_bytes(report: dict) -> bytes:
    return (json.dumps(report, sort_keys=True, indent=2) + "\n").encode("utf-8")


def report_sha256(report: dict) -> str:
    return hashlib.sha256(canonical_bytes(report)).hexdigest()


def write_report(report: dict, path) -> None:
    Path(path).write_bytes(canonical_bytes(report))


def write_csv_series(
    out_dir,
    offset_series: Dict[str, OffsetErrorSeries],
    samples: Dict[str, List[SampleRecord]],
    reference_offset_ns: int = 0,
) -> List[str]:
    """Dump per-series CSV files; returns the file names written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for machine, series in sorted(offset_series.items()):
        name = f"{machine}.offset_error.csv"
        with open(out / name, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_ns", "error_ns"])
            writer.writerows(series.samples)
        written.append(name)
    for key, records in sorted(samples.items()):
        name = f"{key.replace('/', '.')}.samples.csv"
        with open(out / name, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["seq", "event_true_ns", "stamped_ns", "location", "compensated", "residual_ns"]
            )
            for r in sorted(records, key=lambda rec: rec.seq):
                residual = (
                    stamp_residual_ns(r, reference_offset_ns)
                    if r.stamped_time is not None else ""
                )
                writer.writerow(
                    [r.seq, r.event_true_time, r.stamped_time, r.stamping_location,
                     int(r.compensated), residual]
                )
        written.append(name)
    return written
