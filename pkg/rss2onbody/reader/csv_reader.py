import csv
import io
import math
from pathlib import Path
from typing import BinaryIO, Optional, Union

import numpy as np

from ..ban_synth import MIN_DURATION_S, RssTrace
from ..destination import Destination, as_destination
from ..errors import TraceParseError, TraceTooShortError
from ..labels import DeviceLabel, MotionLabel
from .reader import TraceReader

CSV_HEADER = ("t_s", "rss_dbm")
TARGET_RATE_HZ = 500.0
_SPACING_TOLERANCE_S = 1e-9


def _read_rows(text: str) -> tuple[np.ndarray, np.ndarray]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise TraceParseError("empty file, expected header t_s,rss_dbm", 1)
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise TraceParseError(f"expected header t_s,rss_dbm, got {','.join(header)}", 1)
    times: list[float] = []
    values: list[float] = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise TraceParseError(f"expected 2 columns, got {len(row)}", line)
        try:
            t, v = float(row[0]), float(row[1])
        except ValueError:
            raise TraceParseError(f"cannot parse row {row!r} as numbers", line)
        if not (math.isfinite(t) and math.isfinite(v)):
            raise TraceParseError("non-finite value", line)
        if times and t <= times[-1]:
            raise TraceParseError(
                f"timestamp {t} is not after the previous timestamp {times[-1]}", line
            )
        times.append(t)
        values.append(v)
    return np.asarray(times), np.asarray(values)


def ingest_csv(
    source: Union[bytes, BinaryIO, Destination, Path],
    link: DeviceLabel,
    motion: MotionLabel,
    *,
    source_name: Optional[str] = None,
) -> RssTrace:
    """Reads a `t_s,rss_dbm` trace. Non-uniform input is resampled to 500 Hz by linear interpolation"""
    if isinstance(source, bytes):
        raw = source
    elif isinstance(source, (Destination, Path)):
        dest = as_destination(source).require("Trace file")
        raw = dest.read_bytes()
        source_name = source_name or str(dest)
    else:
        raw = source.read()
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError as e:
        line = raw[: e.start].count(b"\n") + 1
        raise TraceParseError(f"invalid UTF-8 at byte {e.start}", line) from e
    times, values = _read_rows(text)
    step = 1.0 / TARGET_RATE_HZ
    if times.size < 2:
        raise TraceTooShortError(
            f"Trace has {times.size} rows, needs at least {MIN_DURATION_S} s of data"
        )
    diffs = np.diff(times)
    if np.all(np.abs(diffs - step) <= _SPACING_TOLERANCE_S):
        samples = values
    else:
        # every row stands for one sampling interval
        duration = times[-1] - times[0] + float(np.median(diffs))
        n_out = int(round(duration * TARGET_RATE_HZ))
        grid = times[0] + np.arange(n_out) * step
        samples = np.interp(grid, times, values)
    if samples.size < int(round(MIN_DURATION_S * TARGET_RATE_HZ)):
        raise TraceTooShortError(
            f"Trace holds {samples.size / TARGET_RATE_HZ:.3f} s of data, needs at least {MIN_DURATION_S} s"
        )
    return RssTrace(
        samples=np.array(samples, dtype=np.float64),
        sample_rate=TARGET_RATE_HZ,
        link=link,
        motion=motion,
        source=source_name,
    )


def trace_to_csv(trace: RssTrace) -> str:
    lines = ["t_s,rss_dbm"]
    for k, v in enumerate(trace.samples.tolist()):
        lines.append(f"{k / trace.sample_rate!r},{v!r}")
    return "\n".join(lines) + "\n"


def write_trace_csv(trace: RssTrace, target: Union[Destination, Path]):
    as_destination(target).upload_str(trace_to_csv(trace))


class CsvTraceReader(TraceReader):
    @property
    def file_suffix(self) -> str:
        return ".csv"

    def read_trace(
        self, source: Destination, link: DeviceLabel, motion: MotionLabel
    ) -> RssTrace:
        return ingest_csv(source, link, motion)

    def write_trace(self, trace: RssTrace, target: Destination):
        write_trace_csv(trace, target)
