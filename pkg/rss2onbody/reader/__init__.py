from .reader import TraceIndex, TraceIndexEntry, TraceReader, read_trace_index
from .csv_reader import CsvTraceReader, ingest_csv, write_trace_csv

__all__ = [
    "TraceReader",
    "TraceIndex",
    "TraceIndexEntry",
    "read_trace_index",
    "CsvTraceReader",
    "ingest_csv",
    "write_trace_csv",
]
