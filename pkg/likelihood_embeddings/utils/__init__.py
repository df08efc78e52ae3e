"""Utility functions and helpers"""

from .batch_utils import BatchProcessor, BatchRunResult
from .file_utils import (
    RunManifest,
    atomic_write_text,
    file_checksum,
    format_value,
    load_json,
    write_csv,
    write_json,
    write_manifest,
)
from .rng import derive_seed, make_rng

__all__ = [
    "BatchProcessor",
    "BatchRunResult",
    "RunManifest",
    "atomic_write_text",
    "file_checksum",
    "format_value",
    "load_json",
    "write_csv",
    "write_json",
    "write_manifest",
    "derive_seed",
    "make_rng",
]
