"""File handling utilities"""

import csv
import hashlib
import io
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Sequence, Union

PathLike = Union[str, Path]


def format_value(value: Any) -> str:
    """CSV cell text; floats keep 17 significant digits so files reproduce bit-for-bit"""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, ".17g")
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        # numpy scalar
        return format_value(value.item())
    return str(value)


def atomic_write_text(path: PathLike, text: str) -> Path:
    """
    Write text through a temporary file in the same directory, then rename

    Args:
        path: Destination file
        text: Content to write

    Returns:
        Path of the written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_file = tempfile.NamedTemporaryFile(
        mode="w",
        suffix=".tmp",
        prefix=f".{path.name}.",
        dir=path.parent,
        delete=False,
        encoding="utf-8",
        newline="",
    )
    try:
        with temp_file:
            temp_file.write(text)
        os.replace(temp_file.name, path)
    except Exception:
        # Clean up the temporary file if the write failed
        if os.path.exists(temp_file.name):
            os.unlink(temp_file.name)
        raise
    return path


def write_csv(path: PathLike, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    """Write a comma-separated, LF-terminated CSV with a header row"""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(list(header))
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
        writer.writerow([format_value(v) for v in row])
    return atomic_write_text(path, buffer.getvalue())


def _json_default(value: Any):
    if hasattr(value, "tolist"):
        return value.tolist()
    if hasattr(value, "item"):
        return value.item()
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_json(path: PathLike, data: Any) -> Path:
    """
    Save a JSON document atomically

    Args:
        path: Destination file
        data: JSON-serialisable data (numpy arrays and scalars allowed)

    Returns:
        Path to saved file
    """
    text = json.dumps(data, ensure_ascii=False, indent=2, default=_json_default)
    return atomic_write_text(path, text + "\n")


def load_json(path: PathLike) -> Any:
    """
    Load a JSON document

    Args:
        path: Path to JSON file

    Returns:
        Parsed content
    """
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def file_checksum(path: PathLike) -> str:
    """SHA-256 hex digest of a file"""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(65536), b""):
            digest.update(block)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Record of one experiment run"""

    config: Dict[str, Any]
    toolkit_version: str
    started_at: str
    finished_at: str = ""
    outputs: Dict[str, str] = field(default_factory=dict)
    exit_code: Optional[int] = None

    def add_output(self, path: PathLike, root: Optional[PathLike] = None):
        """Register an emitted file with its checksum"""
        path = Path(path)
        key = str(path.relative_to(root)) if root is not None else path.name
        self.outputs[key] = file_checksum(path)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def write_manifest(manifest: RunManifest, out_dir: PathLike, filename: str = "manifest.json") -> Path:
    return write_json(Path(out_dir) / filename, manifest.to_dict())
