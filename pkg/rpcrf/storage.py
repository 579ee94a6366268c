"""
File output helpers: atomic writes, JSON / JSONL datasets and hashing
"""
import gzip
import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple, Union

from .exceptions import DataFormatError

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def atomic_write_bytes(path: PathLike, data: bytes):
    """Write through a temp file in the target directory, then rename over the target"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, temp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.unlink(temp_name)
        raise
    logger.debug(f"Wrote {len(data)} bytes to {path}")


def atomic_write_text(path: PathLike, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def dumps_json(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_json(path: PathLike, data):
    atomic_write_text(path, dumps_json(data))


def read_json(path: PathLike) -> Dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as e:
        raise DataFormatError(f"{path}: invalid JSON ({e})") from e


def write_jsonl(path: PathLike, records: Iterable[Dict], header: Optional[Dict] = None):
    """
    Write one JSON object per line; a `.gz` suffix gzips the output

    The gzip stream carries no timestamp or file name, so equal records give
    equal bytes.
    """
    lines = []
    if header is not None:
        lines.append(json.dumps({"header": header}, sort_keys=True))
    lines.extend(json.dumps(record, sort_keys=True) for record in records)
    data = ("\n".join(lines) + "\n").encode("utf-8")
    if str(path).endswith(".gz"):
        data = gzip.compress(data, mtime=0)
    atomic_write_bytes(path, data)


def read_jsonl(path: PathLike) -> Tuple[Optional[Dict], List[Dict]]:
    """Read a JSONL file, returning (header or None, records)"""
    opener = gzip.open if str(path).endswith(".gz") else open
    header = None
    records = []
    with opener(path, "rt", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataFormatError(f"{path}:{line_number}: invalid JSON ({e})") from e
            if not isinstance(record, dict):
                raise DataFormatError(f"{path}:{line_number}: expected a JSON object")
            if line_number == 1 and "header" in record:
                header = record["header"]
                continue
            records.append(record)
    return header, records


def file_sha256(path: PathLike) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()
