import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Iterator

from topology_designer.app.core.errors import InputError
from topology_designer.app.core.logger import logger


def derive_seed(root: int, label: str) -> int:
    """Stable per-component seed; independent of PYTHONHASHSEED."""
    digest = hashlib.blake2b(f"{root}:{label}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") & 0x7FFF_FFFF_FFFF_FFFF


def ensure_parent(path: str) -> Path:
    target = Path(path)
    if target.parent and not target.parent.exists():
        os.makedirs(target.parent, exist_ok=True)
    return target


def atomic_write_bytes(path: str, payload: bytes) -> Path:
    """Write to a temp file in the target directory, then rename over the target."""
    target = ensure_parent(path)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent or ".")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise
    return target


def atomic_write_text(path: str, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def dumps_stable(payload: Any, indent: int = 2) -> str:
    return json.dumps(payload, indent=indent, ensure_ascii=False, sort_keys=False) + "\n"


def write_json(path: str, payload: Any) -> Path:
    return atomic_write_text(path, dumps_stable(payload))


def read_json(path: str) -> Any:
    source = Path(path)
    if not source.exists():
        raise InputError(f"file not found: {path}")
    try:
        with open(source, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: invalid JSON ({e})") from e


def write_jsonl(path: str, records: Iterable[dict]) -> int:
    lines = [json.dumps(record, ensure_ascii=False, separators=(",", ":")) for record in records]
    atomic_write_text(path, "".join(line + "\n" for line in lines))
    logger.info(f"Wrote {len(lines)} records to {path}")
    return len(lines)


def read_jsonl(path: str) -> Iterator[dict]:
    source = Path(path)
    if not source.exists():
        raise InputError(f"file not found: {path}")
    with open(source, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as e:
                raise InputError(f"{path}:{line_no}: invalid JSON ({e})") from e
