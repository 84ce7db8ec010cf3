"""On-disk formats: binary embedding files, manifests, captions, reports.

Embedding file layout (little-endian):

    bytes 0-3   magic "AEMB"
    bytes 4-7   format version, uint32 (currently 1)
    bytes 8-11  dim, uint32 (> 0)
    bytes 12-   dim float32 values

Total length is exactly 12 + 4*dim bytes. Manifests and caption files are
JSON-lines; metric reports are flat JSON objects.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError, ManifestError
from .scoring import EmbeddingVector

EMBEDDING_MAGIC = b"AEMB"
EMBEDDING_VERSION = 1
_HEADER = struct.Struct("<4sII")


def write_embedding_file(path: str | Path, values: Sequence[float] | np.ndarray) -> None:
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 1 or arr.size == 0:
        raise FormatError("embedding file requires a non-empty 1-D vector")
    payload = _HEADER.pack(EMBEDDING_MAGIC, EMBEDDING_VERSION, arr.size) + arr.tobytes()
    Path(path).write_bytes(payload)


def read_embedding_file(path: str | Path) -> EmbeddingVector:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(data)} bytes)")
    magic, version, dim = _HEADER.unpack_from(data)
    if magic != EMBEDDING_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != EMBEDDING_VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dim == 0:
        raise FormatError(f"{path}: degenerate dim 0")
    expected = _HEADER.size + 4 * dim
    if len(data) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(data)}")
    values = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).astype(np.float64)
    if not np.all(np.isfinite(values)):
        raise FormatError(f"{path}: non-finite values")
    return EmbeddingVector(values)


@dataclass(frozen=True)
class ManifestEntry:
    """One evaluation item: an id, exactly one audio source, and references."""

    id: str
    embedding_file: str | None
    audio_ref: str | None
    references: tuple[str, ...] = ()


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    """Parse a JSON-lines manifest; errors name the offending line number."""
    entries: list[ManifestEntry] = []
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict):
                raise ManifestError(f"{path}:{lineno}: expected a JSON object")
            entry_id = obj.get("id")
            if not isinstance(entry_id, str) or not entry_id:
                raise ManifestError(f"{path}:{lineno}: missing or empty 'id'")
            if entry_id in seen_ids:
                raise ManifestError(f"{path}:{lineno}: duplicate id {entry_id!r}")
            seen_ids.add(entry_id)
            emb = obj.get("embedding_file")
            ref = obj.get("audio")
            if (emb is None) == (ref is None):
                raise ManifestError(
                    f"{path}:{lineno}: exactly one of 'embedding_file' or 'audio' required"
                )
            references = obj.get("references", [])
            if not isinstance(references, list) or any(not isinstance(r, str) for r in references):
                raise ManifestError(f"{path}:{lineno}: 'references' must be a list of strings")
            entries.append(ManifestEntry(entry_id, emb, ref, tuple(references)))
    return entries


def write_manifest(path: str | Path, entries: Iterable[ManifestEntry]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            obj: dict = {"id": e.id}
            if e.embedding_file is not None:
                obj["embedding_file"] = e.embedding_file
            if e.audio_ref is not None:
                obj["audio"] = e.audio_ref
            if e.references:
                obj["references"] = list(e.references)
            fh.write(json.dumps(obj, ensure_ascii=True) + "\n")


def write_captions(path: str | Path, rows: Iterable[dict]) -> None:
    """Caption rows as JSON-lines: {"id", "caption", "stop_reason"}."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(
                json.dumps(
                    {"id": row["id"], "caption": row["caption"], "stop_reason": row["stop_reason"]},
                    ensure_ascii=True,
                )
                + "\n"
            )


def read_captions(path: str | Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if "id" not in obj or "caption" not in obj:
                raise FormatError(f"{path}:{lineno}: caption rows need 'id' and 'caption'")
            rows.append(obj)
    return rows


def write_report_json(path: str | Path, report_dict: dict) -> None:
    Path(path).write_text(json.dumps(report_dict, indent=2, sort_keys=True) + "\n", "utf-8")


def parse_config_text(text: str) -> dict[str, object]:
    """Parse the flat key = value run-config format.

    Values are JSON-decoded when they start with a quote (preserving exact
    whitespace in strings); otherwise ints, floats, and true/false are
    coerced and everything else stays a string.
    """
    out: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"config line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise FormatError(f"config line {lineno}: empty key")
        out[key] = _coerce_config_value(value, lineno)
    return out


def _coerce_config_value(value: str, lineno: int) -> object:
    if value.startswith('"'):
        try:
            decoded = json.loads(value)
        except json.JSONDecodeError as exc:
            raise FormatError(f"config line {lineno}: bad quoted string") from exc
        if not isinstance(decoded, str):
            raise FormatError(f"config line {lineno}: quoted value must be a string")
        return decoded
    lowered = value.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        pass
    return value


def read_config_file(path: str | Path) -> dict[str, object]:
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def write_config_file(path: str | Path, options: dict[str, object]) -> None:
    lines = []
    for key, value in options.items():
        if isinstance(value, bool):
            rendered = "true" if value else "false"
        elif isinstance(value, str):
            rendered = json.dumps(value)
        else:
            rendered = repr(value)
        lines.append(f"{key} = {rendered}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
