"""Run manifests and deterministic serialization helpers.

Every CLI output directory gets a RunManifest tying the resolved
configuration (by hash) and master seed to the files produced. Floats
are written with 17 significant digits so reruns are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

ARTIFACT_VERSION = "1.0.0"

MANIFEST_FILENAME = "manifest.json"


def _format_float(x: float) -> str:
    if x != x or x in (float("inf"), float("-inf")):
        raise ValueError("non-finite value in serialized output")
    return format(x, ".17g")


def _encode(obj, indent: int) -> str:
    pad = " " * indent
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, float):
        return _format_float(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}  {json.dumps(str(k), ensure_ascii=False)}: '
            f"{_encode(v, indent + 2)}"
            for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not len(obj):
            return "[]"
        items = [f"{pad}  {_encode(v, indent + 2)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if hasattr(obj, "item"):
        return _encode(obj.item(), indent)
    if hasattr(obj, "value") and not isinstance(obj, type):
        return _encode(obj.value, indent)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """JSON text with sorted keys, 17-significant-digit floats, LF ending."""
    return _encode(obj, 0) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8", newline="\n")


def write_csv(path, header, rows) -> None:
    """Delimited text with 17-significant-digit floats and LF newlines."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if hasattr(v, "item"):
                v = v.item()
            if isinstance(v, bool):
                cells.append(str(v).lower())
            elif isinstance(v, float):
                cells.append(_format_float(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def config_hash(config: dict) -> str:
    """Stable sha256 digest of the fully resolved configuration."""
    return hashlib.sha256(dumps(config).encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    subcommand: str
    config_hash: str
    master_seed: int
    artifact_version: str = ARTIFACT_VERSION
    timing: float = 0.0
    outputs: list[str] = field(default_factory=list)

    def write(self, out_dir) -> Path:
        path = Path(out_dir) / MANIFEST_FILENAME
        write_json(path, asdict(self))
        return path

    @staticmethod
    def read(out_dir) -> "RunManifest":
        raw = json.loads((Path(out_dir) / MANIFEST_FILENAME).read_text("utf-8"))
        return RunManifest(**raw)
