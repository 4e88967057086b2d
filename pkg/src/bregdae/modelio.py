"""Versioned on-disk container for model artifacts.

Layout: an ascii magic line `bregdae <kind> v1`, one JSON metadata line, then
the raw little-endian float64 bytes of each array named in meta["arrays"]
(C order, concatenated in listed order). Writing is deterministic, so a
write -> read -> write cycle is byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

_VERSION = 1


class FormatError(ValueError):
    """A model file is corrupt or of an unexpected kind."""


def write_artifact(
    path: str | Path,
    kind: str,
    meta: dict,
    arrays: dict[str, np.ndarray],
) -> None:
    meta = dict(meta)
    meta["arrays"] = [[name, list(a.shape)] for name, a in arrays.items()]
    with open(path, "wb") as fh:
        fh.write(f"bregdae {kind} v{_VERSION}\n".encode("ascii"))
        fh.write(json.dumps(meta, sort_keys=True).encode("ascii") + b"\n")
        for a in arrays.values():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def read_artifact(path: str | Path, kind: str) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        magic = fh.readline().decode("ascii", errors="replace").rstrip("\n")
        expected = f"bregdae {kind} v{_VERSION}"
        if magic != expected:
            raise FormatError(f"{path}: expected header {expected!r}, got {magic!r}")
        try:
            meta = json.loads(fh.readline().decode("ascii"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"{path}: unreadable metadata line") from exc
        arrays: dict[str, np.ndarray] = {}
        for name, shape in meta.pop("arrays"):
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise FormatError(f"{path}: truncated array {name!r}")
            arrays[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
        if fh.read(1):
            raise FormatError(f"{path}: trailing bytes after final array")
    return meta, arrays
