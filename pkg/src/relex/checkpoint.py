"""Named-tensor container: binary checkpoint format for model state.

Layout: 4-byte magic, little-endian uint32 header length, UTF-8 JSON header,
then the raw payload. The header carries a version field and one entry per
item with name, kind, shape and byte extent. Tensor payloads are raw
little-endian values in the precision they were trained in; ``json`` entries
hold small metadata blobs (config, vocabulary, class names).

Serialization is canonical (sorted JSON keys, fixed separators, insertion
order of entries), so identical state produces identical bytes.
"""

from __future__ import annotations

import json

import numpy as np

MAGIC = b"NTC1"
VERSION = 1

_KIND_TO_DTYPE = {"f32": "<f4", "f64": "<f8"}
_DTYPE_TO_KIND = {np.dtype(np.float32): "f32", np.dtype(np.float64): "f64"}


class CheckpointError(Exception):
    """Raised for malformed containers or state that does not fit the model."""


def save(path, entries: dict) -> None:
    """Write arrays and JSON-able metadata to ``path``.

    ``entries`` maps names to numpy float arrays or, for names starting with
    ``meta/``, to any JSON-serializable object.
    """
    header_entries = []
    payload = bytearray()
    for name, value in entries.items():
        if name.startswith("meta/"):
            blob = json.dumps(value, sort_keys=True, separators=(",", ":")).encode("utf-8")
            kind, shape = "json", []
        else:
            arr = np.asarray(value)
            if arr.dtype not in _DTYPE_TO_KIND:
                raise CheckpointError(f"unsupported dtype {arr.dtype} for entry {name!r}")
            kind = _DTYPE_TO_KIND[arr.dtype]
            shape = list(arr.shape)
            blob = np.ascontiguousarray(arr).astype(_KIND_TO_DTYPE[kind]).tobytes()
        header_entries.append(
            {"name": name, "kind": kind, "shape": shape, "offset": len(payload), "size": len(blob)}
        )
        payload.extend(blob)

    header = json.dumps(
        {"version": VERSION, "entries": header_entries},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")

    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.uint32(len(header)).tobytes())
        fh.write(header)
        fh.write(payload)


def load(path) -> dict:
    """Read a container back into a dict of numpy arrays / metadata objects."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint container (bad magic)")
    header_len = int(np.frombuffer(raw[4:8], dtype="<u4")[0])
    try:
        header = json.loads(raw[8 : 8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header ({exc})") from exc
    if header.get("version") != VERSION:
        raise CheckpointError(f"{path}: unsupported container version {header.get('version')}")

    payload = raw[8 + header_len :]
    out = {}
    for entry in header["entries"]:
        blob = payload[entry["offset"] : entry["offset"] + entry["size"]]
        if len(blob) != entry["size"]:
            raise CheckpointError(f"{path}: truncated payload for entry {entry['name']!r}")
        if entry["kind"] == "json":
            out[entry["name"]] = json.loads(blob.decode("utf-8"))
        else:
            dtype = _KIND_TO_DTYPE.get(entry["kind"])
            if dtype is None:
                raise CheckpointError(f"{path}: unknown entry kind {entry['kind']!r}")
            arr = np.frombuffer(blob, dtype=dtype).reshape(entry["shape"])
            out[entry["name"]] = arr.astype(dtype[1:]).copy()
    return out
