"""Self-describing binary container: a plain-text header of key=value lines
followed by a length-prefixed table of named little-endian arrays.

Layout:

    padenet-container 1\n          format name and version
    key=value\n ...                header block (config)
    ---\n                          header terminator
    per array: u32 name length, name bytes (utf-8), u8 dtype code,
               u8 ndim, u64 x ndim extents, raw little-endian payload

dtype codes: 0 = float64, 1 = uint8, 2 = int64. Model checkpoints and data
shards both use this container; round trips are bit-exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import CheckpointError

FORMAT_NAME = "padenet-container"
FORMAT_VERSION = 1

_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("|u1"), 2: np.dtype("<i8")}
_CODES = {np.dtype("float64"): 0, np.dtype("uint8"): 1, np.dtype("int64"): 2}


def write_container(path, header: dict, arrays: list[tuple[str, np.ndarray]]) -> None:
    """Writes header keys in insertion order, then the arrays in list order."""
    path = Path(path)
    lines = [f"{FORMAT_NAME} {FORMAT_VERSION}"]
    for key, value in header.items():
        key, value = str(key), str(value)
        if "=" in key or "\n" in key or "\n" in value:
            raise ValueError(f"illegal header entry {key!r}={value!r}")
        lines.append(f"{key}={value}")
    lines.append("---")
    blob = bytearray(("\n".join(lines) + "\n").encode("utf-8"))
    for name, arr in arrays:
        arr = np.asanyarray(arr)
        code = _CODES.get(arr.dtype.newbyteorder("="))
        if code is None:
            raise ValueError(f"unsupported array dtype {arr.dtype} for {name!r}")
        name_b = name.encode("utf-8")
        blob += struct.pack("<I", len(name_b)) + name_b
        blob += struct.pack("<BB", code, arr.ndim)
        blob += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        blob += np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes()
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(bytes(blob))
    tmp.replace(path)


def read_container(path) -> tuple[dict, dict]:
    """Returns (header dict, {name: array}). Raises CheckpointError on any
    malformed, truncated, or version-mismatched file."""
    try:
        blob = Path(path).read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read container {path}: {e}") from e

    nl = blob.find(b"\n")
    if nl < 0:
        raise CheckpointError(f"{path}: not a container file (no header)")
    first = blob[:nl].decode("utf-8", errors="replace").split()
    if len(first) != 2 or first[0] != FORMAT_NAME:
        raise CheckpointError(f"{path}: not a {FORMAT_NAME} file")
    if first[1] != str(FORMAT_VERSION):
        raise CheckpointError(
            f"{path}: container version {first[1]} not supported (expected {FORMAT_VERSION})"
        )

    header: dict[str, str] = {}
    pos = nl + 1
    while True:
        nl = blob.find(b"\n", pos)
        if nl < 0:
            raise CheckpointError(f"{path}: header not terminated")
        line = blob[pos:nl].decode("utf-8")
        pos = nl + 1
        if line == "---":
            break
        if "=" not in line:
            raise CheckpointError(f"{path}: malformed header line {line!r}")
        key, value = line.split("=", 1)
        header[key] = value

    arrays: dict[str, np.ndarray] = {}
    n = len(blob)
    while pos < n:
        try:
            (name_len,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            name = blob[pos : pos + name_len].decode("utf-8")
            pos += name_len
            code, ndim = struct.unpack_from("<BB", blob, pos)
            pos += 2
            shape = struct.unpack_from(f"<{ndim}Q", blob, pos)
            pos += 8 * ndim
        except (struct.error, UnicodeDecodeError) as e:
            raise CheckpointError(f"{path}: corrupt array record: {e}") from e
        dtype = _DTYPES.get(code)
        if dtype is None:
            raise CheckpointError(f"{path}: unknown dtype code {code} for {name!r}")
        count = int(np.prod(shape, dtype=np.int64)) if ndim else 1
        nbytes = count * dtype.itemsize
        if pos + nbytes > n:
            raise CheckpointError(f"{path}: truncated payload for array {name!r}")
        arr = np.frombuffer(blob, dtype=dtype, count=count, offset=pos).reshape(shape)
        arrays[name] = arr.copy()
        pos += nbytes
    return header, arrays
