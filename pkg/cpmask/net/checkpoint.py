"""
Checkpoint container
    b"CPMK" | uint32 LE header length | UTF-8 JSON header | float32 LE blobs in header order
"""
import json
import os
import struct

import numpy as np

from collections import OrderedDict
from typing import (
    Any,
    Dict,
    Mapping,
    Tuple
)

from ..exceptions import CheckpointError
from ..utils import default_encode

MAGIC = b"CPMK"
FORMAT_VERSION = 1
_LEN = struct.Struct("<I")
_DTYPE = np.dtype("<f4")


def dumps_container(header: Mapping[str, Any], tables: Mapping[str, Mapping[str, np.ndarray]]) -> bytes:
    """
    Serialize a header and named float arrays
    :param header: JSON-encodable metadata, format version is added
    :param tables: table name (e.g. "params") -> ordered name -> array
    :return: container bytes
    """
    head = dict(header)
    head["format_version"] = FORMAT_VERSION
    blobs = []
    offset = 0
    for table, arrays in tables.items():
        entries = []
        for name, arr in arrays.items():
            data = np.asarray(arr, dtype=_DTYPE).copy(order="C")
            entries.append({"name": name, "shape": list(data.shape), "offset": offset, "count": int(data.size)})
            blobs.append(data.tobytes())
            offset += data.nbytes
        head[table] = entries
    raw = json.dumps(head, default=default_encode, sort_keys=True).encode("utf-8")
    return MAGIC + _LEN.pack(len(raw)) + raw + b"".join(blobs)


def loads_container(data: bytes, tables: Tuple[str, ...] = ("params", )) -> Tuple[Dict[str, Any], Dict[str, "OrderedDict[str, np.ndarray]"]]:
    """
    Parse container bytes
    :param data: container bytes
    :param tables: header tables that index blobs
    :return: header, table name -> name -> array
    :raise CheckpointError: bad magic, version mismatch, truncated header or blob
    """
    if data[:4] != MAGIC:
        raise CheckpointError("not a checkpoint - bad magic")
    if len(data) < 4 + _LEN.size:
        raise CheckpointError("corrupt checkpoint - truncated header")
    (size, ) = _LEN.unpack_from(data, 4)
    start = 4 + _LEN.size
    if start + size > len(data):
        raise CheckpointError("corrupt checkpoint - truncated header")
    try:
        header = json.loads(data[start:start + size].decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as e:
        raise CheckpointError(f"corrupt checkpoint header - {e}")

    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}, expected {FORMAT_VERSION}")

    body = memoryview(data)[start + size:]
    out = {}
    for table in tables:
        arrays = OrderedDict()
        for entry in header.get(table, []):
            begin = entry["offset"]
            end = begin + entry["count"] * _DTYPE.itemsize
            if end > len(body):
                raise CheckpointError(f"corrupt checkpoint - blob '{entry['name']}' is truncated")
            arr = np.frombuffer(body[begin:end], dtype=_DTYPE).astype(np.float32)
            if int(np.prod(entry["shape"], dtype=np.int64)) != entry["count"]:
                raise CheckpointError(f"corrupt checkpoint - blob '{entry['name']}' shape {entry['shape']} != count {entry['count']}")
            arrays[entry["name"]] = arr.reshape(entry["shape"])
        out[table] = arrays
    return header, out


def dump_container(path: str, header: Mapping[str, Any], tables: Mapping[str, Mapping[str, np.ndarray]]) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as f:
        f.write(dumps_container(header, tables))
    os.replace(tmp, path)


def load_container(path: str, tables: Tuple[str, ...] = ("params", )):
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path} - {e}")
    return loads_container(data, tables)
