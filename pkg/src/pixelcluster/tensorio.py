"""Binary tensor and checkpoint serialization.

Tensor format: magic ``TNSR``, version u32, rank u32, extents as u64 list,
payload as little-endian float64 in row-major order. All integers are
little-endian.

Checkpoint format: magic ``CKPT``, version u32, a u32-length-prefixed JSON
config echo in the header, then a count-prefixed sequence of entries
(name length u32, UTF-8 name, tensor in the format above).
"""

import io
import json
import struct

import numpy as np

from .errors import FormatError, TruncationError

TENSOR_MAGIC = b"TNSR"
CHECKPOINT_MAGIC = b"CKPT"
FORMAT_VERSION = 1


def _read_exact(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise TruncationError(f"unexpected end of data while reading {what}")
    return buf


def write_tensor(fh, array: np.ndarray) -> None:
    arr = np.ascontiguousarray(array, dtype=np.float64)
    fh.write(TENSOR_MAGIC)
    fh.write(struct.pack("<II", FORMAT_VERSION, arr.ndim))
    fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    fh.write(arr.astype("<f8").tobytes())


def read_tensor(fh) -> np.ndarray:
    magic = _read_exact(fh, 4, "tensor magic")
    if magic != TENSOR_MAGIC:
        raise FormatError(f"bad tensor magic {magic!r}")
    version, rank = struct.unpack("<II", _read_exact(fh, 8, "tensor header"))
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported tensor format version {version}")
    shape = struct.unpack(f"<{rank}Q", _read_exact(fh, 8 * rank, "tensor extents"))
    count = 1
    for s in shape:
        count *= s
    payload = _read_exact(fh, 8 * count, "tensor payload")
    return np.frombuffer(payload, dtype="<f8").reshape(shape).copy()


def save_tensor(path, array: np.ndarray) -> None:
    with open(path, "wb") as fh:
        write_tensor(fh, array)


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return read_tensor(fh)


def save_checkpoint(path, tensors: dict[str, np.ndarray], config: dict | None = None) -> None:
    """Write named tensors plus a JSON config echo in the header."""
    blob = json.dumps(config or {}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            nb = name.encode("utf-8")
            fh.write(struct.pack("<I", len(nb)))
            fh.write(nb)
            write_tensor(fh, arr)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read back (tensors, config) from `save_checkpoint` output."""
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "checkpoint magic")
        if magic != CHECKPOINT_MAGIC:
            raise FormatError(f"bad checkpoint magic {magic!r}")
        version, json_len = struct.unpack("<II", _read_exact(fh, 8, "checkpoint header"))
        if version != FORMAT_VERSION:
            raise FormatError(f"unsupported checkpoint format version {version}")
        config = json.loads(_read_exact(fh, json_len, "checkpoint config").decode("utf-8"))
        (count,) = struct.unpack("<I", _read_exact(fh, 4, "tensor count"))
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", _read_exact(fh, 4, "name length"))
            name = _read_exact(fh, name_len, "tensor name").decode("utf-8")
            tensors[name] = read_tensor(fh)
    return tensors, config


def tensor_bytes(array: np.ndarray) -> bytes:
    buf = io.BytesIO()
    write_tensor(buf, array)
    return buf.getvalue()
