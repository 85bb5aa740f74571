"""AVT1 binary tensor files.

Layout: magic ``41 56 54 31`` ("AVT1"), u8 dtype code (1=float32, 2=float64,
3=uint8), u8 rank, rank x u32 little-endian dims, then the row-major
little-endian payload. Used for every tensor dump and checkpoint in the
pipeline.
"""

import struct

import numpy as np

MAGIC = b"AVT1"

_DTYPE_CODES = {1: np.dtype("<f4"), 2: np.dtype("<f8"), 3: np.dtype("u1")}
_CODE_FOR = {np.dtype("float32"): 1, np.dtype("float64"): 2, np.dtype("uint8"): 3}


class AVT1Error(ValueError):
    pass


def write_avt1(path, array):
    """Write a numpy array (float32/float64/uint8) as an AVT1 file."""
    arr = np.asarray(array)
    if not arr.flags["C_CONTIGUOUS"]:
        arr = np.ascontiguousarray(arr)  # promotes 0-d, so only when needed
    if arr.dtype not in _CODE_FOR:
        raise AVT1Error(f"unsupported dtype {arr.dtype} (want float32/float64/uint8)")
    if arr.ndim > 255:
        raise AVT1Error("rank exceeds 255")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<BB", _CODE_FOR[arr.dtype], arr.ndim))
        f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        f.write(arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes())


def read_avt1(path):
    """Read an AVT1 file back into a numpy array."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise AVT1Error(f"{path}: bad magic {magic!r}")
        code, rank = struct.unpack("<BB", f.read(2))
        if code not in _DTYPE_CODES:
            raise AVT1Error(f"{path}: unknown dtype code {code}")
        dims = struct.unpack(f"<{rank}I", f.read(4 * rank)) if rank else ()
        dtype = _DTYPE_CODES[code]
        count = int(np.prod(dims, dtype=np.int64)) if rank else 1
        payload = f.read(count * dtype.itemsize)
        if len(payload) != count * dtype.itemsize:
            raise AVT1Error(f"{path}: truncated payload")
        arr = np.frombuffer(payload, dtype=dtype).reshape(dims)
    return arr.astype(arr.dtype.newbyteorder("="), copy=True)
