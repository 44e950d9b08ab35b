"""Binary checkpoint format: named parameter map plus a JSON metadata blob.

Layout, all little-endian:
    magic "MVSOLVER-CKPT-1\\n"
    u32 metadata length, then that many bytes of UTF-8 JSON
    u32 entry count
    per entry: u16 name length, name bytes, u8 ndim, u32 per dim, f64 data
"""

import json
import struct

import numpy as np

MAGIC = b"MVSOLVER-CKPT-1\n"


class CheckpointError(ValueError):
    pass


def save(path, params, meta):
    """params: dict name -> Tensor (or ndarray); meta: JSON-serializable dict."""
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(params)))
        for name in sorted(params):
            arr = params[name]
            arr = np.asarray(getattr(arr, "data", arr), dtype="<f8")
            enc = name.encode("utf-8")
            fh.write(struct.pack("<H", len(enc)))
            fh.write(enc)
            fh.write(struct.pack("<B", arr.ndim))
            fh.write(struct.pack("<%dI" % arr.ndim, *arr.shape))
            fh.write(arr.tobytes())


def load(path):
    """Returns (params: dict name -> ndarray, meta: dict)."""
    with open(path, "rb") as fh:
        if fh.read(len(MAGIC)) != MAGIC:
            raise CheckpointError("%s: not a checkpoint file (bad magic)" % path)
        (mlen,) = struct.unpack("<I", fh.read(4))
        meta = json.loads(fh.read(mlen).decode("utf-8"))
        (count,) = struct.unpack("<I", fh.read(4))
        params = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", fh.read(2))
            name = fh.read(nlen).decode("utf-8")
            (ndim,) = struct.unpack("<B", fh.read(1))
            shape = struct.unpack("<%dI" % ndim, fh.read(4 * ndim))
            n = 1
            for s in shape:
                n *= s
            buf = fh.read(8 * n)
            if len(buf) != 8 * n:
                raise CheckpointError("%s: truncated entry %r" % (path, name))
            params[name] = np.frombuffer(buf, dtype="<f8").reshape(shape).copy()
        return params, meta
