"""Binary checkpoint format (``.ednc``).

Layout, all integers little-endian::

    magic      4 bytes   b"EDNC"
    version    u32       1
    meta_len   u32       byte length of the metadata block
    metadata   utf-8     JSON object, keys sorted: architecture + training info
    n_tensors  u32
    table      n_tensors x (u16 name_len, name utf-8, u8 ndim, ndim x u32 dim)
    payload    float32 little-endian, tensors concatenated in table order

The tensor table must match the shapes implied by the architecture stored in
the metadata; the payload must be exactly as long as the table says.
"""

import json
import struct

import numpy as np

from .exceptions import FormatError
from .models import LayerSpec, ModelGraph

MAGIC = b"EDNC"
VERSION = 1


def _meta_for(model, training):
    return {
        "architecture": {
            "specs": [s.to_dict() for s in model.specs],
            "input_shape": list(model.input_shape),
            "widths": list(model.widths),
        },
        "model": {k: v for k, v in model.meta.items()},
        "training": dict(training or {}),
    }


def dumps(model, training=None):
    """Serialises ``model`` (and optional training metadata) to bytes."""
    meta = json.dumps(_meta_for(model, training), sort_keys=True, separators=(",", ":")).encode()
    parts = [MAGIC, struct.pack("<II", VERSION, len(meta)), meta]
    named = list(model.named_params())
    parts.append(struct.pack("<I", len(named)))
    for name, arr in named:
        raw = name.encode()
        parts.append(struct.pack("<H", len(raw)) + raw + struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
    for _, arr in named:
        parts.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return b"".join(parts)


def save_checkpoint(model, path, training=None):
    with open(path, "wb") as f:
        f.write(dumps(model, training))


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n, field):
        if self.pos + n > len(self.buf):
            raise FormatError(f"checkpoint truncated while reading {field} at byte {self.pos}", field)
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt, field):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), field))


def loads(buf):
    """Inverse of :func:`dumps`. Returns ``(model, training_metadata)``."""
    r = _Reader(buf)
    if r.take(4, "magic") != MAGIC:
        raise FormatError("bad magic, not an EDNC checkpoint", "magic")
    (version,) = r.unpack("<I", "version")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", "version")
    (meta_len,) = r.unpack("<I", "meta_len")
    try:
        meta = json.loads(r.take(meta_len, "metadata").decode())
        arch = meta["architecture"]
        model = ModelGraph([LayerSpec.from_dict(d) for d in arch["specs"]],
                           tuple(arch["input_shape"]), tuple(arch["widths"]),
                           meta=dict(meta.get("model", {})))
    except FormatError:
        raise
    except Exception as exc:  # malformed JSON or architecture
        raise FormatError(f"unreadable metadata block: {exc}", "metadata") from exc

    expected = []
    for name, w, b in model.param_shapes():
        expected += [(f"{name}.weight", w), (f"{name}.bias", b)]
    (n_tensors,) = r.unpack("<I", "n_tensors")
    if n_tensors != len(expected):
        raise FormatError(f"shape table lists {n_tensors} tensors, architecture needs {len(expected)}",
                          "n_tensors")
    for exp_name, exp_shape in expected:
        (name_len,) = r.unpack("<H", "shape_table")
        name = r.take(name_len, "shape_table").decode(errors="replace")
        (ndim,) = r.unpack("<B", "shape_table")
        shape = r.unpack(f"<{ndim}I", "shape_table")
        if name != exp_name or tuple(shape) != tuple(exp_shape):
            raise FormatError(f"shape table entry {name}{list(shape)} does not match "
                              f"{exp_name}{list(exp_shape)}", "shape_table")

    params = []
    for (_, w_shape, b_shape) in model.param_shapes():
        p = {}
        for key, shape in (("weight", w_shape), ("bias", b_shape)):
            count = int(np.prod(shape))
            raw = r.take(4 * count, "payload")
            p[key] = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(shape)
        params.append(p)
    if r.pos != len(buf):
        raise FormatError(f"{len(buf) - r.pos} trailing bytes after payload", "payload")
    if not all(np.all(np.isfinite(v)) for p in params for v in p.values()):
        raise FormatError("payload contains non-finite values", "payload")
    model.params = params
    return model, meta.get("training", {})


def load_checkpoint(path, with_metadata=False):
    with open(path, "rb") as f:
        model, training = loads(f.read())
    return (model, training) if with_metadata else model
