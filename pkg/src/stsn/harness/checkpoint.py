"""Checkpoint files: parameters, ADAM moments, step, and the config they belong to."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ..config import TrainConfig
from ..errors import ConfigMismatchError, FormatError
from ..optim import AdamState

MAGIC = b"STSNCKPT"
VERSION = 1
_HEAD = struct.Struct("<8sH32sQ")
_U32 = struct.Struct("<I")
_U16 = struct.Struct("<H")
_M, _V = "adam.m.", "adam.v."


@dataclass
class Checkpoint:
    config: TrainConfig
    params: dict  # name -> float32 array
    step: int = 0
    optimizer: AdamState | None = None
    extra: dict = field(default_factory=dict)  # small JSON-able facts (best epoch, regime, ...)

    @property
    def config_hash(self):
        return self.config.config_hash()

    def check_compatible(self, config):
        if config.config_hash() != self.config_hash:
            raise ConfigMismatchError(
                f"checkpoint config hash {self.config_hash[:12]} does not match {config.config_hash()[:12]}"
            )


def _tensor_bytes(name, arr):
    raw = name.encode("utf-8")
    arr = np.ascontiguousarray(arr, dtype="<f4")
    head = _U16.pack(len(raw)) + raw + struct.pack("<B", arr.ndim) + b"".join(_U32.pack(d) for d in arr.shape)
    return head + arr.tobytes()


def encode_checkpoint(ckpt):
    tensors = dict(ckpt.params)
    meta = {"config": ckpt.config.to_dict(), "extra": ckpt.extra, "optimizer": None}
    if ckpt.optimizer is not None:
        opt = ckpt.optimizer
        meta["optimizer"] = {"step": opt.step, "beta1": opt.beta1, "beta2": opt.beta2, "eps": opt.eps}
        tensors.update({_M + k: v for k, v in opt.m.items()})
        tensors.update({_V + k: v for k, v in opt.v.items()})
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    parts = [
        _HEAD.pack(MAGIC, VERSION, bytes.fromhex(ckpt.config_hash), ckpt.step),
        _U32.pack(len(blob)),
        blob,
        _U32.pack(len(tensors)),
    ]
    parts.extend(_tensor_bytes(k, v) for k, v in tensors.items())
    return b"".join(parts)


class _Reader:
    def __init__(self, buf):
        self.buf, self.pos = buf, 0

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise FormatError(f"truncated checkpoint while reading {what}")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, st, what):
        return st.unpack(self.take(st.size, what))


def decode_checkpoint(buf, expected=None):
    """Parse checkpoint bytes; with ``expected`` (a TrainConfig) refuse a different architecture."""
    r = _Reader(buf)
    magic, version, digest, step = r.unpack(_HEAD, "header")
    if magic != MAGIC:
        raise FormatError(f"bad checkpoint magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    if expected is not None and digest.hex() != expected.config_hash():
        raise ConfigMismatchError(
            f"checkpoint config hash {digest.hex()[:12]} does not match {expected.config_hash()[:12]}"
        )
    (n,) = r.unpack(_U32, "config length")
    meta = json.loads(r.take(n, "config").decode("utf-8"))
    config = TrainConfig.from_dict(meta["config"])
    if config.config_hash() != digest.hex():
        raise FormatError("stored config does not hash to the header digest")
    (count,) = r.unpack(_U32, "tensor count")
    tensors = {}
    for _ in range(count):
        (ln,) = r.unpack(_U16, "name length")
        name = r.take(ln, "name").decode("utf-8")
        (ndim,) = struct.unpack("<B", r.take(1, "ndim"))
        shape = tuple(_U32.unpack(r.take(4, "dims"))[0] for _ in range(ndim))
        size = int(np.prod(shape, dtype=np.int64))
        data = np.frombuffer(r.take(4 * size, name), dtype="<f4").reshape(shape)
        tensors[name] = data.astype(np.float32)
    if r.pos != len(buf):
        raise FormatError("trailing bytes after checkpoint tensors")
    params = {k: v for k, v in tensors.items() if not k.startswith((_M, _V))}
    optimizer = None
    if meta["optimizer"] is not None:
        o = meta["optimizer"]
        optimizer = AdamState(
            step=o["step"],
            m={k[len(_M) :]: v for k, v in tensors.items() if k.startswith(_M)},
            v={k[len(_V) :]: v for k, v in tensors.items() if k.startswith(_V)},
            beta1=o["beta1"],
            beta2=o["beta2"],
            eps=o["eps"],
        )
    return Checkpoint(config, params, step, optimizer, meta.get("extra", {}))


def save_checkpoint(ckpt, path):
    with open(path, "wb") as f:
        f.write(encode_checkpoint(ckpt))


def load_checkpoint(path, expected=None):
    with open(path, "rb") as f:
        return decode_checkpoint(f.read(), expected)
