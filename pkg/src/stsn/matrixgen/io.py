"""Binary dataset files: fixed header, then per-problem metadata and panel bytes."""

from __future__ import annotations

import json
import struct

import numpy as np

from ..errors import FormatError
from .symbolic import PROBLEM_TYPES, TYPE_CODES, MatrixProblem, Rule, SymbolicPanel

MAGIC = b"STSN"
VERSION = 1
_HEADER = struct.Struct("<4sHIHHB")
_PROBLEM = struct.Struct("<BBI")
N_PANELS = 16


def to_bytes(images):
    return np.round(np.asarray(images, dtype=np.float64) * 255.0).clip(0, 255).astype(np.uint8)


def from_bytes(raw):
    return raw.astype(np.float32) / np.float32(255.0)


def encode_dataset(problems):
    if problems:
        h, w, c = problems[0].images.shape[1:]
    else:
        h = w = c = 0
    parts = [_HEADER.pack(MAGIC, VERSION, len(problems), h, w, c)]
    for p in problems:
        if p.images is None or p.images.shape != (N_PANELS, h, w, c):
            shape = None if p.images is None else p.images.shape
            raise ValueError(f"inconsistent image dims {shape}, expected {(N_PANELS, h, w, c)}")
        meta = json.dumps(p.metadata(), sort_keys=True, separators=(",", ":")).encode("utf-8")
        parts.append(_PROBLEM.pack(p.answer_index, TYPE_CODES[p.problem_type], len(meta)))
        parts.append(meta)
        parts.append(to_bytes(p.images).tobytes())
    return b"".join(parts)


def write_dataset(problems, path):
    with open(path, "wb") as f:
        f.write(encode_dataset(problems))


def _take(buf, pos, n, what):
    if pos + n > len(buf):
        raise FormatError(f"truncated file while reading {what}")
    return buf[pos : pos + n], pos + n


def decode_dataset(buf):
    head, pos = _take(buf, 0, _HEADER.size, "header")
    magic, version, count, h, w, c = _HEADER.unpack(head)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    panel_bytes = N_PANELS * h * w * c
    problems = []
    for i in range(count):
        rec, pos = _take(buf, pos, _PROBLEM.size, f"problem {i}")
        answer, type_code, meta_len = _PROBLEM.unpack(rec)
        if type_code >= len(PROBLEM_TYPES):
            raise FormatError(f"unknown problem type code {type_code}")
        raw_meta, pos = _take(buf, pos, meta_len, f"metadata of problem {i}")
        try:
            meta = json.loads(raw_meta.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise FormatError(f"corrupt metadata in problem {i}: {exc}") from exc
        raw, pos = _take(buf, pos, panel_bytes, f"images of problem {i}")
        images = from_bytes(np.frombuffer(raw, dtype=np.uint8).reshape(N_PANELS, h, w, c))
        problems.append(
            MatrixProblem(
                PROBLEM_TYPES[type_code],
                [Rule.from_dict(r) for r in meta["rules"]],
                [SymbolicPanel.from_list(p) for p in meta["context"]],
                [SymbolicPanel.from_list(p) for p in meta["candidates"]],
                answer_index=answer,
                images=images,
            )
        )
    if pos != len(buf):
        raise FormatError(f"{len(buf) - pos} trailing bytes after {count} problems")
    return problems


def read_dataset(path):
    with open(path, "rb") as f:
        return decode_dataset(f.read())
