"""Binary model files.

Layout::

    8 bytes   magic b"DYNTEXMF"
    4 bytes   format version, uint32 little-endian
    8 bytes   header length N, uint64 little-endian
    N bytes   UTF-8 JSON header (sorted keys)
    ...       matrices in header order, float64 little-endian, column-major

The header carries model_kind, dimensions, parameters and training history,
plus the name and shape of every stored matrix. Writing is deterministic, so
identical models give byte-identical files and loading is bit-exact.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict

import numpy as np

from .avdl import AvdlModel, AvdlParams, LoopRecord
from .errors import DataError
from .lds import LdsModel

MAGIC = b"DYNTEXMF"
FORMAT_VERSION = 1

_MATRICES = {
    "avdl": ("transition", "dictionary"),
    "lds": ("transition", "pcs", "states", "singular_values"),
}


def encode_model(model) -> bytes:
    kind = model.kind
    matrices = []
    for name in _MATRICES[kind]:
        a = np.asarray(getattr(model, name), dtype="<f8")
        if a.ndim == 1:
            a = a.reshape(-1, 1)
        matrices.append((name, a))
    header = {
        "format_version": FORMAT_VERSION,
        "model_kind": kind,
        "m": model.m,
        "k": model.k,
        "height": model.height,
        "width": model.width,
        "matrices": [[name, list(a.shape)] for name, a in matrices],
    }
    if kind == "avdl":
        header["params"] = model.params.to_dict()
        header["history"] = [asdict(r) for r in model.history]
        header["initial_objective"] = model.initial_objective
    else:
        header["compression_rate"] = model.compression_rate
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    parts = [MAGIC, struct.pack("<IQ", FORMAT_VERSION, len(blob)), blob]
    parts.extend(a.tobytes(order="F") for _, a in matrices)
    return b"".join(parts)


def decode_model(buf: bytes):
    if buf[:8] != MAGIC:
        raise DataError("not a model file (bad magic)")
    try:
        version, hlen = struct.unpack_from("<IQ", buf, 8)
    except struct.error:
        raise DataError("truncated model file") from None
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported model format version {version}, expected {FORMAT_VERSION}")
    pos = 20
    try:
        header = json.loads(buf[pos : pos + hlen].decode())
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise DataError("corrupt model header") from None
    pos += hlen
    if header.get("format_version") != FORMAT_VERSION:
        raise DataError("model header version mismatch")
    arrays = {}
    for name, shape in header["matrices"]:
        count = int(np.prod(shape))
        raw = buf[pos : pos + 8 * count]
        if len(raw) != 8 * count:
            raise DataError(f"truncated matrix {name!r} in model file")
        arrays[name] = np.frombuffer(raw, dtype="<f8").reshape(shape, order="F").astype(float)
        pos += 8 * count
    kind = header.get("model_kind")
    if kind == "avdl":
        return AvdlModel(
            dictionary=arrays["dictionary"],
            transition=arrays["transition"],
            params=AvdlParams.from_dict(header["params"]),
            history=[LoopRecord(**r) for r in header["history"]],
            height=header["height"],
            width=header["width"],
            initial_objective=header["initial_objective"],
        )
    if kind == "lds":
        return LdsModel(
            pcs=arrays["pcs"],
            transition=arrays["transition"],
            states=arrays["states"],
            singular_values=arrays["singular_values"][:, 0],
            height=header["height"],
            width=header["width"],
        )
    raise DataError(f"unknown model kind {kind!r}")


def save_model(model, path) -> None:
    with open(path, "wb") as fh:
        fh.write(encode_model(model))


def load_model(path):
    try:
        with open(path, "rb") as fh:
            return decode_model(fh.read())
    except FileNotFoundError:
        raise DataError(f"missing model file: {path}") from None
