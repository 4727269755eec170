"""Versioned little-endian binary files for trained models.

Layout: 4 magic bytes, uint16 format version, then a model-specific
header of uint32 shapes and float64 scalars, then float64 arrays.
"""
from __future__ import annotations

import struct

import numpy as np

from ..errors import ParameterError
from .mlp import MLPModel
from .svm import SVMModel

MLP_MAGIC = b"SSNN"
SVM_MAGIC = b"SSSV"
VERSION = 1


def _f64(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def dumps_mlp(model: MLPModel) -> bytes:
    sizes = model.layer_sizes
    parts = [MLP_MAGIC, struct.pack("<HI", VERSION, len(sizes))]
    parts.append(struct.pack(f"<{len(sizes)}I", *sizes))
    parts.append(struct.pack("<d", model.dropout_p))
    for W, b in zip(model.weights, model.biases):
        parts += [_f64(W), _f64(b)]
    return b"".join(parts)


def dumps_svm(model: SVMModel) -> bytes:
    n, d = model.support_vectors.shape
    head = struct.pack("<HIIddd", VERSION, n, d, model.gamma, model.C, model.bias)
    return SVM_MAGIC + head + _f64(model.dual_coeffs) + _f64(model.support_vectors)


class _Reader:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def unpack(self, fmt):
        try:
            vals = struct.unpack_from(fmt, self.data, self.pos)
        except struct.error as exc:
            raise ParameterError("model file is truncated") from exc
        self.pos += struct.calcsize(fmt)
        return vals

    def array(self, shape):
        count = int(np.prod(shape))
        end = self.pos + 8 * count
        if end > len(self.data):
            raise ParameterError("model file is truncated")
        out = np.frombuffer(self.data[self.pos : end], dtype="<f8").astype(float).reshape(shape)
        self.pos = end
        return out


def loads(data: bytes):
    """Decode either model type from its bytes."""
    model, r = _decode(data)
    if r.pos != len(r.data):
        raise ParameterError(f"{len(r.data) - r.pos} unexpected trailing bytes in model file")
    return model


def _decode(data):
    magic = bytes(data[:4])
    r = _Reader(data)
    r.pos = 4
    (version,) = r.unpack("<H")
    if version != VERSION:
        raise ParameterError(f"unsupported model format version {version}")
    if magic == MLP_MAGIC:
        (count,) = r.unpack("<I")
        sizes = r.unpack(f"<{count}I")
        (dropout,) = r.unpack("<d")
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append(r.array((fan_in, fan_out)))
            biases.append(r.array((fan_out,)))
        return MLPModel(tuple(sizes), weights, biases, dropout), r
    if magic == SVM_MAGIC:
        n, d, gamma, C, bias = r.unpack("<IIddd")
        coef = r.array((n,))
        sv = r.array((n, d))
        return SVMModel(sv, coef, bias, gamma, C), r
    raise ParameterError(f"unrecognised model magic {magic!r}")


def save_model(path, model) -> None:
    if isinstance(model, MLPModel):
        data = dumps_mlp(model)
    elif isinstance(model, SVMModel):
        data = dumps_svm(model)
    else:
        raise ParameterError(f"cannot serialise {type(model).__name__}")
    with open(path, "wb") as fh:
        fh.write(data)


def load_model(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
